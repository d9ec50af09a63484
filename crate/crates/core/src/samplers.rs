//! Seeded generators for the 4-nearest-neighbour Gaussian, grid Ising and
//! layered binary/Gaussian designs, plus exact enumeration for small Ising
//! models.
//!
//! Every sampler is a pure function of its spec, `n` and seed.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NodeCoef};
use crate::error::{config, numerical, Result};
use crate::loss::sigmoid;
use crate::rng::Stream;

/// Largest `d` accepted by [`ising_exact_distribution`].
pub const MAX_EXACT_ISING_DIM: usize = 15;

/// Sign assignment for grid edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EdgeSigns {
    #[default]
    Positive,
    /// Independent fair `+/-` per edge, in edge-list order, from `seed`.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub d: usize,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingSpec {
    pub rows: usize,
    pub cols: usize,
    pub mu: f64,
    #[serde(default)]
    pub signs: EdgeSigns,
}

/// Two stacked `rows x cols` layers: nodes `0..rc` are binary, nodes
/// `rc..2rc` Gaussian with unit conditional variance. Node `p` of the first
/// layer is linked to node `rc + p` of the second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedSpec {
    pub rows: usize,
    pub cols: usize,
    pub mu: f64,
    #[serde(default)]
    pub signs: EdgeSigns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            thin: 10,
            seed: 0,
        }
    }
}

impl GibbsConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(config("thin must be >= 1"));
        }
        Ok(())
    }
}

fn column_names(d: usize) -> Vec<String> {
    (0..d).map(|k| format!("x{k}")).collect()
}

/// Pairs `(j, k)`, `j < k`, at circular distance 1 or 2.
pub fn four_nn_edges(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in 0..d {
        for k in j + 1..d {
            if matches!(k - j, 1 | 2) || k - j == d - 1 || k - j == d - 2 {
                out.push((j, k));
            }
        }
    }
    out
}

/// Edges of a `rows x cols` grid with nodes numbered row-major from `offset`.
pub fn grid_edges(rows: usize, cols: usize, offset: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let p = offset + r * cols + c;
            if c + 1 < cols {
                out.push((p, p + 1));
            }
            if r + 1 < rows {
                out.push((p, p + cols));
            }
        }
    }
    out.sort_unstable();
    out
}

impl GaussianSpec {
    pub fn truth_edges(&self) -> Vec<(usize, usize)> {
        if self.mu == 0.0 {
            Vec::new()
        } else {
            four_nn_edges(self.d)
        }
    }
}

/// Precision matrix with unit diagonal and `mu` on the 4-nearest-neighbour
/// circulant pattern.
///
/// `mu` up to and including `0.25` is accepted; positive definiteness is
/// confirmed by a Cholesky factorization.
pub fn build_precision(spec: &GaussianSpec) -> Result<DMatrix<f64>> {
    if spec.d < 5 {
        return Err(config(format!("gaussian design needs d >= 5, got {}", spec.d)));
    }
    if !(spec.mu >= 0.0 && spec.mu <= 0.25) {
        return Err(config(format!(
            "gaussian design needs 0 <= mu <= 0.25 (diagonal dominance), got {}",
            spec.mu
        )));
    }
    let mut theta = DMatrix::identity(spec.d, spec.d);
    for (j, k) in four_nn_edges(spec.d) {
        theta[(j, k)] = spec.mu;
        theta[(k, j)] = spec.mu;
    }
    if Cholesky::new(theta.clone()).is_none() {
        return Err(numerical("precision matrix is not positive definite"));
    }
    Ok(theta)
}

/// Node coefficients implied by a Gaussian precision matrix: `beta_jk = -theta_jk`.
pub fn gaussian_true_beta(theta: &DMatrix<f64>, j: usize) -> NodeCoef {
    let d = theta.nrows();
    NodeCoef {
        node: j,
        beta: (0..d).filter(|&k| k != j).map(|k| -theta[(j, k)]).collect(),
    }
}

/// `n` i.i.d. rows from `N(0, theta^-1)`.
///
/// With `theta = L L'`, each row is `L'^-1 z` for a standard normal `z`.
pub fn sample_gaussian(theta: &DMatrix<f64>, n: usize, seed: u64) -> Result<Dataset> {
    let d = theta.nrows();
    if theta.ncols() != d {
        return Err(config("precision matrix is not square"));
    }
    let chol = Cholesky::new(theta.clone()).ok_or_else(|| numerical("precision matrix is not positive definite"))?;
    let l = chol.l();
    let mut rng = Stream::new(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut x = vec![0.0; d];
    for _ in 0..n {
        let z: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        // back-substitution for L' x = z
        for a in (0..d).rev() {
            let mut s = z[a];
            for b in a + 1..d {
                s -= l[(b, a)] * x[b];
            }
            x[a] = s / l[(a, a)];
        }
        values.extend_from_slice(&x);
    }
    Dataset::new(values, n, d)?.with_column_names(column_names(d))
}

fn signed_couplings(d: usize, edges: &[(usize, usize)], mu: f64, signs: EdgeSigns) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(d, d);
    let mut rng = match signs {
        EdgeSigns::Positive => None,
        EdgeSigns::Random { seed } => Some(Stream::new(seed)),
    };
    for &(j, k) in edges {
        let negative = rng.as_mut().is_some_and(|r| r.bernoulli(0.5));
        let sign = if negative { -1.0 } else { 1.0 };
        b[(j, k)] = sign * mu;
        b[(k, j)] = sign * mu;
    }
    b
}

impl IsingSpec {
    pub fn d(&self) -> usize {
        self.rows * self.cols
    }

    pub fn truth_edges(&self) -> Vec<(usize, usize)> {
        if self.mu == 0.0 {
            Vec::new()
        } else {
            grid_edges(self.rows, self.cols, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.d() < 2 {
            return Err(config(format!(
                "ising grid {}x{} must have at least two nodes",
                self.rows, self.cols
            )));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(config(format!("ising design needs 0 <= mu <= 1, got {}", self.mu)));
        }
        Ok(())
    }

    /// Symmetric coupling matrix `theta` with zero diagonal.
    pub fn couplings(&self) -> Result<DMatrix<f64>> {
        self.validate()?;
        Ok(signed_couplings(self.d(), &grid_edges(self.rows, self.cols, 0), self.mu, self.signs))
    }
}

/// `P(x_j = 1 | x_-j) = sigmoid(sum_k theta_jk x_k)`.
pub fn ising_conditional(theta: &DMatrix<f64>, x: &[f64], j: usize) -> f64 {
    let eta: f64 = (0..x.len()).filter(|&k| k != j).map(|k| theta[(j, k)] * x[k]).sum();
    sigmoid(eta)
}

/// Systematic-scan Gibbs sampler over `{0, 1}^d`. The chain starts from a
/// uniform random state; `burn_in` sweeps are discarded and one state is
/// kept every `thin` sweeps.
pub fn sample_ising(spec: &IsingSpec, n: usize, cfg: &GibbsConfig) -> Result<Dataset> {
    cfg.validate()?;
    let theta = spec.couplings()?;
    let d = spec.d();
    let mut rng = Stream::new(cfg.seed);
    let mut x: Vec<f64> = (0..d).map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 }).collect();
    let mut values = Vec::with_capacity(n * d);
    let sweep = |x: &mut Vec<f64>, rng: &mut Stream| {
        for j in 0..d {
            let p = ising_conditional(&theta, x, j);
            x[j] = if rng.uniform() < p { 1.0 } else { 0.0 };
        }
    };
    for _ in 0..cfg.burn_in {
        sweep(&mut x, &mut rng);
    }
    for _ in 0..n {
        for _ in 0..cfg.thin {
            sweep(&mut x, &mut rng);
        }
        values.extend_from_slice(&x);
    }
    Dataset::new(values, n, d)?.with_column_names(column_names(d))
}

/// Exact probabilities of all `2^d` states. State `s` has `x_j = (s >> j) & 1`.
pub fn ising_exact_distribution(spec: &IsingSpec) -> Result<Vec<f64>> {
    let theta = spec.couplings()?;
    ising_exact_from_couplings(&theta)
}

pub fn ising_exact_from_couplings(theta: &DMatrix<f64>) -> Result<Vec<f64>> {
    let d = theta.nrows();
    if d > MAX_EXACT_ISING_DIM {
        return Err(config(format!(
            "exact enumeration limited to d <= {MAX_EXACT_ISING_DIM}, got d = {d}"
        )));
    }
    let energies: Vec<f64> = (0..1usize << d)
        .map(|s| {
            let mut e = 0.0;
            for j in 0..d {
                if (s >> j) & 1 == 1 {
                    for k in j + 1..d {
                        if (s >> k) & 1 == 1 {
                            e += theta[(j, k)];
                        }
                    }
                }
            }
            e
        })
        .collect();
    let top = energies.iter().fold(f64::NEG_INFINITY, |m, &e| m.max(e));
    let weights: Vec<f64> = energies.iter().map(|e| (e - top).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// Index of a `{0,1}` row in the table of [`ising_exact_distribution`].
pub fn state_index(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .fold(0, |s, (j, _)| s | (1 << j))
}

impl MixedSpec {
    /// Nodes per layer.
    pub fn layer_size(&self) -> usize {
        self.rows * self.cols
    }

    pub fn d(&self) -> usize {
        2 * self.layer_size()
    }

    /// Within-layer grid edges of both layers plus the links between layers.
    pub fn grid(&self) -> Vec<(usize, usize)> {
        let m = self.layer_size();
        let mut e = grid_edges(self.rows, self.cols, 0);
        e.extend(grid_edges(self.rows, self.cols, m));
        e.extend((0..m).map(|p| (p, p + m)));
        e.sort_unstable();
        e
    }

    pub fn truth_edges(&self) -> Vec<(usize, usize)> {
        if self.mu == 0.0 {
            Vec::new()
        } else {
            self.grid()
        }
    }

    /// Symmetric couplings; the Gaussian block of `I - B` must be positive
    /// definite for the joint density to exist.
    pub fn couplings(&self) -> Result<DMatrix<f64>> {
        if self.layer_size() == 0 {
            return Err(config("mixed grid must have at least one node per layer"));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(config(format!("mixed design needs mu >= 0, got {}", self.mu)));
        }
        let b = signed_couplings(self.d(), &self.grid(), self.mu, self.signs);
        let m = self.layer_size();
        let prec = DMatrix::from_fn(m, m, |a, c| if a == c { 1.0 } else { 0.0 } - b[(m + a, m + c)]);
        if Cholesky::new(prec).is_none() {
            return Err(config(format!(
                "mixed design with mu = {} is not normalizable: the Gaussian block of I - B is not positive definite",
                self.mu
            )));
        }
        Ok(b)
    }
}

/// Gibbs sampler for the layered model: binary nodes draw from
/// `sigmoid(sum_k b_jk x_k)`, Gaussian nodes from `N(sum_k b_jk x_k, 1)`.
/// The chain starts at zero.
pub fn sample_mixed(spec: &MixedSpec, n: usize, cfg: &GibbsConfig) -> Result<Dataset> {
    cfg.validate()?;
    let b = spec.couplings()?;
    let (m, d) = (spec.layer_size(), spec.d());
    let mut rng = Stream::new(cfg.seed);
    let mut x = vec![0.0; d];
    let mut values = Vec::with_capacity(n * d);
    let sweep = |x: &mut Vec<f64>, rng: &mut Stream| {
        for j in 0..d {
            let eta: f64 = (0..d).filter(|&k| k != j).map(|k| b[(j, k)] * x[k]).sum();
            x[j] = if j < m {
                if rng.uniform() < sigmoid(eta) {
                    1.0
                } else {
                    0.0
                }
            } else {
                eta + rng.normal()
            };
        }
    };
    for _ in 0..cfg.burn_in {
        sweep(&mut x, &mut rng);
    }
    for _ in 0..n {
        for _ in 0..cfg.thin {
            sweep(&mut x, &mut rng);
        }
        values.extend_from_slice(&x);
    }
    Dataset::new(values, n, d)?.with_column_names(column_names(d))
}

/// Node coefficients implied by a coupling matrix: `beta_jk = b_jk`.
pub fn coupling_beta(b: &DMatrix<f64>, j: usize) -> NodeCoef {
    NodeCoef {
        node: j,
        beta: (0..b.nrows()).filter(|&k| k != j).map(|k| b[(j, k)]).collect(),
    }
}
