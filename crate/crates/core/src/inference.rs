//! Composite pairwise score test for a single edge, all-edge testing with
//! Bonferroni control, and subsample-stability selection.
//!
//! Every quantity that mixes nodes `j` and `k` is formed as a sum of exactly
//! two per-node terms. Floating-point addition of two operands is
//! commutative, so the test for `(j, k)` and `(k, j)` agrees bit for bit.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::CvConfig;
use crate::dantzig::{hessian_blocks, solve_dantzig, DEFAULT_LAMBDA_D};
use crate::data::{slot, Dataset, NodeCoef};
use crate::error::{config, usage, Result};
use crate::loss::{dot, kernel_row_means, stack_blocks, NodeDesign};
use crate::rng::Stream;
use crate::solver::{estimate_node, LambdaSelection, SolverConfig};
use crate::stats::{normal_quantile, two_sided_p};

/// Variance below which an edge is treated as degenerate.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Estimation settings used by the test pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub solver: SolverConfig,
    pub selection: LambdaSelection,
    pub lambda_d: f64,
}

impl Default for InferenceConfig {
    /// Capped-l1 with per-node 10-fold cross-validation and `lambda_d = 0.2`.
    fn default() -> Self {
        Self {
            solver: SolverConfig::capped_l1(1.0).expect("valid default"),
            selection: LambdaSelection::CrossValidated(CvConfig::default()),
            lambda_d: DEFAULT_LAMBDA_D,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeTest {
    /// `(min, max)` of the two nodes.
    pub edge: (usize, usize),
    pub s_hat: f64,
    pub sigma_hat: f64,
    pub z: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    /// `sigma_hat^2` fell below the degeneracy threshold; `p = 1`.
    pub degenerate: bool,
    pub w_l1: (f64, f64),
}

/// Gradient of `L_j` at `beta_j` with its `k` coordinate zeroed.
fn null_gradient(data: &Dataset, j: usize, k: usize, beta_j: &NodeCoef) -> Result<Vec<f64>> {
    beta_j.check(data, j)?;
    let design = NodeDesign::all_pairs(data, j)?;
    Ok(design.gradient(&beta_j.with_zeroed(k).beta))
}

fn check_weights(data: &Dataset, w: &[f64], who: &str) -> Result<()> {
    if w.len() != data.d() - 2 {
        return Err(usage(format!(
            "{who} has length {}, expected {}",
            w.len(),
            data.d() - 2
        )));
    }
    Ok(())
}

/// Decorrelated score of one node: `g[k] - w' g[-k]`, split into its two parts.
fn node_score(g: &[f64], s: usize, w: &[f64]) -> (f64, f64) {
    let rest: Vec<f64> = g.iter().enumerate().filter(|&(i, _)| i != s).map(|(_, v)| *v).collect();
    (g[s], dot(w, &rest))
}

/// `S_jk = grad_jk L_j + grad_kj L_k - w_jk' grad_{j,-k} L_j - w_kj' grad_{k,-j} L_k`,
/// all gradients at the coefficient vectors with the shared entry zeroed.
pub fn score_statistic(
    data: &Dataset,
    j: usize,
    k: usize,
    beta_hat_j: &NodeCoef,
    beta_hat_k: &NodeCoef,
    w_jk: &[f64],
    w_kj: &[f64],
) -> Result<f64> {
    if j == k {
        return Err(usage("an edge needs two distinct nodes"));
    }
    check_weights(data, w_jk, "w_jk")?;
    check_weights(data, w_kj, "w_kj")?;
    let gj = null_gradient(data, j, k, beta_hat_j)?;
    let gk = null_gradient(data, k, j, beta_hat_k)?;
    let (aj, bj) = node_score(&gj, slot(j, k), w_jk);
    let (ak, bk) = node_score(&gk, slot(k, j), w_kj);
    Ok((aj + ak) - (bj + bk))
}

/// Per-observation decorrelated Hajek terms `s_i = v' m_i` with
/// `v = (1, -w_jk, -w_kj)`.
fn hajek_scores(
    data: &Dataset,
    j: usize,
    k: usize,
    beta_hat_j: &NodeCoef,
    beta_hat_k: &NodeCoef,
    w_jk: &[f64],
    w_kj: &[f64],
) -> Result<Vec<f64>> {
    let m = data.d() - 1;
    let mj = kernel_row_means(data, j, &beta_hat_j.with_zeroed(k))?;
    let mk = kernel_row_means(data, k, &beta_hat_k.with_zeroed(j))?;
    let (sj, sk) = (slot(j, k), slot(k, j));
    Ok((0..data.n())
        .map(|i| {
            let (aj, bj) = node_score(&mj[i * m..(i + 1) * m], sj, w_jk);
            let (ak, bk) = node_score(&mk[i * m..(i + 1) * m], sk, w_kj);
            (aj + ak) - (bj + bk)
        })
        .collect())
}

/// `sigma_hat^2 = v' Sigma_hat v` with `v = (1, -w_jk, -w_kj)`, evaluated as
/// `n^-1 sum_i (v' m_i)^2`.
pub fn variance_estimate(
    data: &Dataset,
    j: usize,
    k: usize,
    beta_hat_j: &NodeCoef,
    beta_hat_k: &NodeCoef,
    w_jk: &[f64],
    w_kj: &[f64],
) -> Result<f64> {
    if j == k {
        return Err(usage("an edge needs two distinct nodes"));
    }
    beta_hat_j.check(data, j)?;
    beta_hat_k.check(data, k)?;
    check_weights(data, w_jk, "w_jk")?;
    check_weights(data, w_kj, "w_kj")?;
    let s = hajek_scores(data, j, k, beta_hat_j, beta_hat_k, w_jk, w_kj)?;
    Ok(s.iter().map(|v| v * v).sum::<f64>() / data.n() as f64)
}

/// The full `(2d-3) x (2d-3)` matrix
/// `Sigma_hat = n^-1 sum_i m_i m_i'` of stacked Hajek terms, evaluated at
/// `(0, beta_{j,-k}, beta_{k,-j})`.
pub fn sigma_matrix(
    data: &Dataset,
    j: usize,
    k: usize,
    beta_hat_j: &NodeCoef,
    beta_hat_k: &NodeCoef,
) -> Result<DMatrix<f64>> {
    if j == k {
        return Err(usage("an edge needs two distinct nodes"));
    }
    beta_hat_j.check(data, j)?;
    beta_hat_k.check(data, k)?;
    let (n, m) = (data.n(), data.d() - 1);
    let mj = kernel_row_means(data, j, &beta_hat_j.with_zeroed(k))?;
    let mk = kernel_row_means(data, k, &beta_hat_k.with_zeroed(j))?;
    let q = 2 * m - 1;
    let mut sigma = DMatrix::zeros(q, q);
    for i in 0..n {
        let v = stack_blocks(j, k, &mj[i * m..(i + 1) * m], &mk[i * m..(i + 1) * m]);
        let v = nalgebra::DVector::from_vec(v);
        sigma += &v * v.transpose();
    }
    Ok(sigma / n as f64)
}

/// Block expansion of the variance:
/// `S_00 - 2 S_0J w_jk - 2 S_0K w_kj + w_jk' S_JJ w_jk + w_kj' S_KK w_kj + 2 w_jk' S_JK w_kj`,
/// where `J` and `K` index the `j,-k` and `k,-j` blocks of `sigma`.
pub fn expanded_variance(sigma: &DMatrix<f64>, w_jk: &[f64], w_kj: &[f64]) -> f64 {
    let a = w_jk.len();
    let (jb, kb) = (1, 1 + a);
    let mut v = sigma[(0, 0)];
    for (p, w) in w_jk.iter().enumerate() {
        v -= 2.0 * sigma[(0, jb + p)] * w;
    }
    for (p, w) in w_kj.iter().enumerate() {
        v -= 2.0 * sigma[(0, kb + p)] * w;
    }
    for (p, wp) in w_jk.iter().enumerate() {
        for (q, wq) in w_jk.iter().enumerate() {
            v += wp * sigma[(jb + p, jb + q)] * wq;
        }
    }
    for (p, wp) in w_kj.iter().enumerate() {
        for (q, wq) in w_kj.iter().enumerate() {
            v += wp * sigma[(kb + p, kb + q)] * wq;
        }
    }
    for (p, wp) in w_jk.iter().enumerate() {
        for (q, wq) in w_kj.iter().enumerate() {
            v += 2.0 * wp * sigma[(jb + p, kb + q)] * wq;
        }
    }
    v
}

/// `v' sigma v` with `v = (1, -w_jk, -w_kj)`.
pub fn quadratic_form_variance(sigma: &DMatrix<f64>, w_jk: &[f64], w_kj: &[f64]) -> f64 {
    let mut v = vec![1.0];
    v.extend(w_jk.iter().map(|w| -w));
    v.extend(w_kj.iter().map(|w| -w));
    let v = nalgebra::DVector::from_vec(v);
    (v.transpose() * sigma * &v)[(0, 0)]
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(usage(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Dantzig weights for node `j` against `k`.
pub fn projection_weights(
    data: &Dataset,
    j: usize,
    k: usize,
    beta_hat_j: &NodeCoef,
    lambda_d: f64,
) -> Result<Vec<f64>> {
    let mut problem = hessian_blocks(data, j, k, beta_hat_j)?;
    problem.lambda_d = lambda_d;
    Ok(solve_dantzig(&problem)?.w_hat)
}

/// Test of `beta_jk = 0` given node estimates for `j` and `k`.
pub fn edge_test_with(
    data: &Dataset,
    j: usize,
    k: usize,
    alpha: f64,
    beta_hat_j: &NodeCoef,
    beta_hat_k: &NodeCoef,
    lambda_d: f64,
) -> Result<EdgeTest> {
    check_alpha(alpha)?;
    if j == k || j >= data.d() || k >= data.d() {
        return Err(usage(format!("invalid edge ({j}, {k}) for d = {}", data.d())));
    }
    let w_jk = projection_weights(data, j, k, beta_hat_j, lambda_d)?;
    let w_kj = projection_weights(data, k, j, beta_hat_k, lambda_d)?;
    let s_hat = score_statistic(data, j, k, beta_hat_j, beta_hat_k, &w_jk, &w_kj)?;
    let var = variance_estimate(data, j, k, beta_hat_j, beta_hat_k, &w_jk, &w_kj)?;
    let l1 = |w: &[f64]| w.iter().map(|x| x.abs()).sum::<f64>();
    let (lj, lk) = (l1(&w_jk), l1(&w_kj));
    let edge = (j.min(k), j.max(k));
    let w_l1 = if j < k { (lj, lk) } else { (lk, lj) };
    if !(var >= DEGENERATE_VARIANCE) {
        log::warn!("edge ({}, {}): degenerate variance {var:.3e}; reporting p = 1", edge.0, edge.1);
        return Ok(EdgeTest {
            edge,
            s_hat,
            sigma_hat: var.max(0.0).sqrt(),
            z: 0.0,
            p_value: 1.0,
            reject: false,
            alpha,
            degenerate: true,
            w_l1,
        });
    }
    let sigma_hat = var.sqrt();
    let z = (data.n() as f64).sqrt() * s_hat / (2.0 * sigma_hat);
    let crit = normal_quantile(1.0 - alpha / 2.0)?;
    Ok(EdgeTest {
        edge,
        s_hat,
        sigma_hat,
        z,
        p_value: two_sided_p(z),
        reject: z.abs() > crit,
        alpha,
        degenerate: false,
        w_l1,
    })
}

/// Estimates the node vectors of `j` and `k` per `cfg`, then tests the edge.
pub fn edge_test(data: &Dataset, j: usize, k: usize, alpha: f64, cfg: &InferenceConfig) -> Result<EdgeTest> {
    check_alpha(alpha)?;
    if j == k || j >= data.d() || k >= data.d() {
        return Err(usage(format!("invalid edge ({j}, {k}) for d = {}", data.d())));
    }
    let bj = estimate_node(data, j, &cfg.solver, &cfg.selection)?.coef();
    let bk = estimate_node(data, k, &cfg.solver, &cfg.selection)?.coef();
    edge_test_with(data, j, k, alpha, &bj, &bk, cfg.lambda_d)
}

/// Node-wise estimates for every node.
pub fn fit_nodes(data: &Dataset, cfg: &InferenceConfig) -> Result<Vec<NodeCoef>> {
    (0..data.d())
        .into_par_iter()
        .map(|j| estimate_node(data, j, &cfg.solver, &cfg.selection).map(|e| e.coef()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    None,
    Bonferroni,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    SingleTest,
    Bonferroni,
    Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeFailure {
    pub edge: (usize, usize),
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphResult {
    pub adjacency: Vec<Vec<bool>>,
    /// Raw p-values (median over subsamples in stability mode); diagonal 1.
    pub p_matrix: Vec<Vec<f64>>,
    pub method: TestMethod,
    pub alpha: f64,
    /// Per-test level actually applied (`alpha / (d(d-1)/2)` under Bonferroni).
    pub level: f64,
    pub tests: Vec<EdgeTest>,
    pub failures: Vec<EdgeFailure>,
    /// Stability mode: number of subsamples selecting each edge.
    pub selection_counts: Option<Vec<Vec<usize>>>,
}

impl GraphResult {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let d = self.adjacency.len();
        (0..d)
            .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
            .filter(|&(j, k)| self.adjacency[j][k])
            .collect()
    }
}

fn all_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|j| (j + 1..d).map(move |k| (j, k))).collect()
}

/// Tests every pair given node estimates. Failed edges get `p = 1` and are
/// listed in `failures`.
pub fn test_all_edges_with(
    data: &Dataset,
    alpha: f64,
    correction: Correction,
    nodes: &[NodeCoef],
    lambda_d: f64,
) -> Result<GraphResult> {
    check_alpha(alpha)?;
    let d = data.d();
    if nodes.len() != d {
        return Err(usage(format!("{} node estimates for d = {d}", nodes.len())));
    }
    let pairs = all_pairs(d);
    let level = match correction {
        Correction::None => alpha,
        Correction::Bonferroni => alpha / pairs.len() as f64,
    };
    let crit = normal_quantile(1.0 - level / 2.0)?;
    let outcomes: Vec<_> = pairs
        .par_iter()
        .map(|&(j, k)| edge_test_with(data, j, k, alpha, &nodes[j], &nodes[k], lambda_d))
        .collect();

    let mut adjacency = vec![vec![false; d]; d];
    let mut p_matrix = vec![vec![1.0; d]; d];
    let mut tests = Vec::new();
    let mut failures = Vec::new();
    for (&(j, k), out) in pairs.iter().zip(outcomes) {
        match out {
            Ok(t) => {
                let hit = !t.degenerate && t.z.abs() > crit;
                adjacency[j][k] = hit;
                adjacency[k][j] = hit;
                p_matrix[j][k] = t.p_value;
                p_matrix[k][j] = t.p_value;
                tests.push(t);
            }
            Err(e) => failures.push(EdgeFailure {
                edge: (j, k),
                message: e.to_string(),
            }),
        }
    }
    Ok(GraphResult {
        adjacency,
        p_matrix,
        method: match correction {
            Correction::None => TestMethod::SingleTest,
            Correction::Bonferroni => TestMethod::Bonferroni,
        },
        alpha,
        level,
        tests,
        failures,
        selection_counts: None,
    })
}

/// Fits every node per `cfg`, then tests every pair.
pub fn test_all_edges(
    data: &Dataset,
    alpha: f64,
    correction: Correction,
    cfg: &InferenceConfig,
) -> Result<GraphResult> {
    check_alpha(alpha)?;
    let nodes = fit_nodes(data, cfg)?;
    test_all_edges_with(data, alpha, correction, &nodes, cfg.lambda_d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub n_subsamples: usize,
    pub keep_threshold: usize,
    pub seed: u64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            n_subsamples: 100,
            keep_threshold: 90,
            seed: 0,
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Repeats the Bonferroni all-edge test on half-samples drawn without
/// replacement and keeps the edges selected at least `keep_threshold` times
/// (and at least once, so a zero threshold gives the union).
///
/// Subsample `b` uses PRNG substream `b` of `stab.seed`.
pub fn stability_select(
    data: &Dataset,
    alpha: f64,
    stab: &StabilityConfig,
    cfg: &InferenceConfig,
) -> Result<GraphResult> {
    check_alpha(alpha)?;
    let (n, d) = (data.n(), data.d());
    if n < 4 {
        return Err(config(format!("stability selection needs n >= 4, got {n}")));
    }
    if stab.n_subsamples == 0 {
        return Err(config("need at least one subsample"));
    }
    let half = n / 2;
    let runs: Vec<Result<GraphResult>> = (0..stab.n_subsamples)
        .into_par_iter()
        .map(|b| {
            let rows = Stream::substream(stab.seed, b as u64).sample_without_replacement(n, half);
            let sub = data.select_rows(&rows)?;
            test_all_edges(&sub, alpha, Correction::Bonferroni, cfg)
        })
        .collect();

    let mut counts = vec![vec![0usize; d]; d];
    let mut pvals: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); d]; d];
    let mut failures = Vec::new();
    let mut level = alpha;
    for (b, run) in runs.into_iter().enumerate() {
        match run {
            Ok(g) => {
                level = g.level;
                for (j, k) in all_pairs(d) {
                    if g.adjacency[j][k] {
                        counts[j][k] += 1;
                        counts[k][j] += 1;
                    }
                    pvals[j][k].push(g.p_matrix[j][k]);
                }
                failures.extend(g.failures.into_iter().map(|f| EdgeFailure {
                    edge: f.edge,
                    message: format!("subsample {b}: {}", f.message),
                }));
            }
            Err(e) => failures.push(EdgeFailure {
                edge: (0, 0),
                message: format!("subsample {b}: {e}"),
            }),
        }
    }

    let mut adjacency = vec![vec![false; d]; d];
    let mut p_matrix = vec![vec![1.0; d]; d];
    for (j, k) in all_pairs(d) {
        let keep = counts[j][k] > 0 && counts[j][k] >= stab.keep_threshold;
        adjacency[j][k] = keep;
        adjacency[k][j] = keep;
        if !pvals[j][k].is_empty() {
            let med = median(&mut pvals[j][k]);
            p_matrix[j][k] = med;
            p_matrix[k][j] = med;
        }
    }
    Ok(GraphResult {
        adjacency,
        p_matrix,
        method: TestMethod::Stability,
        alpha,
        level,
        tests: Vec::new(),
        failures,
        selection_counts: Some(counts),
    })
}
