//! Pairwise pseudo-likelihood loss for one node, its derivatives and the
//! U-statistic kernels they are built from.
//!
//! For node `j` and a pair of observations `(i, i2)` write
//! `a = x_ij - x_i2j`, `z = x_{i,-j} - x_{i2,-j}` and `t = -a * beta'z`.
//! The pair contributes `log(1 + exp(t))` to the loss; the residual ratio is
//! `R = exp(t)`. The loss is the average over pairs, so it is a logistic
//! loss with all-positive labels on the features `u = a * z`:
//!
//! - gradient kernel: `-sigmoid(t) * u`
//! - Hessian kernel: `sigmoid(t) * (1 - sigmoid(t)) * u u'`
//!
//! The exponent is never exponentiated directly: losses go through a
//! softplus and weights through a logistic, both stable for any `|t|`.

use nalgebra::DMatrix;

use crate::data::{slot, Dataset, NodeCoef};
use crate::elementwise::{logistic, softplus_logistic, softplus_sum};
use crate::error::{usage, Result};
use crate::rng::Stream;

/// Which observation pairs enter the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairIndexPlan {
    /// Every pair `i < i2`: `n(n-1)/2` terms.
    #[default]
    AllPairs,
    /// `pair_count` distinct pairs drawn without replacement; the loss is
    /// normalized by the realized count.
    Subsample { pair_count: usize, seed: u64 },
}

impl PairIndexPlan {
    /// Realized pair list in lexicographic order.
    pub fn pairs(&self, n: usize) -> Result<Vec<(usize, usize)>> {
        let total = n * (n - 1) / 2;
        match *self {
            PairIndexPlan::AllPairs => {
                let mut out = Vec::with_capacity(total);
                for i in 0..n {
                    for i2 in i + 1..n {
                        out.push((i, i2));
                    }
                }
                Ok(out)
            }
            PairIndexPlan::Subsample { pair_count, seed } => {
                if pair_count == 0 || pair_count > total {
                    return Err(usage(format!(
                        "pair subsample of {pair_count} out of {total} available pairs"
                    )));
                }
                let mut rng = Stream::new(seed);
                let picks = if pair_count * 2 <= total {
                    let mut set = std::collections::BTreeSet::new();
                    while set.len() < pair_count {
                        set.insert(rng.index(total));
                    }
                    set.into_iter().collect()
                } else {
                    rng.sample_without_replacement(total, pair_count)
                };
                Ok(decode_pairs(n, &picks))
            }
        }
    }

    pub fn pair_count(&self, n: usize) -> usize {
        match *self {
            PairIndexPlan::AllPairs => n * (n - 1) / 2,
            PairIndexPlan::Subsample { pair_count, .. } => pair_count,
        }
    }
}

/// Maps sorted linear pair indices to `(i, i2)` in lexicographic order.
fn decode_pairs(n: usize, sorted: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(sorted.len());
    let mut i = 0;
    let mut start = 0; // linear index of (i, i+1)
    for &idx in sorted {
        while idx >= start + (n - 1 - i) {
            start += n - 1 - i;
            i += 1;
        }
        out.push((i, i + 1 + (idx - start)));
    }
    out
}

#[inline]
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Fixed-order dot product with eight partial sums.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let (ac, bc) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ar, br) = (ac.remainder(), bc.remainder());
    for (x, y) in ac.zip(bc) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ar.iter().zip(br) {
        s += x * y;
    }
    s
}

fn check_node(data: &Dataset, j: usize) -> Result<()> {
    if j >= data.d() {
        return Err(usage(format!("node {j} out of range (d={})", data.d())));
    }
    Ok(())
}

fn check_pair(data: &Dataset, (i, i2): (usize, usize)) -> Result<()> {
    if i == i2 || i >= data.n() || i2 >= data.n() {
        return Err(usage(format!(
            "invalid pair ({i}, {i2}) for n={}",
            data.n()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum PairSet {
    All,
    Listed(Vec<(u32, u32)>),
}

/// Pairs processed per block when the pair set is an explicit list.
const LIST_BLOCK: usize = 512;

/// One node's loss, set up for repeated evaluation.
///
/// Every pair feature factors as `u = a * (x_i - x_i2)` with `a` the
/// difference in column `j`, so the exponents only need the linear predictor
/// `r = X beta` over the other columns: `t = -a * (r_i - r_i2)`. Evaluations
/// are `O(n (d-1))` for the predictor plus one pass over the pairs, and the
/// gradient collapses to `X' q` with `q_i` the net pair weight on row `i`.
/// Columns are centered first; the loss only sees differences.
#[derive(Debug, Clone)]
pub struct NodeDesign {
    node: usize,
    dim: usize,
    n: usize,
    xj: Vec<f64>,
    /// Centered columns other than `j`, one after another.
    x: Vec<f64>,
    pairs: PairSet,
    pair_count: usize,
    curvature_bound: f64,
}

fn centered(col: Vec<f64>) -> Vec<f64> {
    let mean = col.iter().sum::<f64>() / col.len() as f64;
    col.into_iter().map(|v| v - mean).collect()
}

impl NodeDesign {
    pub fn new(data: &Dataset, j: usize, plan: &PairIndexPlan) -> Result<Self> {
        check_node(data, j)?;
        let n = data.n();
        let (pairs, pair_count) = match plan {
            PairIndexPlan::AllPairs => (PairSet::All, n * (n - 1) / 2),
            PairIndexPlan::Subsample { .. } => {
                let list: Vec<(u32, u32)> =
                    plan.pairs(n)?.into_iter().map(|(i, i2)| (i as u32, i2 as u32)).collect();
                let count = list.len();
                (PairSet::Listed(list), count)
            }
        };
        if pair_count == 0 {
            return Err(usage(format!("node loss needs at least one pair, n={n}")));
        }
        let d = data.d();
        let mut x = Vec::with_capacity(n * (d - 1));
        for k in (0..d).filter(|&k| k != j) {
            x.extend(centered(data.column(k)));
        }
        let mut design = Self {
            node: j,
            dim: d - 1,
            n,
            xj: centered(data.column(j)),
            x,
            pairs,
            pair_count,
            curvature_bound: 0.0,
        };
        design.curvature_bound = design.estimate_curvature_bound();
        Ok(design)
    }

    pub fn all_pairs(data: &Dataset, j: usize) -> Result<Self> {
        Self::new(data, j, &PairIndexPlan::AllPairs)
    }

    pub fn node(&self) -> usize {
        self.node
    }

    /// Length of the coefficient vector, `d - 1`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Loss normalizer: number of pairs, including tied ones.
    pub fn pair_count(&self) -> usize {
        self.pair_count
    }

    fn col(&self, k: usize) -> &[f64] {
        &self.x[k * self.n..(k + 1) * self.n]
    }

    /// Largest eigenvalue of the Hessian at `beta = 0`, where every logistic
    /// weight takes its maximum `1/4`. Since `s(1-s) <= 1/4` everywhere this
    /// majorizes the Hessian at any `beta`: a global Lipschitz constant of
    /// the gradient.
    pub fn curvature_bound(&self) -> f64 {
        self.curvature_bound
    }

    fn estimate_curvature_bound(&self) -> f64 {
        let top = self.hessian(&vec![0.0; self.dim]).symmetric_eigenvalues().max();
        if !top.is_finite() {
            return f64::INFINITY;
        }
        // absorbs rounding in the eigensolver
        top.max(0.0) * (1.0 + 1e-9)
    }

    /// Linear predictor `r = X beta` over the centered columns; the pair
    /// exponents are `t = -a (r_i - r_i2)`. Linear in `beta`.
    pub fn predictor(&self, beta: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.n, 0.0);
        for (k, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (r, x) in out.iter_mut().zip(self.col(k)) {
                    *r += b * x;
                }
            }
        }
    }

    /// Visits the pairs in blocks: `f(rows_i, partners, a, t)` where the
    /// block's pairs are `(rows_i[p], partners[p])` (a single first row for
    /// the all-pairs set).
    fn for_each_block(&self, r: &[f64], mut f: impl FnMut(Block<'_>, &[f64])) {
        let mut t = vec![0.0; self.n.max(LIST_BLOCK)];
        match &self.pairs {
            PairSet::All => {
                for i in 0..self.n.saturating_sub(1) {
                    let (ai, ri) = (self.xj[i], r[i]);
                    let rest = i + 1..self.n;
                    let tb = &mut t[..rest.len()];
                    for ((tp, aj), rj) in tb.iter_mut().zip(&self.xj[rest.clone()]).zip(&r[rest.clone()]) {
                        *tp = -(ai - aj) * (ri - rj);
                    }
                    f(Block::Row(i), tb);
                }
            }
            PairSet::Listed(list) => {
                for chunk in list.chunks(LIST_BLOCK) {
                    let tb = &mut t[..chunk.len()];
                    for (tp, &(i, i2)) in tb.iter_mut().zip(chunk) {
                        let (i, i2) = (i as usize, i2 as usize);
                        *tp = -(self.xj[i] - self.xj[i2]) * (r[i] - r[i2]);
                    }
                    f(Block::Listed(chunk), tb);
                }
            }
        }
    }

    /// Distributes per-pair weights `c_p * a_p` onto rows: `q_i += w`,
    /// `q_i2 -= w`.
    fn scatter(&self, block: Block<'_>, c: &[f64], q: &mut [f64]) {
        match block {
            Block::Row(i) => {
                let ai = self.xj[i];
                let mut qi = 0.0;
                for ((cp, aj), qk) in c.iter().zip(&self.xj[i + 1..]).zip(&mut q[i + 1..]) {
                    let w = cp * (ai - aj);
                    qi += w;
                    *qk -= w;
                }
                q[i] += qi;
            }
            Block::Listed(chunk) => {
                for (cp, &(i, i2)) in c.iter().zip(chunk) {
                    let (i, i2) = (i as usize, i2 as usize);
                    let w = cp * (self.xj[i] - self.xj[i2]);
                    q[i] += w;
                    q[i2] -= w;
                }
            }
        }
    }

    pub fn loss_at(&self, r: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_each_block(r, |_, t| s += softplus_sum(t));
        s / self.pair_count as f64
    }

    pub fn gradient_at(&self, r: &[f64], out: &mut [f64]) {
        let mut q = vec![0.0; self.n];
        let mut c = vec![0.0; self.n.max(LIST_BLOCK)];
        self.for_each_block(r, |block, t| {
            let cb = &mut c[..t.len()];
            logistic(t, cb);
            self.scatter(block, cb, &mut q);
        });
        self.gradient_from_rows(&q, out);
    }

    fn gradient_from_rows(&self, q: &[f64], out: &mut [f64]) {
        let scale = 1.0 / self.pair_count as f64;
        for (k, g) in out.iter_mut().enumerate() {
            *g = -dot(self.col(k), q) * scale;
        }
    }

    /// Loss and gradient from one pass over the pairs.
    pub fn loss_and_gradient_at(&self, r: &[f64], out: &mut [f64]) -> f64 {
        let mut s = 0.0;
        let mut q = vec![0.0; self.n];
        let mut c = vec![0.0; self.n.max(LIST_BLOCK)];
        self.for_each_block(r, |block, t| {
            let cb = &mut c[..t.len()];
            s += softplus_logistic(t, cb);
            self.scatter(block, cb, &mut q);
        });
        self.gradient_from_rows(&q, out);
        s / self.pair_count as f64
    }

    pub fn loss(&self, beta: &[f64]) -> f64 {
        let mut r = Vec::with_capacity(self.n);
        self.predictor(beta, &mut r);
        self.loss_at(&r)
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        self.loss_and_gradient(beta).1
    }

    pub fn loss_and_gradient(&self, beta: &[f64]) -> (f64, Vec<f64>) {
        let mut r = Vec::with_capacity(self.n);
        self.predictor(beta, &mut r);
        let mut g = vec![0.0; self.dim];
        let f = self.loss_and_gradient_at(&r, &mut g);
        (f, g)
    }

    /// `H = X' L X / P` with `L` the graph Laplacian of the pair weights
    /// `s (1 - s) a^2`.
    pub fn hessian(&self, beta: &[f64]) -> DMatrix<f64> {
        let (n, m) = (self.n, self.dim);
        let mut r = Vec::with_capacity(n);
        self.predictor(beta, &mut r);
        // lx[k*n + i] = (L X)_{ik}
        let mut lx = vec![0.0; n * m];
        let mut w = vec![0.0; self.n.max(LIST_BLOCK)];
        self.for_each_block(&r, |block, t| {
            let wb = &mut w[..t.len()];
            for (wp, &tp) in wb.iter_mut().zip(t) {
                let s = sigmoid(tp);
                *wp = s * (1.0 - s);
            }
            match block {
                Block::Row(i) => {
                    let ai = self.xj[i];
                    for (wp, aj) in wb.iter_mut().zip(&self.xj[i + 1..]) {
                        *wp *= (ai - aj) * (ai - aj);
                    }
                    for k in 0..m {
                        let (x, out) = (self.col(k), &mut lx[k * n..(k + 1) * n]);
                        let xi = x[i];
                        let mut acc = 0.0;
                        for ((wp, xk), o) in wb.iter().zip(&x[i + 1..]).zip(&mut out[i + 1..]) {
                            let v = wp * (xi - xk);
                            acc += v;
                            *o -= v;
                        }
                        out[i] += acc;
                    }
                }
                Block::Listed(chunk) => {
                    for (wp, &(i, i2)) in wb.iter().zip(chunk) {
                        let (i, i2) = (i as usize, i2 as usize);
                        let a = self.xj[i] - self.xj[i2];
                        let wa = wp * a * a;
                        for k in 0..m {
                            let v = wa * (self.x[k * n + i] - self.x[k * n + i2]);
                            lx[k * n + i] += v;
                            lx[k * n + i2] -= v;
                        }
                    }
                }
            }
        });
        let scale = 1.0 / self.pair_count as f64;
        let mut h = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let v = 0.5 * (dot(self.col(a), &lx[b * n..(b + 1) * n]) + dot(self.col(b), &lx[a * n..(a + 1) * n]));
                h[(a, b)] = v * scale;
                h[(b, a)] = v * scale;
            }
        }
        h
    }
}

#[derive(Clone, Copy)]
enum Block<'a> {
    Row(usize),
    Listed(&'a [(u32, u32)]),
}

/// Residual ratio `R = exp(-(x_ij - x_i2j) * beta'(x_{i,-j} - x_{i2,-j}))`.
pub fn residual_ratio(data: &Dataset, j: usize, pair: (usize, usize), beta: &NodeCoef) -> Result<f64> {
    Ok(pair_exponent(data, j, pair, beta)?.exp())
}

/// The exponent `t` with `R = exp(t)`.
pub fn pair_exponent(data: &Dataset, j: usize, pair: (usize, usize), beta: &NodeCoef) -> Result<f64> {
    beta.check(data, j)?;
    check_pair(data, pair)?;
    let (xi, xi2) = (data.row(pair.0), data.row(pair.1));
    let a = xi[j] - xi2[j];
    let mut s = 0.0;
    for (k, b) in (0..data.d()).filter(|&k| k != j).zip(&beta.beta) {
        s += b * (xi[k] - xi2[k]);
    }
    Ok(-a * s)
}

pub fn node_loss(data: &Dataset, j: usize, beta: &NodeCoef, plan: &PairIndexPlan) -> Result<f64> {
    beta.check(data, j)?;
    Ok(NodeDesign::new(data, j, plan)?.loss(&beta.beta))
}

pub fn node_gradient(data: &Dataset, j: usize, beta: &NodeCoef, plan: &PairIndexPlan) -> Result<Vec<f64>> {
    beta.check(data, j)?;
    Ok(NodeDesign::new(data, j, plan)?.gradient(&beta.beta))
}

pub fn node_hessian(data: &Dataset, j: usize, beta: &NodeCoef, plan: &PairIndexPlan) -> Result<DMatrix<f64>> {
    beta.check(data, j)?;
    Ok(NodeDesign::new(data, j, plan)?.hessian(&beta.beta))
}

/// Gradient kernel `h_{i,i2}` of one pair; averaging it over all pairs gives
/// [`node_gradient`].
pub fn grad_kernel(data: &Dataset, j: usize, pair: (usize, usize), beta: &NodeCoef) -> Result<Vec<f64>> {
    beta.check(data, j)?;
    check_pair(data, pair)?;
    let mut out = vec![0.0; data.d() - 1];
    kernel_into(data, j, pair, &beta.beta, &mut out);
    Ok(out)
}

#[inline]
fn kernel_into(data: &Dataset, j: usize, (i, i2): (usize, usize), beta: &[f64], out: &mut [f64]) {
    let (xi, xi2) = (data.row(i), data.row(i2));
    let a = xi[j] - xi2[j];
    if a == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    for (o, k) in out.iter_mut().zip((0..data.d()).filter(|&k| k != j)) {
        *o = a * (xi[k] - xi2[k]);
    }
    let c = sigmoid(-dot(out, beta));
    out.iter_mut().for_each(|o| *o *= -c);
}

/// Per-observation kernel means `(n-1)^-1 sum_{i2 != i} h_{i,i2}` for node
/// `j`, row-major `n x (d-1)`. These are the Hajek-projection terms.
pub fn kernel_row_means(data: &Dataset, j: usize, beta: &NodeCoef) -> Result<Vec<f64>> {
    beta.check(data, j)?;
    let (n, m) = (data.n(), data.d() - 1);
    let mut sums = vec![0.0; n * m];
    let mut h = vec![0.0; m];
    for i in 0..n {
        for i2 in i + 1..n {
            kernel_into(data, j, (i, i2), &beta.beta, &mut h);
            // the kernel is symmetric in (i, i2)
            for (s, v) in sums[i * m..(i + 1) * m].iter_mut().zip(&h) {
                *s += v;
            }
            for (s, v) in sums[i2 * m..(i2 + 1) * m].iter_mut().zip(&h) {
                *s += v;
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    sums.iter_mut().for_each(|s| *s *= scale);
    Ok(sums)
}

/// Parameters `beta_{j v k}` shared by nodes `j` and `k`:
/// the edge coefficient once, then `beta_{j,-k}` and `beta_{k,-j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedCoef {
    pub j: usize,
    pub k: usize,
    pub shared: f64,
    pub j_rest: Vec<f64>,
    pub k_rest: Vec<f64>,
}

impl StackedCoef {
    /// Evaluation point `(0, beta_{j,-k}, beta_{k,-j})` from two node vectors.
    pub fn null_point(beta_j: &NodeCoef, beta_k: &NodeCoef) -> Self {
        Self {
            j: beta_j.node,
            k: beta_k.node,
            shared: 0.0,
            j_rest: beta_j.without(beta_k.node),
            k_rest: beta_k.without(beta_j.node),
        }
    }

    /// The two node vectors, each carrying `shared` on the `jk` slot.
    pub fn node_coefs(&self) -> (NodeCoef, NodeCoef) {
        let mut bj = self.j_rest.clone();
        bj.insert(slot(self.j, self.k), self.shared);
        let mut bk = self.k_rest.clone();
        bk.insert(slot(self.k, self.j), self.shared);
        (
            NodeCoef { node: self.j, beta: bj },
            NodeCoef { node: self.k, beta: bk },
        )
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.j_rest.len() + self.k_rest.len());
        v.push(self.shared);
        v.extend_from_slice(&self.j_rest);
        v.extend_from_slice(&self.k_rest);
        v
    }
}

/// Kernel of the stacked gradient of `L_j + L_k` with respect to
/// `beta_{j v k}`: entry 0 is `[h^j]_k + [h^k]_j`, followed by the `j,-k`
/// block of `h^j` and the `k,-j` block of `h^k`. Length `2d - 3`.
pub fn stacked_kernel(
    data: &Dataset,
    j: usize,
    k: usize,
    pair: (usize, usize),
    beta: &StackedCoef,
) -> Result<Vec<f64>> {
    if j == k {
        return Err(usage("stacked kernel needs two distinct nodes"));
    }
    if beta.j != j || beta.k != k {
        return Err(usage(format!(
            "stacked coefficients are for ({}, {}), not ({j}, {k})",
            beta.j, beta.k
        )));
    }
    let (bj, bk) = beta.node_coefs();
    let hj = grad_kernel(data, j, pair, &bj)?;
    let hk = grad_kernel(data, k, pair, &bk)?;
    Ok(stack_blocks(j, k, &hj, &hk))
}

/// Assembles a `2d-3` stacked vector from per-node `(d-1)`-vectors.
pub fn stack_blocks(j: usize, k: usize, vj: &[f64], vk: &[f64]) -> Vec<f64> {
    let (sj, sk) = (slot(j, k), slot(k, j));
    let mut out = Vec::with_capacity(vj.len() + vk.len() - 1);
    out.push(vj[sj] + vk[sk]);
    out.extend(vj.iter().enumerate().filter(|&(s, _)| s != sj).map(|(_, v)| *v));
    out.extend(vk.iter().enumerate().filter(|&(s, _)| s != sk).map(|(_, v)| *v));
    out
}
