//! Naive reference implementations shared by the integration tests.
//!
//! Everything here is written from the defining formulas with plain double
//! loops over observation pairs and `std` math, so it shares no code path
//! with the library beyond the data container.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use semigraph::rng::Stream;
use semigraph::Dataset;

pub fn random_dataset(seed: u64, n: usize, d: usize, scale: f64) -> Dataset {
    let mut rng = Stream::new(seed);
    let values = (0..n * d).map(|_| scale * rng.normal()).collect();
    Dataset::new(values, n, d).unwrap()
}

/// Data with a few repeated values per column, so tied pairs occur.
pub fn discrete_dataset(seed: u64, n: usize, d: usize) -> Dataset {
    let mut rng = Stream::new(seed);
    let values = (0..n * d).map(|_| rng.index(3) as f64).collect();
    Dataset::new(values, n, d).unwrap()
}

pub fn uniform_vec(rng: &mut Stream, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| lo + (hi - lo) * rng.uniform()).collect()
}

/// Position of coordinate `k` inside node `j`'s coefficient vector.
pub fn slot_of(j: usize, k: usize) -> usize {
    if k < j {
        k
    } else {
        k - 1
    }
}

pub fn softplus_ref(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn logistic_ref(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// `a = x_ij - x_i2j` and `z = x_{i,-j} - x_{i2,-j}`.
pub fn pair_features(data: &Dataset, j: usize, i: usize, i2: usize) -> (f64, Vec<f64>) {
    let a = data.get(i, j) - data.get(i2, j);
    let z = (0..data.d()).filter(|&k| k != j).map(|k| data.get(i, k) - data.get(i2, k)).collect();
    (a, z)
}

fn exponent(a: f64, z: &[f64], beta: &[f64]) -> f64 {
    -a * z.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>()
}

pub fn naive_loss(data: &Dataset, j: usize, beta: &[f64]) -> f64 {
    let n = data.n();
    let mut s = 0.0;
    for i in 0..n {
        for i2 in i + 1..n {
            let (a, z) = pair_features(data, j, i, i2);
            s += softplus_ref(exponent(a, &z, beta));
        }
    }
    s / (n * (n - 1) / 2) as f64
}

/// Kernel `h_{i,i2} = -R / (1 + R) * a * z`.
pub fn naive_kernel(data: &Dataset, j: usize, i: usize, i2: usize, beta: &[f64]) -> Vec<f64> {
    let (a, z) = pair_features(data, j, i, i2);
    let c = logistic_ref(exponent(a, &z, beta));
    z.iter().map(|x| -c * a * x).collect()
}

pub fn naive_gradient(data: &Dataset, j: usize, beta: &[f64]) -> Vec<f64> {
    let n = data.n();
    let mut g = vec![0.0; data.d() - 1];
    for i in 0..n {
        for i2 in i + 1..n {
            for (gk, h) in g.iter_mut().zip(naive_kernel(data, j, i, i2, beta)) {
                *gk += h;
            }
        }
    }
    let p = (n * (n - 1) / 2) as f64;
    g.iter().map(|v| v / p).collect()
}

pub fn naive_hessian(data: &Dataset, j: usize, beta: &[f64]) -> DMatrix<f64> {
    let n = data.n();
    let m = data.d() - 1;
    let mut h = DMatrix::zeros(m, m);
    for i in 0..n {
        for i2 in i + 1..n {
            let (a, z) = pair_features(data, j, i, i2);
            let s = logistic_ref(exponent(a, &z, beta));
            let w = s * (1.0 - s) * a * a;
            for r in 0..m {
                for c in 0..m {
                    h[(r, c)] += w * z[r] * z[c];
                }
            }
        }
    }
    h / (n * (n - 1) / 2) as f64
}

fn zeroed(beta: &[f64], s: usize) -> Vec<f64> {
    let mut b = beta.to_vec();
    b[s] = 0.0;
    b
}

fn drop_slot(v: &[f64], s: usize) -> Vec<f64> {
    v.iter().enumerate().filter(|&(t, _)| t != s).map(|(_, x)| *x).collect()
}

/// Stacked kernel `(h^j_jk + h^k_kj, h^j_{j,-k}, h^k_{k,-j})`.
pub fn naive_stacked_kernel(data: &Dataset, j: usize, k: usize, i: usize, i2: usize, bj: &[f64], bk: &[f64]) -> Vec<f64> {
    let (sj, sk) = (slot_of(j, k), slot_of(k, j));
    let hj = naive_kernel(data, j, i, i2, bj);
    let hk = naive_kernel(data, k, i, i2, bk);
    let mut out = vec![hj[sj] + hk[sk]];
    out.extend(drop_slot(&hj, sj));
    out.extend(drop_slot(&hk, sk));
    out
}

/// `n^-1 sum_i m_i m_i'` with `m_i` the mean stacked kernel over `i2 != i`,
/// both node vectors taken with the shared coordinate zeroed.
pub fn naive_sigma(data: &Dataset, j: usize, k: usize, bj: &[f64], bk: &[f64]) -> DMatrix<f64> {
    let n = data.n();
    let dim = 2 * data.d() - 3;
    let bj = zeroed(bj, slot_of(j, k));
    let bk = zeroed(bk, slot_of(k, j));
    let mut sigma = DMatrix::zeros(dim, dim);
    for i in 0..n {
        let mut m = vec![0.0; dim];
        for i2 in (0..n).filter(|&i2| i2 != i) {
            for (mv, h) in m.iter_mut().zip(naive_stacked_kernel(data, j, k, i, i2, &bj, &bk)) {
                *mv += h;
            }
        }
        let m = DVector::from_iterator(dim, m.into_iter().map(|v| v / (n - 1) as f64));
        sigma += &m * m.transpose();
    }
    sigma / n as f64
}

pub fn naive_score(data: &Dataset, j: usize, k: usize, bj: &[f64], bk: &[f64], w_jk: &[f64], w_kj: &[f64]) -> f64 {
    let (sj, sk) = (slot_of(j, k), slot_of(k, j));
    let gj = naive_gradient(data, j, &zeroed(bj, sj));
    let gk = naive_gradient(data, k, &zeroed(bk, sk));
    let dot = |w: &[f64], g: &[f64]| w.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
    gj[sj] + gk[sk] - dot(w_jk, &drop_slot(&gj, sj)) - dot(w_kj, &drop_slot(&gk, sk))
}

pub fn naive_variance(data: &Dataset, j: usize, k: usize, bj: &[f64], bk: &[f64], w_jk: &[f64], w_kj: &[f64]) -> f64 {
    let sigma = naive_sigma(data, j, k, bj, bk);
    let mut v = vec![1.0];
    v.extend(w_jk.iter().map(|w| -w));
    v.extend(w_kj.iter().map(|w| -w));
    let v = DVector::from_vec(v);
    (v.transpose() * sigma * &v)[(0, 0)]
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[k] += h;
            down[k] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

pub fn central_jacobian(g: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
    let m = x.len();
    let mut out = DMatrix::zeros(g(x).len(), m);
    for k in 0..m {
        let mut up = x.to_vec();
        let mut down = x.to_vec();
        up[k] += h;
        down[k] -= h;
        let (gu, gd) = (g(&up), g(&down));
        for r in 0..gu.len() {
            out[(r, k)] = (gu[r] - gd[r]) / (2.0 * h);
        }
    }
    out
}

/// Largest entrywise error relative to the reference's largest entry.
pub fn rel_error(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    got.iter().zip(want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Minimum of `||w||_1` subject to `||target - gram w||_inf <= lambda` by
/// enumerating every vertex of the arrangement formed by the constraint
/// hyperplanes and the coordinate hyperplanes `w_k = 0`. Only for tiny
/// dimensions.
pub fn lp_vertex_oracle(target: &[f64], gram: &DMatrix<f64>, lambda: f64) -> Option<(f64, Vec<f64>)> {
    let m = target.len();
    // (row of normal, right-hand side)
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in 0..m {
        let row: Vec<f64> = (0..m).map(|c| gram[(r, c)]).collect();
        planes.push((row.clone(), target[r] - lambda));
        planes.push((row, target[r] + lambda));
    }
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        planes.push((e, 0.0));
    }
    let scale = 1.0 + target.iter().fold(0.0f64, |a, v| a.max(v.abs())) + lambda;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pick = Vec::new();
    subsets(planes.len(), m, 0, &mut pick, &mut |idx| {
        let a = DMatrix::from_fn(m, m, |r, c| planes[idx[r]].0[c]);
        let b = DVector::from_iterator(m, idx.iter().map(|&p| planes[p].1));
        let lu = a.lu();
        if lu.determinant().abs() < 1e-12 {
            return;
        }
        let Some(w) = lu.solve(&b) else { return };
        let feasible = (0..m).all(|r| {
            let gw: f64 = (0..m).map(|c| gram[(r, c)] * w[c]).sum();
            (target[r] - gw).abs() <= lambda + 1e-9 * scale
        });
        if !feasible {
            return;
        }
        let l1 = w.iter().map(|v| v.abs()).sum::<f64>();
        if best.as_ref().map_or(true, |(b, _)| l1 < *b) {
            best = Some((l1, w.iter().copied().collect()));
        }
    });
    best
}

fn subsets(total: usize, size: usize, start: usize, pick: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pick.len() == size {
        f(pick);
        return;
    }
    for p in start..total {
        pick.push(p);
        subsets(total, size, p + 1, pick, f);
        pick.pop();
    }
}

/// Unpenalized minimizer of the naive loss by damped Newton steps.
pub fn newton_minimizer(data: &Dataset, j: usize) -> Vec<f64> {
    let m = data.d() - 1;
    let mut beta = vec![0.0; m];
    let mut f = naive_loss(data, j, &beta);
    for _ in 0..100 {
        let g = DVector::from_vec(naive_gradient(data, j, &beta));
        if g.amax() < 1e-13 {
            break;
        }
        let h = naive_hessian(data, j, &beta);
        let step = h.cholesky().expect("positive definite Hessian").solve(&g);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b - t * s).collect();
            let ft = naive_loss(data, j, &trial);
            if ft <= f || t < 1e-12 {
                beta = trial;
                f = ft;
                break;
            }
            t *= 0.5;
        }
    }
    beta
}

pub const THEORY_C: f64 = 0.5;

/// `THEORY_C sqrt(ln d / n)`, the shared penalty level of the Monte Carlo tests.
pub fn theory_lambda(n: usize, d: usize) -> f64 {
    THEORY_C * ((d as f64).ln() / n as f64).sqrt()
}
