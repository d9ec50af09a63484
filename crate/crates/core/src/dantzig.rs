//! Dantzig-type projection weights.
//!
//! For an edge `(j, k)` the weights `w` minimize `||w||_1` subject to
//! `||target - gram w||_inf <= lambda_d`, where `target` is the `jk` row of the
//! node-`j` Hessian (without its own column) and `gram` its `(j,-k)` block,
//! both evaluated with `beta_jk` forced to zero. The problem is solved
//! exactly as a linear program with a dense two-phase simplex under Bland's
//! rule.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::data::{slot, Dataset, NodeCoef};
use crate::error::{numerical, usage, Result};
use crate::loss::NodeDesign;

pub const DEFAULT_LAMBDA_D: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct DantzigProblem {
    pub target_row: Vec<f64>,
    pub gram: DMatrix<f64>,
    pub lambda_d: f64,
    /// Edge the problem belongs to, for error messages.
    pub edge: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DantzigSolution {
    pub w_hat: Vec<f64>,
    /// `||target - gram w||_inf - lambda_d`; at most ~1e-9 for a returned solution.
    pub feasibility_gap: f64,
    pub l1_norm: f64,
}

impl DantzigProblem {
    pub fn new(target_row: Vec<f64>, gram: DMatrix<f64>, lambda_d: f64) -> Result<Self> {
        let m = target_row.len();
        if gram.nrows() != m || gram.ncols() != m {
            return Err(usage(format!(
                "gram is {}x{}, target has length {m}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        if !(lambda_d >= 0.0 && lambda_d.is_finite()) {
            return Err(usage(format!("lambda_d must be >= 0, got {lambda_d}")));
        }
        for a in 0..m {
            for b in 0..a {
                let (x, y) = (gram[(a, b)], gram[(b, a)]);
                if (x - y).abs() > 1e-10 * (1.0 + x.abs().max(y.abs())) {
                    return Err(usage("gram matrix is not symmetric"));
                }
            }
        }
        Ok(Self {
            target_row,
            gram,
            lambda_d,
            edge: None,
        })
    }

    fn edge_label(&self) -> String {
        match self.edge {
            Some((j, k)) => format!("edge ({j}, {k})"),
            None => "Dantzig problem".to_string(),
        }
    }

    /// `||target - gram w||_inf`.
    pub fn residual(&self, w: &[f64]) -> f64 {
        let m = self.target_row.len();
        (0..m)
            .map(|a| {
                let gw: f64 = (0..m).map(|b| self.gram[(a, b)] * w[b]).sum();
                (self.target_row[a] - gw).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Splits a full `(d-1) x (d-1)` node Hessian into the `jk` row (without
/// its own entry) and the principal block over the remaining coordinates.
pub fn blocks_from_hessian(h: &DMatrix<f64>, j: usize, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let s = slot(j, k);
    let keep: Vec<usize> = (0..h.nrows()).filter(|&a| a != s).collect();
    let target = keep.iter().map(|&b| h[(s, b)]).collect();
    let gram = DMatrix::from_fn(keep.len(), keep.len(), |a, b| h[(keep[a], keep[b])]);
    (target, gram)
}

/// Hessian blocks of node `j` for edge `(j, k)`, evaluated at `beta_j` with
/// its `k` coordinate set to zero. `lambda_d` is set to the default.
pub fn hessian_blocks(data: &Dataset, j: usize, k: usize, beta_hat_j: &NodeCoef) -> Result<DantzigProblem> {
    beta_hat_j.check(data, j)?;
    if j == k || k >= data.d() {
        return Err(usage(format!("invalid edge ({j}, {k})")));
    }
    let design = NodeDesign::all_pairs(data, j)?;
    let h = design.hessian(&beta_hat_j.with_zeroed(k).beta);
    let (target_row, gram) = blocks_from_hessian(&h, j, k);
    Ok(DantzigProblem {
        target_row,
        gram,
        lambda_d: DEFAULT_LAMBDA_D,
        edge: Some((j, k)),
    })
}

/// Solves the minimum-l1 problem exactly.
pub fn solve_dantzig(p: &DantzigProblem) -> Result<DantzigSolution> {
    let m = p.target_row.len();
    if m == 0 {
        return Ok(DantzigSolution {
            w_hat: Vec::new(),
            feasibility_gap: -p.lambda_d,
            l1_norm: 0.0,
        });
    }
    if p.lambda_d == 0.0 {
        let eig = p.gram.clone().symmetric_eigenvalues();
        let scale = eig.iter().fold(0.0f64, |s, e| s.max(e.abs())).max(1.0);
        if eig.iter().fold(f64::INFINITY, |s, e| s.min(e.abs())) <= 1e-12 * scale {
            return Err(numerical(format!(
                "{}: gram matrix is numerically singular with lambda_d = 0",
                p.edge_label()
            )));
        }
    }

    // variables (u, v) >= 0 with w = u - v
    //   gram (u - v) <= target + lambda_d
    //  -gram (u - v) <= lambda_d - target
    let mut rows = Vec::with_capacity(2 * m);
    let mut rhs = Vec::with_capacity(2 * m);
    for sign in [1.0, -1.0] {
        for a in 0..m {
            let mut row = vec![0.0; 2 * m];
            for b in 0..m {
                row[b] = sign * p.gram[(a, b)];
                row[m + b] = -sign * p.gram[(a, b)];
            }
            rows.push(row);
            rhs.push(p.lambda_d + sign * p.target_row[a]);
        }
    }
    let cost = vec![1.0; 2 * m];
    let x = match simplex_min(&cost, &rows, &rhs) {
        LpOutcome::Optimal(x) => x,
        LpOutcome::Infeasible => {
            return Err(numerical(format!("{}: Dantzig constraints are infeasible", p.edge_label())))
        }
        LpOutcome::Unbounded => {
            return Err(numerical(format!("{}: Dantzig program is unbounded", p.edge_label())))
        }
    };
    let w_hat: Vec<f64> = (0..m).map(|b| x[b] - x[m + b]).collect();
    let feasibility_gap = p.residual(&w_hat) - p.lambda_d;
    if feasibility_gap > 1e-6 {
        return Err(numerical(format!(
            "{}: simplex returned a point violating the constraints by {feasibility_gap:.3e}",
            p.edge_label()
        )));
    }
    let l1_norm = w_hat.iter().map(|w| w.abs()).sum();
    Ok(DantzigSolution {
        w_hat,
        feasibility_gap,
        l1_norm,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

const PIVOT_EPS: f64 = 1e-11;

struct Tableau {
    /// constraint rows, each `cols + 1` wide (last entry is the rhs)
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, e: usize) {
        let piv = self.rows[r][e];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                row[e] = 0.0;
            }
        }
        self.basis[r] = e;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut rc = cost.to_vec();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (r, v) in rc.iter_mut().zip(row) {
                    *r -= cb * v;
                }
            }
        }
        rc
    }

    /// Bland's rule simplex on the columns allowed by `allowed`. Returns
    /// false if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> bool {
        let max_pivots = 50_000 + 100 * self.cols;
        for _ in 0..max_pivots {
            let rc = self.reduced_costs(cost);
            let Some(e) = (0..self.cols).find(|&c| allowed(c) && rc[c] < -PIVOT_EPS) else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[e] > PIVOT_EPS {
                    let ratio = row[self.cols] / row[e];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return false;
            };
            self.pivot(r, e);
        }
        log::warn!("simplex pivot limit reached");
        true
    }
}

/// Minimizes `cost' x` subject to `rows x <= rhs`, `x >= 0`.
pub fn simplex_min(cost: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> LpOutcome {
    let n = cost.len();
    let m = rows.len();
    let n_art = rhs.iter().filter(|b| **b < 0.0).count();
    let cols = n + m + n_art;
    let mut tab = Tableau {
        rows: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        cols,
    };
    let mut art = n + m;
    for (i, (row, &b)) in rows.iter().zip(rhs).enumerate() {
        let mut t = vec![0.0; cols + 1];
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for (c, v) in row.iter().enumerate() {
            t[c] = sign * v;
        }
        t[n + i] = sign;
        t[cols] = sign * b;
        if b < 0.0 {
            t[art] = 1.0;
            tab.basis.push(art);
            art += 1;
        } else {
            tab.basis.push(n + i);
        }
        tab.rows.push(t);
    }

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[n + m..].iter_mut().for_each(|c| *c = 1.0);
        tab.optimize(&phase1, &|_| true);
        let infeas: f64 = tab
            .rows
            .iter()
            .zip(&tab.basis)
            .filter(|(_, &b)| b >= n + m)
            .map(|(row, _)| row[cols])
            .sum();
        let scale = 1.0 + rhs.iter().fold(0.0f64, |s, b| s.max(b.abs()));
        if infeas > 1e-9 * scale {
            return LpOutcome::Infeasible;
        }
        // drive zero-valued artificials out of the basis
        for r in 0..m {
            if tab.basis[r] >= n + m {
                if let Some(e) = (0..n + m).find(|&c| tab.rows[r][c].abs() > PIVOT_EPS) {
                    tab.pivot(r, e);
                }
            }
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(cost);
    if !tab.optimize(&phase2, &|c| c < n + m) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (row, &b) in tab.rows.iter().zip(&tab.basis) {
        if b < n {
            x[b] = row[cols].max(0.0);
        }
    }
    LpOutcome::Optimal(x)
}
