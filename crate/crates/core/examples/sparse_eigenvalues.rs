//! Sparse eigenvalue bounds of a node Hessian, the restricted curvature
//! that governs the estimation rate.

use semigraph::diagnostics::sparse_eigenvalue_bounds;
use semigraph::loss::{node_hessian, PairIndexPlan};
use semigraph::samplers::{build_precision, gaussian_true_beta, sample_gaussian, GaussianSpec};

fn main() -> semigraph::Result<()> {
    let theta = build_precision(&GaussianSpec { d: 12, mu: 0.2 })?;
    let data = sample_gaussian(&theta, 200, 6)?;
    let h = node_hessian(&data, 0, &gaussian_true_beta(&theta, 0), &PairIndexPlan::AllPairs)?;
    for s in 1..=5 {
        let (lo, hi) = sparse_eigenvalue_bounds(&h, s)?;
        println!("s = {s}: rho_-(s) = {lo:.4}, rho_+(s) = {hi:.4}");
    }
    Ok(())
}
