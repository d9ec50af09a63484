//! Evaluates one node's pairwise loss, gradient and Hessian on simulated
//! Gaussian data, and shows that shifting a column leaves them unchanged.

use semigraph::loss::{node_gradient, node_hessian, node_loss, PairIndexPlan};
use semigraph::samplers::{build_precision, gaussian_true_beta, sample_gaussian, GaussianSpec};

fn main() -> semigraph::Result<()> {
    let theta = build_precision(&GaussianSpec { d: 6, mu: 0.2 })?;
    let data = sample_gaussian(&theta, 80, 1)?;
    let beta = gaussian_true_beta(&theta, 0);
    let plan = PairIndexPlan::AllPairs;

    let loss = node_loss(&data, 0, &beta, &plan)?;
    let grad = node_gradient(&data, 0, &beta, &plan)?;
    let hess = node_hessian(&data, 0, &beta, &plan)?;
    println!("loss at the true coefficients: {loss:.6}");
    println!("gradient: {grad:.4?}");
    println!("hessian eigenvalues: {:.4}", hess.symmetric_eigenvalues().transpose());

    let moved = data.shifted(&[100.0, -3.0, 0.0, 7.5, 0.0, 1e3])?;
    let again = node_loss(&moved, 0, &beta, &plan)?;
    println!("loss after shifting columns: {again:.6} (difference {:.1e})", (again - loss).abs());

    let sub = PairIndexPlan::Subsample { pair_count: 500, seed: 2 };
    println!("loss on 500 sampled pairs: {:.6}", node_loss(&data, 0, &beta, &sub)?);
    Ok(())
}
