//! Runs the multi-stage convex relaxation for one node and prints the
//! weights and objective of every stage, next to the lasso fit.

use semigraph::samplers::{build_precision, gaussian_true_beta, sample_gaussian, GaussianSpec};
use semigraph::solver::{multistage_estimate, SolverConfig};

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn main() -> semigraph::Result<()> {
    let theta = build_precision(&GaussianSpec { d: 25, mu: 0.2 })?;
    let data = sample_gaussian(&theta, 400, 7)?;
    let truth = gaussian_true_beta(&theta, 0);
    let lambda = 0.08;

    let capped = multistage_estimate(&data, 0, &SolverConfig::capped_l1(lambda)?)?;
    for (stage, (w, obj)) in capped.weight_trace.iter().zip(&capped.objective_trace).enumerate() {
        let free = w.iter().filter(|&&v| v == 0.0).count();
        println!("stage {}: {free} unpenalized coordinates, objective {obj:.6}", stage + 1);
    }
    println!("stopped on repeated weights: {}", capped.outer_converged);

    let lasso = multistage_estimate(&data, 0, &SolverConfig::lasso(lambda)?)?;
    println!("l2 error  capped-l1 {:.4}  lasso {:.4}", l2(&capped.beta_hat, &truth.beta), l2(&lasso.beta_hat, &truth.beta));
    println!("support   capped-l1 {:?}", capped.coef().support());
    Ok(())
}
