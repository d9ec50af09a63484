//! Solves the Dantzig-type program for the projection weights of one edge.

use semigraph::dantzig::{hessian_blocks, solve_dantzig};
use semigraph::samplers::{build_precision, sample_gaussian, GaussianSpec};
use semigraph::solver::{multistage_estimate, SolverConfig};

fn main() -> semigraph::Result<()> {
    let theta = build_precision(&GaussianSpec { d: 8, mu: 0.2 })?;
    let data = sample_gaussian(&theta, 120, 5)?;
    let fit = multistage_estimate(&data, 0, &SolverConfig::capped_l1(0.08)?)?;
    for lambda_d in [0.01, 0.05, 0.2] {
        let mut problem = hessian_blocks(&data, 0, 1, &fit.coef())?;
        problem.lambda_d = lambda_d;
        let sol = solve_dantzig(&problem)?;
        println!("lambda_D {lambda_d}: |w|_1 = {:.4}, feasibility gap {:.1e}, w = {:.4?}", sol.l1_norm, sol.feasibility_gap, sol.w_hat);
    }
    Ok(())
}
