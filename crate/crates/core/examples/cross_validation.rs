//! Chooses the penalty level of one node by K-fold cross-validation and
//! prints the validation curve.

use semigraph::cv::{cross_validate, CvConfig};
use semigraph::samplers::{build_precision, sample_gaussian, GaussianSpec};
use semigraph::solver::SolverConfig;

fn main() -> semigraph::Result<()> {
    let theta = build_precision(&GaussianSpec { d: 10, mu: 0.2 })?;
    let data = sample_gaussian(&theta, 150, 3)?;
    let cv = CvConfig { folds: 5, grid_size: 15, ..CvConfig::default() };
    let result = cross_validate(&data, 0, &cv, &SolverConfig::capped_l1(1.0)?)?;
    for (lambda, loss) in result.lambda_grid.iter().zip(&result.mean_losses) {
        let mark = if *lambda == result.lambda_star { "  <- selected" } else { "" };
        println!("lambda {lambda:.5}  mean held-out loss {loss:.6}{mark}");
    }
    Ok(())
}
