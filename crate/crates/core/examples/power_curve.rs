//! Monte Carlo rejection rates of the edge test over a grid of signal
//! strengths.

use semigraph::inference::InferenceConfig;
use semigraph::power::{run_power, Design, PowerConfig};
use semigraph::samplers::GibbsConfig;
use semigraph::solver::{LambdaSelection, SolverConfig};

fn main() -> semigraph::Result<()> {
    let cfg = PowerConfig {
        design: Design::Gaussian { d: 20 },
        n: 150,
        mus: vec![0.0, 0.1, 0.25],
        replicates: 100,
        alpha: 0.05,
        edge: (0, 1),
        seed: 1,
        gibbs: GibbsConfig::default(),
        inference: InferenceConfig {
            solver: SolverConfig::capped_l1(0.1)?,
            selection: LambdaSelection::Shared,
            lambda_d: 0.2,
        },
    };
    let result = run_power(&cfg)?;
    println!("mu      rate    stderr");
    for row in &result.rows {
        println!("{:<6}  {:.3}   {:.3}", row.mu, row.rejection_rate, row.monte_carlo_stderr);
    }
    Ok(())
}
