//! Keeps the edges that the Bonferroni test selects on most half-samples.

use semigraph::inference::{stability_select, InferenceConfig, StabilityConfig};
use semigraph::samplers::{build_precision, sample_gaussian, GaussianSpec};
use semigraph::solver::{LambdaSelection, SolverConfig};

fn main() -> semigraph::Result<()> {
    let spec = GaussianSpec { d: 8, mu: 0.25 };
    let data = sample_gaussian(&build_precision(&spec)?, 500, 4)?;
    let cfg = InferenceConfig {
        solver: SolverConfig::capped_l1(0.08)?,
        selection: LambdaSelection::Shared,
        lambda_d: 0.2,
    };
    let stab = StabilityConfig { n_subsamples: 20, keep_threshold: 14, seed: 1 };
    let result = stability_select(&data, 0.05, &stab, &cfg)?;
    let counts = result.selection_counts.as_ref().expect("stability mode records counts");
    for (j, k) in spec.truth_edges() {
        println!("true edge ({j}, {k}) selected in {:>2} of 20 half-samples", counts[j][k]);
    }
    println!("kept: {:?}", result.edges());
    Ok(())
}
