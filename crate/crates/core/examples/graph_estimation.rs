//! Estimates a 4-nearest-neighbour graph and scores it against the truth.

use semigraph::cv::CvConfig;
use semigraph::samplers::{build_precision, sample_gaussian, GaussianSpec};
use semigraph::solver::{estimate_graph, GraphConfig, LambdaSelection, SolverConfig, Symmetrize};

fn main() -> semigraph::Result<()> {
    let spec = GaussianSpec { d: 12, mu: 0.2 };
    let data = sample_gaussian(&build_precision(&spec)?, 300, 11)?;
    let truth = spec.truth_edges();
    let cfg = GraphConfig {
        solver: SolverConfig::capped_l1(1.0)?,
        selection: LambdaSelection::CrossValidated(CvConfig { folds: 5, grid_size: 10, ..CvConfig::default() }),
        symmetrize: Symmetrize::And,
    };
    let graph = estimate_graph(&data, &cfg)?;
    let edges = graph.edges();
    let hits = edges.iter().filter(|e| truth.contains(e)).count();
    println!("estimated {} edges, {hits} of {} true edges recovered", edges.len(), truth.len());
    for node in &graph.nodes {
        println!("node {:>2}: lambda {:.4}, {} stages, support {:?}", node.node, node.lambda_used, node.stages_run, node.coef().support());
    }
    Ok(())
}
