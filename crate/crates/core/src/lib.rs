//! Structure learning and edge inference for semiparametric exponential-family
//! graphical models.
//!
//! Each node `j` is fit by minimizing a pairwise pseudo-likelihood loss
//! that depends only on pairwise differences of the data, so the unknown base
//! measure of every node drops out. A multi-stage convex relaxation with a
//! concave penalty gives sparse node-wise coefficients. A symmetric
//! decorrelated score statistic turns the two fits of an edge into one
//! p-value.
//!
//! | module          | contents                                                |
//! |-----------------|---------------------------------------------------------|
//! | [`data`]        | [`Dataset`], [`NodeCoef`], CSV input and output         |
//! | [`loss`]        | loss, gradient, Hessian and U-statistic kernels         |
//! | [`penalty`]     | capped-l1, SCAD, MCP and lasso                          |
//! | [`solver`]      | weighted-l1 solver, multi-stage loop, graph estimation  |
//! | [`cv`]          | K-fold cross-validation of `lambda`                     |
//! | [`dantzig`]     | projection weights by exact linear programming          |
//! | [`inference`]   | score test, Bonferroni, stability selection             |
//! | [`samplers`]    | Gaussian, Ising and mixed simulation designs            |
//! | [`power`]       | Monte Carlo rejection-rate tables                       |
//! | [`diagnostics`] | sparse eigenvalues of small matrices                    |
//! | [`stats`]       | normal distribution, KS uniformity check                |
//! | [`rng`]         | reproducible random streams                             |
//! | [`cli`]         | the `semigraph` command line                            |

pub mod cli;
pub mod cv;
pub mod dantzig;
pub mod data;
pub mod diagnostics;
mod elementwise;
pub mod error;
pub mod inference;
pub mod loss;
pub mod penalty;
pub mod power;
pub mod rng;
pub mod samplers;
pub mod solver;
pub mod stats;

pub use data::{Dataset, NodeCoef};
pub use error::{Error, Result};
