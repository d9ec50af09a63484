//! K-fold cross-validation of the penalty level for one node.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{config, Result};
use crate::loss::NodeDesign;
use crate::rng::Stream;
use crate::solver::{lambda_max_on, multistage_on, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub grid_size: usize,
    /// Smallest grid value as a fraction of `lambda_max`.
    pub min_ratio: f64,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            grid_size: 50,
            min_ratio: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    /// Descending.
    pub lambda_grid: Vec<f64>,
    /// `fold_losses[g][f]`: validation loss of grid point `g` on fold `f`.
    pub fold_losses: Vec<Vec<f64>>,
    pub mean_losses: Vec<f64>,
    pub lambda_star: f64,
}

/// Log-spaced grid from `lambda_max` down to `min_ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, size: usize, min_ratio: f64) -> Vec<f64> {
    if size == 1 {
        return vec![lambda_max];
    }
    let (hi, lo) = (lambda_max.ln(), (lambda_max * min_ratio).ln());
    (0..size)
        .map(|g| (hi + (lo - hi) * g as f64 / (size - 1) as f64).exp())
        .collect()
}

/// Fold label of every row: a seeded shuffle of `0..n`, dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    Stream::new(seed).shuffle(&mut order);
    let mut label = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        label[row] = pos % folds;
    }
    label
}

/// Chooses `lambda` for node `j` by K-fold cross-validation.
///
/// For every fold the multi-stage estimator is fit on the training rows
/// along the grid (warm-started from the previous grid point) and scored by
/// the all-pairs loss over pairs drawn within the held-out rows. The chosen
/// value minimizes the mean validation loss; ties go to the larger `lambda`.
pub fn cross_validate(data: &Dataset, j: usize, cv: &CvConfig, solver: &SolverConfig) -> Result<CvResult> {
    let n = data.n();
    if cv.folds < 2 {
        return Err(config(format!("need at least 2 folds, got {}", cv.folds)));
    }
    if n < 2 * cv.folds {
        return Err(config(format!(
            "{}-fold cross-validation needs n >= {}, got n = {n}",
            cv.folds,
            2 * cv.folds
        )));
    }
    if cv.grid_size == 0 || !(cv.min_ratio > 0.0 && cv.min_ratio <= 1.0) {
        return Err(config("grid size must be >= 1 and min_ratio in (0, 1]"));
    }
    solver.validate()?;

    let full = NodeDesign::all_pairs(data, j)?;
    let mut top = lambda_max_on(&full);
    if top <= 0.0 {
        log::warn!("node {j}: zero gradient at the origin; every lambda gives beta = 0");
        top = 1.0;
    }
    let grid = lambda_grid(top, cv.grid_size, cv.min_ratio);
    let labels = fold_assignment(n, cv.folds, cv.seed);

    let per_fold: Vec<Vec<f64>> = (0..cv.folds)
        .into_par_iter()
        .map(|f| -> Result<Vec<f64>> {
            let (held, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| labels[i] == f);
            if held.len() < 2 {
                return Err(config(format!("fold {f} has {} rows; need at least 2", held.len())));
            }
            let train_design = NodeDesign::all_pairs(&data.select_rows(&train)?, j)?;
            let held_design = NodeDesign::all_pairs(&data.select_rows(&held)?, j)?;
            let mut beta = vec![0.0; full.dim()];
            let mut losses = Vec::with_capacity(grid.len());
            for &lambda in &grid {
                let est = multistage_on(&train_design, &solver.with_lambda(lambda), &beta)?;
                beta = est.beta_hat;
                losses.push(held_design.loss(&beta));
            }
            Ok(losses)
        })
        .collect::<Result<_>>()?;
    let fold_losses: Vec<Vec<f64>> = (0..grid.len())
        .map(|g| per_fold.iter().map(|losses| losses[g]).collect())
        .collect();

    let mean_losses: Vec<f64> = fold_losses
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    let mut best = 0;
    for g in 1..grid.len() {
        if mean_losses[g] < mean_losses[best] {
            best = g;
        }
    }
    Ok(CvResult {
        lambda_star: grid[best],
        lambda_grid: grid,
        fold_losses,
        mean_losses,
    })
}
