//! Monte Carlo rejection rates of the edge test over a grid of signal strengths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{config, Result};
use crate::inference::{edge_test, InferenceConfig};
use crate::rng::Stream;
use crate::samplers::{
    build_precision, sample_gaussian, sample_ising, sample_mixed, EdgeSigns, GaussianSpec, GibbsConfig, IsingSpec,
    MixedSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Design {
    Gaussian { d: usize },
    Ising { rows: usize, cols: usize, #[serde(default)] signs: EdgeSigns },
    Mixed { rows: usize, cols: usize, #[serde(default)] signs: EdgeSigns },
}

impl Design {
    pub fn name(&self) -> &'static str {
        match self {
            Design::Gaussian { .. } => "gaussian",
            Design::Ising { .. } => "ising",
            Design::Mixed { .. } => "mixed",
        }
    }

    pub fn d(&self) -> usize {
        match *self {
            Design::Gaussian { d } => d,
            Design::Ising { rows, cols, .. } => rows * cols,
            Design::Mixed { rows, cols, .. } => 2 * rows * cols,
        }
    }

    /// True edges of the design at strength `mu`.
    pub fn truth_edges(&self, mu: f64) -> Vec<(usize, usize)> {
        match *self {
            Design::Gaussian { d } => GaussianSpec { d, mu }.truth_edges(),
            Design::Ising { rows, cols, signs } => IsingSpec { rows, cols, mu, signs }.truth_edges(),
            Design::Mixed { rows, cols, signs } => MixedSpec { rows, cols, mu, signs }.truth_edges(),
        }
    }

    /// Draws `n` observations at strength `mu`. Gibbs designs use `gibbs`
    /// with its seed replaced by `seed`.
    pub fn sample(&self, mu: f64, n: usize, seed: u64, gibbs: &GibbsConfig) -> Result<Dataset> {
        let chain = GibbsConfig { seed, ..*gibbs };
        match *self {
            Design::Gaussian { d } => sample_gaussian(&build_precision(&GaussianSpec { d, mu })?, n, seed),
            Design::Ising { rows, cols, signs } => sample_ising(&IsingSpec { rows, cols, mu, signs }, n, &chain),
            Design::Mixed { rows, cols, signs } => sample_mixed(&MixedSpec { rows, cols, mu, signs }, n, &chain),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub design: Design,
    pub n: usize,
    pub mus: Vec<f64>,
    pub replicates: usize,
    pub alpha: f64,
    /// Edge whose test is tabulated; a true edge for `mu > 0`.
    pub edge: (usize, usize),
    pub seed: u64,
    pub gibbs: GibbsConfig,
    pub inference: InferenceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub mu: f64,
    pub n: usize,
    pub d: usize,
    pub model: String,
    pub replicates: usize,
    pub rejections: usize,
    /// Replicates flagged degenerate; excluded from the rate.
    pub degenerate: usize,
    /// Replicates whose pipeline failed; counted as non-rejections.
    pub failures: usize,
    pub rejection_rate: f64,
    pub monte_carlo_stderr: f64,
}

/// What happened to the designated edge test in one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ReplicateOutcome {
    Tested { p_value: f64, reject: bool },
    Degenerate,
    Failed,
}

impl PowerRow {
    /// Tabulates the outcomes of replicates `0..outcomes.len()` at `mu`.
    pub fn from_outcomes(mu: f64, n: usize, design: &Design, outcomes: &[ReplicateOutcome]) -> Self {
        let (mut rejections, mut degenerate, mut failures) = (0, 0, 0);
        for o in outcomes {
            match o {
                ReplicateOutcome::Tested { reject, .. } => rejections += *reject as usize,
                ReplicateOutcome::Degenerate => degenerate += 1,
                ReplicateOutcome::Failed => failures += 1,
            }
        }
        let denom = outcomes.len() - degenerate;
        let rate = if denom == 0 { 0.0 } else { rejections as f64 / denom as f64 };
        let stderr = if denom == 0 { 0.0 } else { (rate * (1.0 - rate) / denom as f64).sqrt() };
        PowerRow {
            mu,
            n,
            d: design.d(),
            model: design.name().to_string(),
            replicates: outcomes.len(),
            rejections,
            degenerate,
            failures,
            rejection_rate: rate,
            monte_carlo_stderr: stderr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerResult {
    pub rows: Vec<PowerRow>,
    /// Per row, the outcome of every replicate in replicate order.
    pub outcomes: Vec<Vec<ReplicateOutcome>>,
}

impl PowerResult {
    /// Non-degenerate p-values of row `r`, in replicate order.
    pub fn p_values(&self, r: usize) -> Vec<f64> {
        self.outcomes[r]
            .iter()
            .filter_map(|o| match o {
                ReplicateOutcome::Tested { p_value, .. } => Some(*p_value),
                _ => None,
            })
            .collect()
    }
}

/// Seed of the dataset drawn in replicate `rep`: the first word of PRNG
/// substream `rep` of `seed`. Every `mu` reuses the same replicate seeds.
pub fn replicate_seed(seed: u64, rep: usize) -> u64 {
    Stream::substream(seed, rep as u64).next_u64()
}

pub fn run_power(cfg: &PowerConfig) -> Result<PowerResult> {
    if cfg.replicates == 0 {
        return Err(config("need at least one replicate"));
    }
    if cfg.mus.is_empty() {
        return Err(config("empty mu grid"));
    }
    let d = cfg.design.d();
    let (j, k) = cfg.edge;
    if j == k || j >= d || k >= d {
        return Err(config(format!("designated edge ({j}, {k}) invalid for d = {d}")));
    }
    let mut mus = cfg.mus.clone();
    mus.sort_by(f64::total_cmp);
    for &mu in &mus {
        // surface spec errors once, before spending any replicates
        cfg.design.sample(mu, 2.max(cfg.n.min(4)), 0, &GibbsConfig { burn_in: 0, thin: 1, seed: 0 })?;
    }

    let mut rows = Vec::with_capacity(mus.len());
    let mut outcomes = Vec::with_capacity(mus.len());
    for &mu in &mus {
        let row: Vec<ReplicateOutcome> = (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                let test = cfg
                    .design
                    .sample(mu, cfg.n, replicate_seed(cfg.seed, rep), &cfg.gibbs)
                    .and_then(|data| edge_test(&data, j, k, cfg.alpha, &cfg.inference));
                match test {
                    Ok(t) if t.degenerate => ReplicateOutcome::Degenerate,
                    Ok(t) => ReplicateOutcome::Tested {
                        p_value: t.p_value,
                        reject: t.reject,
                    },
                    Err(e) => {
                        log::warn!("mu = {mu}, replicate {rep}: {e}");
                        ReplicateOutcome::Failed
                    }
                }
            })
            .collect();
        rows.push(PowerRow::from_outcomes(mu, cfg.n, &cfg.design, &row));
        outcomes.push(row);
    }
    Ok(PowerResult { rows, outcomes })
}
