//! Weighted-l1 inner solver, the multi-stage convex relaxation outer loop
//! and whole-graph estimation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{cross_validate, CvConfig};
use crate::data::{slot, Dataset, NodeCoef};
use crate::error::{config, numerical, usage, Result};
use crate::loss::NodeDesign;
use crate::penalty::{Penalty, PenaltyFamily, PenaltySpec};

/// Stationarity tolerance every returned solution is certified against.
pub const KKT_TOL: f64 = 1e-5;

const CHECK_EVERY: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative change of the penalized objective between successive checks
    /// below which the inner loop may stop (it also requires the KKT check
    /// to pass).
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub outer_max_stages: usize,
    pub penalty: PenaltySpec,
}

impl SolverConfig {
    pub fn new(penalty: PenaltySpec) -> Self {
        Self {
            inner_tol: 1e-7,
            inner_max_iter: 2000,
            outer_max_stages: 10,
            penalty,
        }
    }

    pub fn capped_l1(lambda: f64) -> Result<Self> {
        Ok(Self::new(PenaltySpec::new(PenaltyFamily::capped_l1(), lambda)?))
    }

    pub fn lasso(lambda: f64) -> Result<Self> {
        Ok(Self::new(PenaltySpec::new(PenaltyFamily::Lasso, lambda)?))
    }

    pub fn lambda(&self) -> f64 {
        self.penalty.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            penalty: self.penalty.with_lambda(lambda),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.penalty.validate()?;
        if !(self.inner_tol > 0.0) || self.inner_max_iter == 0 || self.outer_max_stages == 0 {
            return Err(config(format!(
                "solver tolerances must be positive and stage/iteration caps >= 1: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Result of one weighted-l1 solve.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedL1Fit {
    pub coef: NodeCoef,
    /// `L_j(beta) + sum_k w_k |beta_k|` at the returned point.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest violation of the stationarity conditions at the returned point.
    pub kkt_violation: f64,
}

/// Per-node output of the multi-stage relaxation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeEstimate {
    pub node: usize,
    pub beta_hat: Vec<f64>,
    pub lambda_used: f64,
    pub stages_run: usize,
    /// Weights used in each stage; stage 1 is uniform `lambda`.
    pub weight_trace: Vec<Vec<f64>>,
    /// Nonconvex objective `L_j + sum p_lambda(|beta|)` after each stage.
    pub objective_trace: Vec<f64>,
    /// Stopped because the weights repeated (not because of the stage cap).
    pub outer_converged: bool,
    /// Every inner solve met its stopping rule.
    pub inner_converged: bool,
}

impl NodeEstimate {
    pub fn coef(&self) -> NodeCoef {
        NodeCoef {
            node: self.node,
            beta: self.beta_hat.clone(),
        }
    }
}

/// Largest violation of the weighted-l1 stationarity conditions:
/// `|g_k| <= w_k` where `beta_k = 0`, `g_k + w_k sign(beta_k) = 0` otherwise.
pub fn kkt_violation(grad: &[f64], beta: &[f64], weights: &[f64]) -> f64 {
    grad.iter()
        .zip(beta)
        .zip(weights)
        .map(|((&g, &b), &w)| {
            if b == 0.0 {
                (g.abs() - w).max(0.0)
            } else {
                (g + w * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn weighted_l1(beta: &[f64], weights: &[f64]) -> f64 {
    beta.iter().zip(weights).map(|(b, w)| w * b.abs()).sum()
}

fn check_weights(weights: &[f64], dim: usize) -> Result<()> {
    if weights.len() != dim {
        return Err(usage(format!("{} weights for {dim} coefficients", weights.len())));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(usage("weights must be finite and nonnegative"));
    }
    Ok(())
}

/// Minimizes `L_j(beta) + sum_k weights_k |beta_k|` starting from `init`.
pub fn solve_weighted_l1(
    data: &Dataset,
    j: usize,
    weights: &[f64],
    init: &NodeCoef,
    cfg: &SolverConfig,
) -> Result<WeightedL1Fit> {
    init.check(data, j)?;
    let design = NodeDesign::all_pairs(data, j)?;
    solve_weighted_l1_on(&design, weights, &init.beta, cfg)
}

/// Accelerated proximal gradient with restart on a prebuilt design.
///
/// The step is `1 / L` with `L` the design's curvature bound, a global
/// Lipschitz constant of the gradient. Momentum restarts when the step
/// stops pointing along the last move, which needs only gradients; the
/// objective is evaluated at periodic checks. The loop stops once the
/// stationarity conditions hold and the objective changed by at most
/// `inner_tol` (relative) since the previous check. The returned objective
/// never exceeds the one at `init`.
pub fn solve_weighted_l1_on(
    design: &NodeDesign,
    weights: &[f64],
    init: &[f64],
    cfg: &SolverConfig,
) -> Result<WeightedL1Fit> {
    let m = design.dim();
    check_weights(weights, m)?;
    if init.len() != m || init.iter().any(|b| !b.is_finite()) {
        return Err(usage("initial coefficients have the wrong length or are non-finite"));
    }

    let mut tx = Vec::new();
    design.predictor(init, &mut tx);
    let mut grad = vec![0.0; m];
    let obj_init = design.loss_and_gradient_at(&tx, &mut grad) + weighted_l1(init, weights);
    if !obj_init.is_finite() || grad.iter().any(|g| !g.is_finite()) || !design.curvature_bound().is_finite() {
        return Err(numerical("loss or curvature is not finite at the starting point; rescale the data"));
    }
    let initial_violation = kkt_violation(&grad, init, weights);
    if initial_violation <= 0.5 * KKT_TOL {
        return Ok(WeightedL1Fit {
            coef: NodeCoef { node: design.node(), beta: init.to_vec() },
            objective: obj_init,
            iterations: 0,
            converged: true,
            kkt_violation: initial_violation,
        });
    }

    let lip = design.curvature_bound().max(1e-12);
    let mut x = init.to_vec();
    let mut y = x.clone();
    let mut ty = tx.clone();
    let mut z = vec![0.0; m];
    let mut tz = Vec::new();
    let mut gz = vec![0.0; m];
    let mut theta = 1.0f64;
    let mut obj_checked = obj_init;
    // (objective, KKT violation) at `x` when known
    let mut at_x = Some((obj_init, initial_violation));
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.inner_max_iter {
        iterations += 1;
        // invariant: `grad` holds the gradient at `y`
        let mut dist2 = 0.0;
        let mut along = 0.0;
        for k in 0..m {
            let v = y[k] - grad[k] / lip;
            let thr = weights[k] / lip;
            z[k] = if v > thr {
                v - thr
            } else if v < -thr {
                v + thr
            } else {
                0.0
            };
            dist2 += (z[k] - y[k]) * (z[k] - y[k]);
            along += (y[k] - z[k]) * (z[k] - x[k]);
        }
        design.predictor(&z, &mut tz);

        // the gradient mapping bounds the violation at `z` by `2 L |z - y|`
        let certified = 2.0 * lip * dist2.sqrt() <= KKT_TOL;
        let checked = if certified || iterations % CHECK_EVERY == 0 {
            let obj_z = design.loss_and_gradient_at(&tz, &mut gz) + weighted_l1(&z, weights);
            let violation = kkt_violation(&gz, &z, weights);
            let settled = (obj_checked - obj_z).abs() <= cfg.inner_tol * obj_z.abs().max(1e-300);
            obj_checked = obj_z;
            if settled && (certified || violation <= 0.5 * KKT_TOL) {
                x.copy_from_slice(&z);
                at_x = Some((obj_z, violation));
                converged = true;
                break;
            }
            true
        } else {
            false
        };

        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let mom = if along > 0.0 { 0.0 } else { (theta - 1.0) / theta_next };
        theta = if along > 0.0 { 1.0 } else { theta_next };
        for k in 0..m {
            let step = z[k] - x[k];
            x[k] = z[k];
            y[k] = z[k] + mom * step;
        }
        at_x = None;
        if mom == 0.0 {
            ty.clone_from(&tz);
        } else {
            for (t, (a, b)) in ty.iter_mut().zip(tz.iter().zip(&tx)) {
                *t = a + mom * (a - b);
            }
        }
        std::mem::swap(&mut tx, &mut tz);
        if mom == 0.0 && checked {
            grad.copy_from_slice(&gz);
        } else {
            design.gradient_at(&ty, &mut grad);
        }
    }

    let (mut objective, mut violation) = match at_x {
        Some(known) => known,
        None => {
            design.predictor(&x, &mut tx);
            let obj = design.loss_and_gradient_at(&tx, &mut gz) + weighted_l1(&x, weights);
            (obj, kkt_violation(&gz, &x, weights))
        }
    };
    if !converged && violation <= KKT_TOL {
        converged = true;
    }
    if !(objective <= obj_init) {
        x.copy_from_slice(init);
        objective = obj_init;
        violation = initial_violation;
        converged = violation <= KKT_TOL;
    }
    if !converged {
        log::warn!(
            "node {}: weighted-l1 solve stopped after {iterations} iterations with KKT violation {violation:.3e}",
            design.node()
        );
    }
    Ok(WeightedL1Fit {
        coef: NodeCoef { node: design.node(), beta: x },
        objective,
        iterations,
        converged,
        kkt_violation: violation,
    })
}

/// Smallest uniform weight at which `beta = 0` is optimal: `||grad L_j(0)||_inf`.
pub fn lambda_max(data: &Dataset, j: usize) -> Result<f64> {
    let design = NodeDesign::all_pairs(data, j)?;
    Ok(lambda_max_on(&design))
}

pub fn lambda_max_on(design: &NodeDesign) -> f64 {
    design
        .gradient(&vec![0.0; design.dim()])
        .iter()
        .fold(0.0, |m, g| m.max(g.abs()))
}

fn penalized_objective(design: &NodeDesign, beta: &[f64], penalty: &PenaltySpec) -> f64 {
    design.loss(beta) + beta.iter().map(|b| penalty.value(b.abs())).sum::<f64>()
}

/// Multi-stage convex relaxation for node `j`, started from zero.
pub fn multistage_estimate(data: &Dataset, j: usize, cfg: &SolverConfig) -> Result<NodeEstimate> {
    let design = NodeDesign::all_pairs(data, j)?;
    multistage_on(&design, cfg, &vec![0.0; design.dim()])
}

/// Multi-stage relaxation on a prebuilt design, stage 1 warm-started at `init`.
///
/// Stage 1 uses uniform weights `lambda`; stage `l + 1` uses
/// `p'_lambda(|beta^(l)|)`. The loop ends when a stage would reuse the
/// previous weights exactly, or after `outer_max_stages` stages.
pub fn multistage_on(design: &NodeDesign, cfg: &SolverConfig, init: &[f64]) -> Result<NodeEstimate> {
    cfg.validate()?;
    let penalty = cfg.penalty;
    let mut weights = vec![penalty.lambda; design.dim()];
    let mut beta = init.to_vec();
    let mut weight_trace = Vec::new();
    let mut objective_trace = Vec::new();
    let mut outer_converged = false;
    let mut inner_converged = true;

    for _ in 0..cfg.outer_max_stages {
        let fit = solve_weighted_l1_on(design, &weights, &beta, cfg)?;
        inner_converged &= fit.converged;
        beta = fit.coef.beta;
        objective_trace.push(penalized_objective(design, &beta, &penalty));
        let next: Vec<f64> = beta.iter().map(|b| penalty.rderiv(b.abs())).collect();
        weight_trace.push(std::mem::replace(&mut weights, next));
        if weight_trace.last() == Some(&weights) {
            outer_converged = true;
            break;
        }
    }

    Ok(NodeEstimate {
        node: design.node(),
        beta_hat: beta,
        lambda_used: penalty.lambda,
        stages_run: weight_trace.len(),
        weight_trace,
        objective_trace,
        outer_converged,
        inner_converged,
    })
}

/// Edge rule for turning node-wise supports into an undirected graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Symmetrize {
    /// Edge iff both `beta_jk` and `beta_kj` are nonzero.
    #[default]
    And,
    /// Edge iff either is nonzero.
    Or,
}

/// How the penalty level is chosen per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum LambdaSelection {
    /// The solver config's `lambda`, shared by all nodes.
    Shared,
    /// One `lambda` per node.
    PerNode { lambdas: Vec<f64> },
    /// K-fold cross-validation run separately for every node.
    CrossValidated(CvConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub solver: SolverConfig,
    pub selection: LambdaSelection,
    pub symmetrize: Symmetrize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphEstimate {
    pub nodes: Vec<NodeEstimate>,
    pub adjacency: Vec<Vec<bool>>,
    pub symmetrize: Symmetrize,
}

impl GraphEstimate {
    /// Upper-triangle edges `(j, k)` with `j < k`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let d = self.adjacency.len();
        (0..d)
            .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
            .filter(|&(j, k)| self.adjacency[j][k])
            .collect()
    }
}

/// Selects `lambda` for node `j` per `selection` and runs the multi-stage fit.
pub fn estimate_node(
    data: &Dataset,
    j: usize,
    solver: &SolverConfig,
    selection: &LambdaSelection,
) -> Result<NodeEstimate> {
    let lambda = match selection {
        LambdaSelection::Shared => solver.lambda(),
        LambdaSelection::PerNode { lambdas } => *lambdas
            .get(j)
            .ok_or_else(|| config(format!("no lambda given for node {j}")))?,
        LambdaSelection::CrossValidated(cv) => cross_validate(data, j, cv, solver)?.lambda_star,
    };
    multistage_estimate(data, j, &solver.with_lambda(lambda))
}

/// Runs the node-wise estimator for every node and symmetrizes the supports.
pub fn estimate_graph(data: &Dataset, cfg: &GraphConfig) -> Result<GraphEstimate> {
    cfg.solver.validate()?;
    let d = data.d();
    let nodes = (0..d)
        .into_par_iter()
        .map(|j| {
            estimate_node(data, j, &cfg.solver, &cfg.selection)
                .map_err(|e| e.context(format_args!("node {j}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let adjacency = symmetrize(&nodes, cfg.symmetrize);
    Ok(GraphEstimate {
        nodes,
        adjacency,
        symmetrize: cfg.symmetrize,
    })
}

pub fn symmetrize(nodes: &[NodeEstimate], rule: Symmetrize) -> Vec<Vec<bool>> {
    let d = nodes.len();
    let mut adj = vec![vec![false; d]; d];
    for j in 0..d {
        for k in j + 1..d {
            let a = nodes[j].beta_hat[slot(j, k)] != 0.0;
            let b = nodes[k].beta_hat[slot(k, j)] != 0.0;
            let edge = match rule {
                Symmetrize::And => a && b,
                Symmetrize::Or => a || b,
            };
            adj[j][k] = edge;
            adj[k][j] = edge;
        }
    }
    adj
}
