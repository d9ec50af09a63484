//! Concave penalty families and their right derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};

pub const DEFAULT_CAP: f64 = 1.0;
pub const DEFAULT_SCAD_A: f64 = 3.7;
pub const DEFAULT_MCP_GAMMA: f64 = 3.0;

/// Penalty family with its shape parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PenaltyFamily {
    Lasso,
    /// `lambda * min(u, cap * lambda)`.
    CappedL1 { cap: f64 },
    Scad { a: f64 },
    Mcp { gamma: f64 },
}

impl PenaltyFamily {
    pub fn capped_l1() -> Self {
        PenaltyFamily::CappedL1 { cap: DEFAULT_CAP }
    }

    pub fn scad() -> Self {
        PenaltyFamily::Scad { a: DEFAULT_SCAD_A }
    }

    pub fn mcp() -> Self {
        PenaltyFamily::Mcp { gamma: DEFAULT_MCP_GAMMA }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PenaltyFamily::Lasso => "lasso",
            PenaltyFamily::CappedL1 { .. } => "capped-l1",
            PenaltyFamily::Scad { .. } => "scad",
            PenaltyFamily::Mcp { .. } => "mcp",
        }
    }

    /// Parses `lasso`, `capped-l1`, `scad` or `mcp` with default shape.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "lasso" => Ok(PenaltyFamily::Lasso),
            "capped-l1" => Ok(Self::capped_l1()),
            "scad" => Ok(Self::scad()),
            "mcp" => Ok(Self::mcp()),
            other => Err(usage(format!(
                "unknown penalty {other:?} (expected capped-l1, scad, mcp or lasso)"
            ))),
        }
    }
}

/// A penalty `p_lambda` on `[0, inf)`.
pub trait Penalty {
    fn lambda(&self) -> f64;
    fn value(&self, u: f64) -> f64;
    /// Right derivative at `u`.
    fn rderiv(&self, u: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    #[serde(flatten)]
    pub family: PenaltyFamily,
    pub lambda: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64) -> Result<Self> {
        let spec = Self { family, lambda };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(usage(format!("lambda must be positive, got {}", self.lambda)));
        }
        match self.family {
            PenaltyFamily::Lasso => Ok(()),
            PenaltyFamily::CappedL1 { cap } if cap > 0.0 => Ok(()),
            PenaltyFamily::Scad { a } if a > 2.0 => Ok(()),
            PenaltyFamily::Mcp { gamma } if gamma > 1.0 => Ok(()),
            family => Err(usage(format!("invalid penalty shape: {family:?}"))),
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    /// `p_lambda(u)`; negative `u` is a usage error.
    pub fn penalty_value(&self, u: f64) -> Result<f64> {
        if u < 0.0 || u.is_nan() {
            return Err(usage(format!("penalty argument must be >= 0, got {u}")));
        }
        Ok(self.value(u))
    }

    /// `p'_lambda(u+)`; negative `u` is a usage error.
    pub fn penalty_rderiv(&self, u: f64) -> Result<f64> {
        if u < 0.0 || u.is_nan() {
            return Err(usage(format!("penalty argument must be >= 0, got {u}")));
        }
        Ok(self.rderiv(u))
    }

    /// The `(c1, c2)` for which `p'(u+) >= c1 * lambda` on `[0, c2 * lambda]`.
    pub fn plateau(&self) -> (f64, f64) {
        match self.family {
            PenaltyFamily::Lasso => (1.0, 1.0),
            // the derivative drops to zero at cap * lambda itself
            PenaltyFamily::CappedL1 { cap } => (1.0, cap * (1.0 - 1e-9)),
            PenaltyFamily::Scad { .. } => (1.0, 1.0),
            PenaltyFamily::Mcp { gamma } => (0.5, gamma / 2.0),
        }
    }
}

impl Penalty for PenaltySpec {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn value(&self, u: f64) -> f64 {
        let l = self.lambda;
        match self.family {
            PenaltyFamily::Lasso => l * u,
            PenaltyFamily::CappedL1 { cap } => l * u.min(cap * l),
            PenaltyFamily::Scad { a } => {
                if u <= l {
                    l * u
                } else if u <= a * l {
                    (2.0 * a * l * u - u * u - l * l) / (2.0 * (a - 1.0))
                } else {
                    l * l * (a + 1.0) / 2.0
                }
            }
            PenaltyFamily::Mcp { gamma } => {
                if u <= gamma * l {
                    l * u - u * u / (2.0 * gamma)
                } else {
                    gamma * l * l / 2.0
                }
            }
        }
    }

    fn rderiv(&self, u: f64) -> f64 {
        let l = self.lambda;
        match self.family {
            PenaltyFamily::Lasso => l,
            PenaltyFamily::CappedL1 { cap } => {
                if u < cap * l {
                    l
                } else {
                    0.0
                }
            }
            PenaltyFamily::Scad { a } => {
                if u < l {
                    l
                } else {
                    (a * l - u).max(0.0) / (a - 1.0)
                }
            }
            PenaltyFamily::Mcp { gamma } => (l - u / gamma).max(0.0),
        }
    }
}

/// Outcome of [`check_penalty_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyReport {
    pub zero_at_origin: bool,
    pub nondecreasing: bool,
    pub concave: bool,
    pub slope_at_origin: bool,
    pub plateau: bool,
}

impl PenaltyReport {
    pub fn all_pass(&self) -> bool {
        self.zero_at_origin && self.nondecreasing && self.concave && self.slope_at_origin && self.plateau
    }
}

/// Numerically checks the admissibility conditions on a grid of positive
/// points: `p(0) = 0`, monotone value, concavity (nonincreasing right
/// derivative and nonincreasing secant slopes), `p'(0+) = lambda`, and the
/// plateau `p'(u+) >= c1 * lambda` for `u` in `[0, c2 * lambda]`.
pub fn check_penalty_conditions<P: Penalty + ?Sized>(
    penalty: &P,
    grid: &[f64],
    plateau: (f64, f64),
) -> PenaltyReport {
    const TOL: f64 = 1e-12;
    let lambda = penalty.lambda();
    let mut pts: Vec<f64> = std::iter::once(0.0)
        .chain(grid.iter().copied().filter(|u| *u > 0.0))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let vals: Vec<f64> = pts.iter().map(|&u| penalty.value(u)).collect();
    let ders: Vec<f64> = pts.iter().map(|&u| penalty.rderiv(u)).collect();
    let scale = TOL * (1.0 + vals.iter().fold(0.0f64, |m, v| m.max(v.abs())));

    let nondecreasing = vals.windows(2).all(|w| w[1] >= w[0] - scale)
        && ders.iter().all(|d| *d >= -TOL);
    let slopes: Vec<f64> = pts
        .windows(2)
        .zip(vals.windows(2))
        .map(|(u, v)| (v[1] - v[0]) / (u[1] - u[0]))
        .collect();
    let concave = ders.windows(2).all(|w| w[1] <= w[0] + TOL)
        && slopes.windows(2).all(|w| w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()));
    let (c1, c2) = plateau;
    let plateau_ok = (0.0..=1.0).contains(&c1)
        && c2 > 0.0
        && pts
            .iter()
            .chain(std::iter::once(&(c2 * lambda)))
            .filter(|&&u| u <= c2 * lambda)
            .all(|&u| penalty.rderiv(u) >= c1 * lambda - TOL);

    PenaltyReport {
        zero_at_origin: penalty.value(0.0).abs() <= TOL,
        nondecreasing,
        concave,
        slope_at_origin: (penalty.rderiv(0.0) - lambda).abs() <= TOL * (1.0 + lambda),
        plateau: plateau_ok,
    }
}
