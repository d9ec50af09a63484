//! Standard normal distribution and a Kolmogorov-Smirnov uniformity check.

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{usage, Result};

/// `Phi(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `Phi^-1(p)` for `p` strictly inside `(0, 1)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(usage(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step against the cdf tightens the tails
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density > 0.0 {
        x -= (normal_cdf(x) - p) / density;
    }
    Ok(x)
}

/// Two-sided p-value `2 (1 - Phi(|z|))`, computed without cancellation.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// One-sample KS statistic `D` of `values` against `Unif[0, 1]` and its
/// asymptotic p-value (Kolmogorov series with Stephens' small-sample factor).
pub fn ks_uniform(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    v.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &u)| ((i + 1) as f64 / nf - u).max(u - i as f64 / nf))
        .fold(0.0, f64::max);
    let sq = nf.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    (d, kolmogorov_q(lambda))
}

/// `Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
