use serde::{Deserialize, Serialize};

use super::{positive, RateError};
use crate::geometry::WeightVector;
use crate::problems::OptimalSet;
use crate::solvers::Trace;

/// Squared distances below this are too close to the solution to resolve.
const MIN_DIST_SQ: f64 = 1e-16;

/// κ_f = σ_h/(2θ²), from the Hoffman constant.
pub fn kappa_from_theta(sigma_h: f64, theta: f64) -> Result<f64, RateError> {
    positive("sigma_h", sigma_h)?;
    positive("theta", theta)?;
    Ok(sigma_h / (2.0 * theta * theta))
}

/// κ_f = L_f^W/(2η_f²), from the global error bound constant.
pub fn kappa_from_eta(lipschitz_w: f64, eta_f: f64) -> Result<f64, RateError> {
    positive("L_f^W", lipschitz_w)?;
    positive("eta_f", eta_f)?;
    Ok(lipschitz_w / (2.0 * eta_f * eta_f))
}

/// Global error bound constant
/// η_f = θ²(1 + L_f^W)((1 + 2‖∇h(Ax̄)‖²)/σ_h + 4M) + 2θ‖∇f(x̄)‖.
pub fn eta_f(
    theta: f64,
    lipschitz_w: f64,
    sigma_h: f64,
    grad_h_norm: f64,
    m: f64,
    grad_f_norm: f64,
) -> Result<f64, RateError> {
    positive("theta", theta)?;
    positive("sigma_h", sigma_h)?;
    if !(lipschitz_w >= 0.0 && grad_h_norm >= 0.0 && m >= 0.0 && grad_f_norm >= 0.0) {
        return Err(RateError::Undefined("norms and M must be nonnegative".into()));
    }
    Ok(theta * theta * (1.0 + lipschitz_w) * ((1.0 + 2.0 * grad_h_norm * grad_h_norm) / sigma_h + 4.0 * m)
        + 2.0 * theta * grad_f_norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    /// min over usable points of (f(x) − f*)/‖x − x̄‖²_W
    pub kappa: f64,
    /// Iteration attaining the minimum.
    pub at: usize,
    pub points: usize,
}

/// Empirical quadratic-growth modulus along a trace, with x̄ the W-nearest
/// point of `optimal`. Iterates are evaluated at every checkpoint and at the
/// last iteration. Points whose distance is below resolution, or whose
/// objective gap is at the rounding level of f*, are skipped.
pub fn estimate_kappa_f(trace: &Trace, optimal: &OptimalSet, f_star: f64) -> Result<KappaEstimate, RateError> {
    let w = WeightVector::new(trace.weights.clone())
        .map_err(|e| RateError::Dimension(e.to_string()))?;
    let floor = 1e-12 * (1.0 + f_star.abs());
    let last = trace.iterations();
    let mut ks: Vec<usize> = std::iter::once(0)
        .chain(trace.checkpoints.iter().map(|(k, _)| *k))
        .chain(std::iter::once(last))
        .collect();
    ks.sort_unstable();
    ks.dedup();
    let mut best: Option<KappaEstimate> = None;
    let mut points = 0;
    for k in ks {
        let x = trace.iterate(k);
        let gap = trace.records[k].f - f_star;
        let d = w
            .dist_sq(&x, &optimal.nearest(&x, &w))
            .map_err(|e| RateError::Dimension(e.to_string()))?;
        if d < MIN_DIST_SQ || gap <= floor {
            continue;
        }
        points += 1;
        let ratio = gap / d;
        if best.is_none_or(|b| ratio < b.kappa) {
            best = Some(KappaEstimate { kappa: ratio, at: k, points: 0 });
        }
    }
    best.map(|b| KappaEstimate { points, ..b })
        .ok_or_else(|| RateError::Undefined("every trace point is at the optimum".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_formulas() {
        assert_eq!(kappa_from_theta(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(kappa_from_eta(2.0, 1.0).unwrap(), 1.0);
        let a = kappa_from_theta(3.0, 1.7).unwrap();
        let b = kappa_from_theta(3.0, 3.4).unwrap();
        assert!((a / b - 4.0).abs() < 1e-14);
        assert!(kappa_from_theta(0.0, 1.0).is_err());
        assert!(kappa_from_eta(1.0, -1.0).is_err());
    }

    #[test]
    fn eta_by_hand() {
        // 4·2·((1 + 2)/1 + 4) + 2·2·0.5 = 58
        assert_eq!(eta_f(2.0, 1.0, 1.0, 1.0, 1.0, 0.5).unwrap(), 58.0);
    }
}
