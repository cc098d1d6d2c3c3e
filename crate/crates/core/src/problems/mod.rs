//! Smooth box-constrained problems with coordinate oracles.
//!
//! Every problem here is a smooth function of a linear image `aux = M x`
//! (the primal weight vector for the SVM dual, the residual for Lasso, the
//! margins for ERM, `Hx` for a quadratic). Coordinate solvers keep `aux` in
//! their own state and shift it by `δ·M[:, i]` after each update, so a
//! coordinate step costs one column of `M` instead of a full evaluation.

mod convexity;
mod erm;
mod lasso;
mod quadratic;
mod svm;

pub use convexity::{
    check_coord_strong_convexity, coord_convexity_modulus, global_lipschitz_bound,
    tight_lipschitz_w, ConvexityReport, ConvexityWitness, SamplingOptions,
};
pub use erm::{ErmProblem, Loss};
pub use lasso::{lasso_lift, lasso_project_back, LassoBoxProblem};
pub use quadratic::{OptimalSet, QuadraticProblem};
pub use svm::SvmDualProblem;

use thiserror::Error;

use crate::geometry::{Bounds, GeometryError};

/// Derivative tolerance of the 1-D inner solve used for exact coordinate
/// minimization on non-quadratic slices.
pub const SLICE_DERIVATIVE_TOL: f64 = 1e-12;
/// Inner iteration cap of the safeguarded Newton solve.
pub const SLICE_MAX_ITERS: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid problem data: {0}")]
    InvalidData(String),
    #[error("point is outside the feasible box (violation {violation:e})")]
    Infeasible { violation: f64 },
    #[error("coordinate {coord}: 1-D minimization did not converge after {iterations} iterations (|derivative| = {derivative:e})")]
    SliceNonConvergence {
        coord: usize,
        iterations: usize,
        derivative: f64,
    },
    #[error("coordinate {coord}: slice is unbounded below")]
    UnboundedSlice { coord: usize },
}

/// A smooth convex objective on a box with coordinate-wise Lipschitz
/// gradient constants `L_i`.
pub trait Problem: Send + Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn bounds(&self) -> &Bounds;

    /// Coordinate Lipschitz constants `L_i` of the gradient.
    fn lipschitz(&self) -> &[f64];

    /// The cached linear image of `x`.
    fn aux(&self, x: &[f64]) -> Vec<f64>;

    /// Update `aux` for `x_i ← x_i + delta`.
    fn shift_aux(&self, aux: &mut [f64], i: usize, delta: f64);

    fn value_with(&self, x: &[f64], aux: &[f64]) -> f64;

    fn coord_gradient_with(&self, x: &[f64], aux: &[f64], i: usize) -> f64;

    /// Second derivative of the coordinate slice at `x`.
    fn coord_curvature_with(&self, x: &[f64], aux: &[f64], i: usize) -> f64;

    /// A lower bound on the curvature of the `i`-th slice anywhere in X.
    fn min_coord_curvature(&self, i: usize) -> f64;

    /// True when every coordinate slice is an exact quadratic with
    /// curvature `coord_curvature_with`.
    fn has_quadratic_slices(&self) -> bool {
        false
    }

    /// `H v` for problems with a constant Hessian.
    fn hessian_matvec(&self, _v: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Duality gap, for problems that carry a primal.
    fn duality_gap(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// First and second derivative of t ↦ f(x + (t − x_i)e_i).
    fn slice_derivatives_with(&self, x: &[f64], aux: &[f64], i: usize, t: f64) -> (f64, f64) {
        let mut aux = aux.to_vec();
        self.shift_aux(&mut aux, i, t - x[i]);
        let mut y = x.to_vec();
        y[i] = t;
        (
            self.coord_gradient_with(&y, &aux, i),
            self.coord_curvature_with(&y, &aux, i),
        )
    }

    /// f(x + (t − x_i)e_i) − f(x), computed without cancelling two full
    /// objective values where the structure allows it.
    fn slice_change_with(&self, x: &[f64], aux: &[f64], i: usize, t: f64) -> f64 {
        let delta = t - x[i];
        if delta == 0.0 {
            return 0.0;
        }
        if self.has_quadratic_slices() {
            let g = self.coord_gradient_with(x, aux, i);
            let c = self.coord_curvature_with(x, aux, i);
            return delta * (g + 0.5 * c * delta);
        }
        let mut shifted = aux.to_vec();
        self.shift_aux(&mut shifted, i, delta);
        let mut y = x.to_vec();
        y[i] = t;
        self.value_with(&y, &shifted) - self.value_with(x, aux)
    }

    /// argmin over X_i of the `i`-th slice at `x`.
    fn exact_coord_min_with(&self, x: &[f64], aux: &[f64], i: usize) -> Result<f64, ProblemError> {
        let bounds = self.bounds();
        if self.has_quadratic_slices() {
            let g = self.coord_gradient_with(x, aux, i);
            let c = self.coord_curvature_with(x, aux, i);
            return Ok(bounds.clip(i, x[i] - g / c));
        }
        minimize_convex_slice(
            x[i],
            bounds.lower()[i],
            bounds.upper()[i],
            |t| self.slice_derivatives_with(x, aux, i, t),
        )
        .map_err(|e| e.at_coord(i))
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.value_with(x, &self.aux(x))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let aux = self.aux(x);
        (0..self.dim())
            .map(|i| self.coord_gradient_with(x, &aux, i))
            .collect()
    }

    fn coord_gradient(&self, x: &[f64], i: usize) -> f64 {
        self.coord_gradient_with(x, &self.aux(x), i)
    }

    fn slice_change(&self, x: &[f64], i: usize, t: f64) -> f64 {
        self.slice_change_with(x, &self.aux(x), i, t)
    }

    fn exact_coord_min(&self, x: &[f64], i: usize) -> Result<f64, ProblemError> {
        self.exact_coord_min_with(x, &self.aux(x), i)
    }
}

impl ProblemError {
    fn at_coord(self, i: usize) -> Self {
        match self {
            ProblemError::SliceNonConvergence {
                iterations,
                derivative,
                ..
            } => ProblemError::SliceNonConvergence {
                coord: i,
                iterations,
                derivative,
            },
            ProblemError::UnboundedSlice { .. } => ProblemError::UnboundedSlice { coord: i },
            e => e,
        }
    }
}

/// Minimize a smooth strictly convex 1-D function over [lo, hi] given its
/// first and second derivative. Newton steps are taken inside a sign-change
/// bracket and replaced by bisection whenever they leave it.
pub(crate) fn minimize_convex_slice(
    start: f64,
    lo: f64,
    hi: f64,
    mut derivs: impl FnMut(f64) -> (f64, f64),
) -> Result<f64, ProblemError> {
    let (g0, _) = derivs(start);
    if g0.abs() <= SLICE_DERIVATIVE_TOL {
        return Ok(start);
    }

    // Bracket [a, b] with g(a) < 0 < g(b).
    let (mut a, mut b);
    if g0 > 0.0 {
        b = start;
        if lo.is_finite() {
            if derivs(lo).0 >= 0.0 {
                return Ok(lo);
            }
            a = lo;
        } else {
            let mut step = 1.0_f64.max(start.abs());
            a = start - step;
            let mut expansions = 0;
            while derivs(a).0 > 0.0 {
                b = a;
                step *= 2.0;
                a = start - step;
                expansions += 1;
                if expansions > 2000 || !a.is_finite() {
                    return Err(ProblemError::UnboundedSlice { coord: 0 });
                }
            }
        }
    } else {
        a = start;
        if hi.is_finite() {
            if derivs(hi).0 <= 0.0 {
                return Ok(hi);
            }
            b = hi;
        } else {
            let mut step = 1.0_f64.max(start.abs());
            b = start + step;
            let mut expansions = 0;
            while derivs(b).0 < 0.0 {
                a = b;
                step *= 2.0;
                b = start + step;
                expansions += 1;
                if expansions > 2000 || !b.is_finite() {
                    return Err(ProblemError::UnboundedSlice { coord: 0 });
                }
            }
        }
    }

    let mut t = 0.5 * (a + b);
    let mut last_g = f64::INFINITY;
    for _ in 0..SLICE_MAX_ITERS {
        let (g, h) = derivs(t);
        last_g = g;
        if g.abs() <= SLICE_DERIVATIVE_TOL {
            // One more Newton step typically lands at rounding level.
            if h > 0.0 {
                let polished = t - g / h;
                if polished > a && polished < b && derivs(polished).0.abs() < g.abs() {
                    return Ok(polished);
                }
            }
            return Ok(t);
        }
        if g < 0.0 {
            a = t;
        } else {
            b = t;
        }
        if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
            return Ok(t);
        }
        let newton = if h > 0.0 { t - g / h } else { f64::NAN };
        t = if newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    Err(ProblemError::SliceNonConvergence {
        coord: 0,
        iterations: SLICE_MAX_ITERS,
        derivative: last_g,
    })
}

pub(crate) fn validate_dense(rows: &[Vec<f64>], what: &str) -> Result<usize, ProblemError> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(ProblemError::InvalidData(format!("{what}: ragged rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ProblemError::InvalidData(format!("{what}: non-finite entry")));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_solver_hits_interior_root() {
        // f(t) = (t − 3)² + e^t has f'(t) = 2(t − 3) + e^t.
        let t = minimize_convex_slice(0.0, f64::NEG_INFINITY, f64::INFINITY, |t| {
            (2.0 * (t - 3.0) + t.exp(), 2.0 + t.exp())
        })
        .unwrap();
        assert!((2.0 * (t - 3.0) + t.exp()).abs() < 1e-12);
    }

    #[test]
    fn slice_solver_respects_bounds() {
        let deriv = |t: f64| (t - 5.0, 1.0);
        assert_eq!(minimize_convex_slice(0.0, -1.0, 2.0, deriv).unwrap(), 2.0);
        let deriv = |t: f64| (t + 5.0, 1.0);
        assert_eq!(minimize_convex_slice(0.0, -1.0, 2.0, deriv).unwrap(), -1.0);
    }

    #[test]
    fn slice_solver_expands_bracket() {
        let t = minimize_convex_slice(0.0, f64::NEG_INFINITY, f64::INFINITY, |t| (t + 1e6, 1.0))
            .unwrap();
        assert!((t + 1e6).abs() < 1e-6);
    }

    #[test]
    fn slice_solver_reports_linear_descent() {
        let err = minimize_convex_slice(0.0, f64::NEG_INFINITY, f64::INFINITY, |_| (1.0, 0.0))
            .unwrap_err();
        assert!(matches!(err, ProblemError::UnboundedSlice { .. }));
    }
}
