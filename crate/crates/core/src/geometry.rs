//! Weighted geometry on ℝⁿ: the norm ‖x‖²_W = Σ wᵢxᵢ², its dual norm,
//! coordinate boxes, and the W-projection onto a box.
//!
//! Norms are returned squared; use the `sqrt` accessors for reporting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute slack used by every "is this point in the box" test.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("weight {index} is {value}; weights must be finite and strictly positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("empty interval at coordinate {index}: [{lower}, {upper}]")]
    EmptyInterval { index: usize, lower: f64, upper: f64 },
    #[error("non-finite entry at coordinate {index}")]
    NonFinite { index: usize },
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<(), GeometryError> {
    if expected == found {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, found })
    }
}

/// Rejects vectors containing NaN or ±∞.
pub fn check_finite(x: &[f64]) -> Result<(), GeometryError> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(GeometryError::NonFinite { index }),
        None => Ok(()),
    }
}

/// The diagonal of W. Every entry is finite and strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self, GeometryError> {
        if let Some((index, &value)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(GeometryError::NonPositiveWeight { index, value });
        }
        Ok(Self(w))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Σ wᵢ xᵢ²
    pub fn norm_sq(&self, x: &[f64]) -> Result<f64, GeometryError> {
        check_len(self.len(), x.len())?;
        Ok(self.0.iter().zip(x).map(|(w, v)| w * v * v).sum())
    }

    /// Σ yᵢ² / wᵢ
    pub fn dual_norm_sq(&self, y: &[f64]) -> Result<f64, GeometryError> {
        check_len(self.len(), y.len())?;
        Ok(self.0.iter().zip(y).map(|(w, v)| v * v / w).sum())
    }

    pub fn norm(&self, x: &[f64]) -> Result<f64, GeometryError> {
        self.norm_sq(x).map(f64::sqrt)
    }

    pub fn dual_norm(&self, y: &[f64]) -> Result<f64, GeometryError> {
        self.dual_norm_sq(y).map(f64::sqrt)
    }

    /// ‖x − y‖²_W without allocating the difference.
    pub fn dist_sq(&self, x: &[f64], y: &[f64]) -> Result<f64, GeometryError> {
        check_len(self.len(), x.len())?;
        check_len(self.len(), y.len())?;
        Ok(self
            .0
            .iter()
            .zip(x.iter().zip(y))
            .map(|(w, (a, b))| w * (a - b) * (a - b))
            .sum())
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = GeometryError;

    fn try_from(w: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// X = X₁ × ⋯ × Xₙ with Xᵢ = [lowerᵢ, upperᵢ]. Infinite entries mean the
/// side is unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        check_len(lower.len(), upper.len())?;
        for (index, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            // NaN fails this comparison as well.
            if !(l < u) || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(GeometryError::EmptyInterval {
                    index,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// ℝⁿ
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    /// [lo, hi]ⁿ
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.iter().all(|l| *l == f64::NEG_INFINITY)
            && self.upper.iter().all(|u| *u == f64::INFINITY)
    }

    /// Clip a scalar into Xᵢ.
    #[inline]
    pub fn clip(&self, i: usize, v: f64) -> f64 {
        v.max(self.lower[i]).min(self.upper[i])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(i, &v)| {
                v.is_finite()
                    && v >= self.lower[i] - FEASIBILITY_TOL
                    && v <= self.upper[i] + FEASIBILITY_TOL
            })
    }

    /// Largest bound violation of `x` (0 when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, &v)| (self.lower[i] - v).max(v - self.upper[i]).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// ‖x‖²_W
pub fn weighted_norm_sq(x: &[f64], w: &WeightVector) -> Result<f64, GeometryError> {
    w.norm_sq(x)
}

/// (‖y‖*_W)² = Σ yᵢ²/wᵢ
pub fn weighted_dual_norm_sq(y: &[f64], w: &WeightVector) -> Result<f64, GeometryError> {
    w.dual_norm_sq(y)
}

/// argmin_{y ∈ X} ‖x − y‖²_W.
///
/// The objective separates into Σ wᵢ(xᵢ − yᵢ)² with wᵢ > 0, so each
/// coordinate is minimized independently by clipping and the result does not
/// depend on `w`. The weight vector is still taken to check dimensions.
pub fn project_box(x: &[f64], bounds: &Bounds, w: &WeightVector) -> Result<Vec<f64>, GeometryError> {
    check_len(bounds.dim(), x.len())?;
    check_len(bounds.dim(), w.len())?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &v)| bounds.clip(i, v))
        .collect())
}

/// ∇⁺f(x) = x − P_X(x − ∇f(x)); zero exactly at stationary points.
pub fn projected_gradient(
    x: &[f64],
    grad: &[f64],
    bounds: &Bounds,
    w: &WeightVector,
) -> Result<Vec<f64>, GeometryError> {
    check_len(x.len(), grad.len())?;
    let shifted: Vec<f64> = x.iter().zip(grad).map(|(a, g)| a - g).collect();
    let projected = project_box(&shifted, bounds, w)?;
    Ok(x.iter().zip(&projected).map(|(a, p)| a - p).collect())
}
