use nalgebra::DMatrix;

use super::{Problem, ProblemError};
use crate::data::{Dataset, SparseRow};
use crate::geometry::{check_len, Bounds};

/// Dual of the hinge-loss linear SVM,
/// f(x) = (1/(2λn²)) xᵀQx − (1/n)1ᵀx on [0, 1]ⁿ with Q_ij = y_i y_j ⟨a_i, a_j⟩.
///
/// The cached image is v = Σ x_i y_i a_i, so that xᵀQx = ‖v‖² and the
/// primal weight vector is v/(λn).
#[derive(Debug, Clone)]
pub struct SvmDualProblem {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    d: usize,
    lambda: f64,
    bounds: Bounds,
    lipschitz: Vec<f64>,
}

impl SvmDualProblem {
    pub fn new(data: &Dataset, lambda: f64) -> Result<Self, ProblemError> {
        let n = data.len();
        if n == 0 {
            return Err(ProblemError::InvalidData("SVM dual needs at least one example".into()));
        }
        check_len(n, data.labels.len())?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ProblemError::InvalidData(format!("lambda must be positive, got {lambda}")));
        }
        if let Some(i) = data.labels.iter().position(|y| *y != 1.0 && *y != -1.0) {
            return Err(ProblemError::InvalidData(format!("label {i} is not ±1")));
        }
        let scale = lambda * (n * n) as f64;
        let mut lipschitz = Vec::with_capacity(n);
        for (i, row) in data.rows.iter().enumerate() {
            if row.values.iter().any(|v| !v.is_finite()) {
                return Err(ProblemError::InvalidData(format!("row {i} has a non-finite entry")));
            }
            if row.indices.iter().any(|&j| j >= data.n_features) {
                return Err(ProblemError::InvalidData(format!("row {i} exceeds n_features")));
            }
            let norm_sq: f64 = row.values.iter().map(|v| v * v).sum();
            if norm_sq == 0.0 {
                return Err(ProblemError::InvalidData(format!("row {i} is zero")));
            }
            lipschitz.push(norm_sq / scale);
        }
        Ok(Self {
            rows: data.rows.clone(),
            labels: data.labels.clone(),
            d: data.n_features,
            lambda,
            bounds: Bounds::uniform(n, 0.0, 1.0)?,
            lipschitz,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_features(&self) -> usize {
        self.d
    }

    fn n(&self) -> f64 {
        self.rows.len() as f64
    }

    fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        let row = &self.rows[i];
        row.indices.iter().zip(&row.values).map(|(&j, a)| a * v[j]).sum()
    }

    /// Dual objective; rejects points outside [0, 1]ⁿ.
    pub fn dual_value(&self, x: &[f64]) -> Result<f64, ProblemError> {
        check_len(self.rows.len(), x.len())?;
        let violation = self.bounds.violation(x);
        if violation > crate::geometry::FEASIBILITY_TOL {
            return Err(ProblemError::Infeasible { violation });
        }
        Ok(self.value(x))
    }

    /// w = (1/(λn)) Σ x_i y_i a_i.
    pub fn primal_from_dual(&self, x: &[f64]) -> Vec<f64> {
        let s = 1.0 / (self.lambda * self.n());
        self.aux(x).into_iter().map(|v| v * s).collect()
    }

    /// P(w) = (1/n) Σ max(0, 1 − y_i wᵀa_i) + (λ/2)‖w‖².
    pub fn primal_value(&self, w: &[f64]) -> f64 {
        let hinge: f64 = (0..self.rows.len())
            .map(|i| (1.0 - self.labels[i] * self.row_dot(i, w)).max(0.0))
            .sum();
        hinge / self.n() + 0.5 * self.lambda * w.iter().map(|v| v * v).sum::<f64>()
    }

    /// Q_ij = y_i y_j ⟨a_i, a_j⟩, materialized for small instances.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        let dense: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![0.0; self.d];
                for (&j, &a) in r.indices.iter().zip(&r.values) {
                    v[j] = a;
                }
                v
            })
            .collect();
        DMatrix::from_fn(n, n, |i, j| {
            let dot: f64 = dense[i].iter().zip(&dense[j]).map(|(a, b)| a * b).sum();
            self.labels[i] * self.labels[j] * dot
        })
    }
}

impl Problem for SvmDualProblem {
    fn name(&self) -> &'static str {
        "svm-dual"
    }

    fn dim(&self) -> usize {
        self.rows.len()
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    fn aux(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        for (i, xi) in x.iter().enumerate() {
            if *xi != 0.0 {
                self.shift_aux(&mut v, i, *xi);
            }
        }
        v
    }

    fn shift_aux(&self, aux: &mut [f64], i: usize, delta: f64) {
        let row = &self.rows[i];
        let s = delta * self.labels[i];
        for (&j, a) in row.indices.iter().zip(&row.values) {
            aux[j] += s * a;
        }
    }

    fn value_with(&self, x: &[f64], aux: &[f64]) -> f64 {
        let n = self.n();
        let quad: f64 = aux.iter().map(|v| v * v).sum();
        quad / (2.0 * self.lambda * n * n) - x.iter().sum::<f64>() / n
    }

    fn coord_gradient_with(&self, _x: &[f64], aux: &[f64], i: usize) -> f64 {
        let n = self.n();
        self.labels[i] * self.row_dot(i, aux) / (self.lambda * n * n) - 1.0 / n
    }

    fn coord_curvature_with(&self, _x: &[f64], _aux: &[f64], i: usize) -> f64 {
        self.lipschitz[i]
    }

    fn min_coord_curvature(&self, i: usize) -> f64 {
        self.lipschitz[i]
    }

    fn has_quadratic_slices(&self) -> bool {
        true
    }

    fn hessian_matvec(&self, v: &[f64]) -> Option<Vec<f64>> {
        let u = self.aux(v);
        let s = 1.0 / (self.lambda * self.n() * self.n());
        Some(
            (0..self.rows.len())
                .map(|i| s * self.labels[i] * self.row_dot(i, &u))
                .collect(),
        )
    }

    fn duality_gap(&self, x: &[f64]) -> Option<f64> {
        Some(self.primal_value(&self.primal_from_dual(x)) + self.value(x))
    }
}
