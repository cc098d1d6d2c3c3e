use serde::{Deserialize, Serialize};

use super::{validate_dense, Problem, ProblemError};
use crate::geometry::{check_len, Bounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// log(1 + exp(−y m))
    Logistic,
    /// (m − y)²
    Squared,
    /// max(0, 1 − y m)²
    SquaredHinge,
}

impl Loss {
    fn value(self, m: f64, y: f64) -> f64 {
        match self {
            Loss::Logistic => softplus(-y * m),
            Loss::Squared => (m - y).powi(2),
            Loss::SquaredHinge => (1.0 - y * m).max(0.0).powi(2),
        }
    }

    fn derivative(self, m: f64, y: f64) -> f64 {
        match self {
            Loss::Logistic => -y * sigmoid(-y * m),
            Loss::Squared => 2.0 * (m - y),
            Loss::SquaredHinge => -2.0 * y * (1.0 - y * m).max(0.0),
        }
    }

    fn second_derivative(self, m: f64, y: f64) -> f64 {
        match self {
            Loss::Logistic => {
                let s = sigmoid(y * m);
                y * y * s * (1.0 - s)
            }
            Loss::Squared => 2.0,
            Loss::SquaredHinge => {
                if 1.0 - y * m > 0.0 {
                    2.0 * y * y
                } else {
                    0.0
                }
            }
        }
    }

    /// sup of the second derivative over m, for labels of unit magnitude
    /// (any label for the squared loss).
    fn curvature_bound(self) -> f64 {
        match self {
            Loss::Logistic => 0.25,
            Loss::Squared | Loss::SquaredHinge => 2.0,
        }
    }

    /// ℓ(m1) − ℓ(m0) without forming the two values separately.
    fn change(self, m0: f64, m1: f64, y: f64) -> f64 {
        match self {
            Loss::Logistic => {
                let (u0, u1) = (-y * m0, -y * m1);
                let du = u1 - u0;
                if du.abs() > 30.0 {
                    softplus(u1) - softplus(u0)
                } else {
                    (sigmoid(u0) * du.exp_m1()).ln_1p()
                }
            }
            Loss::Squared => (m1 - m0) * (m1 + m0 - 2.0 * y),
            Loss::SquaredHinge => {
                let a0 = (1.0 - y * m0).max(0.0);
                let a1 = (1.0 - y * m1).max(0.0);
                let diff = if a0 > 0.0 && a1 > 0.0 { y * (m0 - m1) } else { a1 - a0 };
                diff * (a1 + a0)
            }
        }
    }
}

fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// ℓ2-regularized empirical risk f(x) = (1/N) Σ_j ℓ(a_jᵀx; y_j) + (λ/2)‖x‖²
/// over x ∈ ℝ^d.
///
/// The cached image is the margin vector m = Ax. Each slice has curvature
/// (1/N) Σ_j ℓ''(m_j) A_ji² + λ, bounded by L_i = (c_ℓ/N)‖A[:, i]‖² + λ where
/// c_ℓ = sup ℓ'' (1/4 logistic, 2 squared and squared hinge), and at least λ.
#[derive(Debug, Clone)]
pub struct ErmProblem {
    /// Columns of A, each of length N.
    cols: Vec<Vec<f64>>,
    labels: Vec<f64>,
    lambda: f64,
    loss: Loss,
    bounds: Bounds,
    lipschitz: Vec<f64>,
}

impl ErmProblem {
    /// `rows` are the samples a_j (N × d).
    pub fn new(rows: &[Vec<f64>], labels: Vec<f64>, lambda: f64, loss: Loss) -> Result<Self, ProblemError> {
        let d = validate_dense(rows, "samples")?;
        let big_n = rows.len();
        if big_n == 0 || d == 0 {
            return Err(ProblemError::InvalidData("ERM needs at least one sample and feature".into()));
        }
        check_len(big_n, labels.len())?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ProblemError::InvalidData(format!("lambda must be positive, got {lambda}")));
        }
        match loss {
            Loss::Squared if labels.iter().any(|y| !y.is_finite()) => {
                return Err(ProblemError::InvalidData("non-finite label".into()))
            }
            Loss::Logistic | Loss::SquaredHinge if labels.iter().any(|y| *y != 1.0 && *y != -1.0) => {
                return Err(ProblemError::InvalidData("labels must be ±1 for this loss".into()))
            }
            _ => {}
        }
        let cols: Vec<Vec<f64>> = (0..d).map(|i| rows.iter().map(|r| r[i]).collect()).collect();
        let c = loss.curvature_bound() / big_n as f64;
        let lipschitz = cols
            .iter()
            .map(|col| c * col.iter().map(|v| v * v).sum::<f64>() + lambda)
            .collect();
        Ok(Self {
            cols,
            labels,
            lambda,
            loss,
            bounds: Bounds::unbounded(d),
            lipschitz,
        })
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn inv_n(&self) -> f64 {
        1.0 / self.labels.len() as f64
    }
}

impl Problem for ErmProblem {
    fn name(&self) -> &'static str {
        match self.loss {
            Loss::Logistic => "erm-logistic",
            Loss::Squared => "erm-squared",
            Loss::SquaredHinge => "erm-squared-hinge",
        }
    }

    fn dim(&self) -> usize {
        self.cols.len()
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    fn aux(&self, x: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.labels.len()];
        for (i, xi) in x.iter().enumerate() {
            if *xi != 0.0 {
                self.shift_aux(&mut m, i, *xi);
            }
        }
        m
    }

    fn shift_aux(&self, aux: &mut [f64], i: usize, delta: f64) {
        for (m, a) in aux.iter_mut().zip(&self.cols[i]) {
            *m += delta * a;
        }
    }

    fn value_with(&self, x: &[f64], aux: &[f64]) -> f64 {
        let risk: f64 = aux
            .iter()
            .zip(&self.labels)
            .map(|(m, y)| self.loss.value(*m, *y))
            .sum();
        risk * self.inv_n() + 0.5 * self.lambda * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn coord_gradient_with(&self, x: &[f64], aux: &[f64], i: usize) -> f64 {
        let g: f64 = self.cols[i]
            .iter()
            .zip(aux.iter().zip(&self.labels))
            .map(|(a, (m, y))| a * self.loss.derivative(*m, *y))
            .sum();
        g * self.inv_n() + self.lambda * x[i]
    }

    fn coord_curvature_with(&self, _x: &[f64], aux: &[f64], i: usize) -> f64 {
        let h: f64 = self.cols[i]
            .iter()
            .zip(aux.iter().zip(&self.labels))
            .map(|(a, (m, y))| a * a * self.loss.second_derivative(*m, *y))
            .sum();
        h * self.inv_n() + self.lambda
    }

    fn min_coord_curvature(&self, _i: usize) -> f64 {
        self.lambda
    }

    fn has_quadratic_slices(&self) -> bool {
        self.loss == Loss::Squared
    }

    fn hessian_matvec(&self, v: &[f64]) -> Option<Vec<f64>> {
        if self.loss != Loss::Squared {
            return None;
        }
        let av = self.aux(v);
        Some(
            self.cols
                .iter()
                .zip(v)
                .map(|(col, vi)| {
                    2.0 * self.inv_n() * col.iter().zip(&av).map(|(a, b)| a * b).sum::<f64>()
                        + self.lambda * vi
                })
                .collect(),
        )
    }

    fn slice_change_with(&self, x: &[f64], aux: &[f64], i: usize, t: f64) -> f64 {
        let delta = t - x[i];
        if delta == 0.0 {
            return 0.0;
        }
        let risk: f64 = self.cols[i]
            .iter()
            .zip(aux.iter().zip(&self.labels))
            .map(|(a, (m, y))| self.loss.change(*m, m + delta * a, *y))
            .sum();
        risk * self.inv_n() + self.lambda * delta * (x[i] + 0.5 * delta)
    }
}
