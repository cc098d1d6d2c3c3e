use nalgebra::{DMatrix, DVector};

use super::{validate_dense, Problem, ProblemError};
use crate::geometry::{check_len, Bounds, WeightVector};

/// f(x) = ½xᵀHx + cᵀx over a box, with H symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    n: usize,
    h: Vec<f64>,
    c: Vec<f64>,
    bounds: Bounds,
    lipschitz: Vec<f64>,
}

impl QuadraticProblem {
    pub fn new(h: Vec<Vec<f64>>, c: Vec<f64>, bounds: Bounds) -> Result<Self, ProblemError> {
        let n = h.len();
        if validate_dense(&h, "hessian")? != n {
            return Err(ProblemError::InvalidData("hessian must be square".into()));
        }
        check_len(n, c.len())?;
        check_len(n, bounds.dim())?;
        let flat: Vec<f64> = h.into_iter().flatten().collect();
        let scale = flat.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (flat[i * n + j] - flat[j * n + i]).abs() > 1e-12 * scale {
                    return Err(ProblemError::InvalidData(format!(
                        "hessian is not symmetric at ({i}, {j})"
                    )));
                }
            }
            if !(flat[i * n + i] > 0.0) {
                return Err(ProblemError::InvalidData(format!(
                    "hessian diagonal entry {i} must be positive"
                )));
            }
        }
        let min_eig = DMatrix::from_row_slice(n, n, &flat)
            .symmetric_eigen()
            .eigenvalues
            .min();
        if min_eig < -1e-10 * scale {
            return Err(ProblemError::InvalidData(format!(
                "hessian is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        let lipschitz = (0..n).map(|i| flat[i * n + i]).collect();
        Ok(Self {
            n,
            h: flat,
            c,
            bounds,
            lipschitz,
        })
    }

    /// H = diag(`diag`).
    pub fn diagonal(diag: &[f64], c: Vec<f64>, bounds: Bounds) -> Result<Self, ProblemError> {
        let n = diag.len();
        let h = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
            .collect();
        Self::new(h, c, bounds)
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.h)
    }

    pub fn linear(&self) -> &[f64] {
        &self.c
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hessian().symmetric_eigen().eigenvalues.min()
    }

    /// The optimal set given one minimizer `x_star`. For an unconstrained
    /// problem with singular H this is the affine set x* + null(H);
    /// otherwise the minimizer is taken as unique.
    pub fn optimal_set(&self, x_star: Vec<f64>) -> OptimalSet {
        if !self.bounds.is_unbounded() {
            return OptimalSet::Point(x_star);
        }
        let eig = self.hessian().symmetric_eigen();
        let top = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        let basis: Vec<Vec<f64>> = (0..self.n)
            .filter(|&k| eig.eigenvalues[k].abs() <= 1e-10 * top)
            .map(|k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect();
        if basis.is_empty() {
            OptimalSet::Point(x_star)
        } else {
            OptimalSet::Affine {
                anchor: x_star,
                basis,
            }
        }
    }
}

/// The set of minimizers, as needed to compute the W-nearest optimal point.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimalSet {
    Point(Vec<f64>),
    /// anchor + span(basis)
    Affine {
        anchor: Vec<f64>,
        basis: Vec<Vec<f64>>,
    },
}

impl OptimalSet {
    pub fn is_unique(&self) -> bool {
        matches!(self, OptimalSet::Point(_))
    }

    /// argmin over the set of ‖x − y‖_W.
    pub fn nearest(&self, x: &[f64], w: &WeightVector) -> Vec<f64> {
        match self {
            OptimalSet::Point(p) => p.clone(),
            OptimalSet::Affine { anchor, basis } => {
                // y = anchor + N t with (NᵀWN) t = NᵀW(x − anchor).
                let n = anchor.len();
                let k = basis.len();
                let nmat = DMatrix::from_fn(n, k, |r, c| basis[c][r]);
                let wdiag = DVector::from_column_slice(w.as_slice());
                let wn = DMatrix::from_fn(n, k, |r, c| wdiag[r] * nmat[(r, c)]);
                let gram = nmat.transpose() * &wn;
                let diff = DVector::from_fn(n, |r, _| x[r] - anchor[r]);
                let rhs = wn.transpose() * diff;
                let t = gram
                    .lu()
                    .solve(&rhs)
                    .unwrap_or_else(|| DVector::zeros(k));
                let y = nmat * t;
                anchor.iter().zip(y.iter()).map(|(a, b)| a + b).collect()
            }
        }
    }
}

impl Problem for QuadraticProblem {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    fn aux(&self, x: &[f64]) -> Vec<f64> {
        self.h
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn shift_aux(&self, aux: &mut [f64], i: usize, delta: f64) {
        // H is symmetric, so column i is row i.
        for (a, h) in aux.iter_mut().zip(&self.h[i * self.n..(i + 1) * self.n]) {
            *a += delta * h;
        }
    }

    fn value_with(&self, x: &[f64], aux: &[f64]) -> f64 {
        x.iter()
            .zip(aux.iter().zip(&self.c))
            .map(|(xi, (hx, ci))| xi * (0.5 * hx + ci))
            .sum()
    }

    fn coord_gradient_with(&self, _x: &[f64], aux: &[f64], i: usize) -> f64 {
        aux[i] + self.c[i]
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
        Some(self.aux(v))
    }

    fn coord_gradient(&self, x: &[f64], i: usize) -> f64 {
        let row = &self.h[i * self.n..(i + 1) * self.n];
        row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.c[i]
    }
}
