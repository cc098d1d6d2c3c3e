use super::{validate_dense, Problem, ProblemError};
use crate::geometry::{check_len, Bounds};

/// Lasso min ½‖Ax − b‖² + qᵀx + λ‖x‖₁ rewritten on the doubled variable
/// z = [x⁺; x⁻] ∈ [0, ∞)^{2p} as
/// f(z) = ½‖A(x⁺ − x⁻) − b‖² + qᵀ(x⁺ − x⁻) + λ1ᵀz.
///
/// The cached image is r = A(x⁺ − x⁻).
#[derive(Debug, Clone)]
pub struct LassoBoxProblem {
    /// Columns of A, each of length m.
    cols: Vec<Vec<f64>>,
    b: Vec<f64>,
    q: Vec<f64>,
    lambda: f64,
    bounds: Bounds,
    lipschitz: Vec<f64>,
}

impl LassoBoxProblem {
    /// `a` is given row-wise (m × p).
    pub fn new(a: &[Vec<f64>], b: Vec<f64>, q: Vec<f64>, lambda: f64) -> Result<Self, ProblemError> {
        let p = validate_dense(a, "design matrix")?;
        let m = a.len();
        check_len(m, b.len())?;
        check_len(p, q.len())?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(ProblemError::InvalidData(format!("lambda must be ≥ 0, got {lambda}")));
        }
        if b.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(ProblemError::InvalidData("non-finite b or q".into()));
        }
        let cols: Vec<Vec<f64>> = (0..p).map(|j| a.iter().map(|r| r[j]).collect()).collect();
        let mut lipschitz = Vec::with_capacity(2 * p);
        for (j, c) in cols.iter().enumerate() {
            let l: f64 = c.iter().map(|v| v * v).sum();
            if l == 0.0 {
                return Err(ProblemError::InvalidData(format!("column {j} of A is zero")));
            }
            lipschitz.push(l);
        }
        lipschitz.extend_from_within(..);
        let bounds = Bounds::new(vec![0.0; 2 * p], vec![f64::INFINITY; 2 * p])?;
        Ok(Self {
            cols,
            b,
            q,
            lambda,
            bounds,
            lipschitz,
        })
    }

    pub fn n_original(&self) -> usize {
        self.cols.len()
    }

    /// g(x) + λ‖x‖₁ in the original variable.
    pub fn original_value(&self, x: &[f64]) -> f64 {
        let mut r = vec![0.0; self.b.len()];
        for (c, xj) in self.cols.iter().zip(x) {
            for (ri, a) in r.iter_mut().zip(c) {
                *ri += xj * a;
            }
        }
        let smooth: f64 = 0.5 * r.iter().zip(&self.b).map(|(ri, bi)| (ri - bi).powi(2)).sum::<f64>()
            + self.q.iter().zip(x).map(|(q, x)| q * x).sum::<f64>();
        smooth + self.lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn inner_gradient(&self, aux: &[f64], j: usize) -> f64 {
        let c = &self.cols[j];
        c.iter()
            .zip(aux.iter().zip(&self.b))
            .map(|(a, (r, b))| a * (r - b))
            .sum::<f64>()
            + self.q[j]
    }
}

/// x ↦ [max(x, 0); max(−x, 0)].
pub fn lasso_lift(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| v.max(0.0))
        .chain(x.iter().map(|v| (-v).max(0.0)))
        .collect()
}

/// [x⁺; x⁻] ↦ x⁺ − x⁻.
pub fn lasso_project_back(z: &[f64]) -> Result<Vec<f64>, ProblemError> {
    if !z.len().is_multiple_of(2) {
        return Err(ProblemError::InvalidData("lifted vector has odd length".into()));
    }
    if let Some(v) = z.iter().find(|v| !(**v >= 0.0)) {
        return Err(ProblemError::Infeasible { violation: -v });
    }
    let p = z.len() / 2;
    Ok(z[..p].iter().zip(&z[p..]).map(|(a, b)| a - b).collect())
}

impl Problem for LassoBoxProblem {
    fn name(&self) -> &'static str {
        "lasso"
    }

    fn dim(&self) -> usize {
        2 * self.cols.len()
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    fn aux(&self, z: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.b.len()];
        for (i, zi) in z.iter().enumerate() {
            if *zi != 0.0 {
                self.shift_aux(&mut r, i, *zi);
            }
        }
        r
    }

    fn shift_aux(&self, aux: &mut [f64], i: usize, delta: f64) {
        let p = self.cols.len();
        let (col, s) = if i < p { (&self.cols[i], delta) } else { (&self.cols[i - p], -delta) };
        for (r, a) in aux.iter_mut().zip(col) {
            *r += s * a;
        }
    }

    fn value_with(&self, z: &[f64], aux: &[f64]) -> f64 {
        let p = self.cols.len();
        let residual: f64 = aux.iter().zip(&self.b).map(|(r, b)| (r - b).powi(2)).sum();
        let linear: f64 = (0..p).map(|j| self.q[j] * (z[j] - z[p + j])).sum();
        0.5 * residual + linear + self.lambda * z.iter().sum::<f64>()
    }

    fn coord_gradient_with(&self, _z: &[f64], aux: &[f64], i: usize) -> f64 {
        let p = self.cols.len();
        if i < p {
            self.inner_gradient(aux, i) + self.lambda
        } else {
            -self.inner_gradient(aux, i - p) + self.lambda
        }
    }

    fn coord_curvature_with(&self, _z: &[f64], _aux: &[f64], i: usize) -> f64 {
        self.lipschitz[i]
    }

    fn min_coord_curvature(&self, i: usize) -> f64 {
        self.lipschitz[i]
    }

    fn has_quadratic_slices(&self) -> bool {
        true
    }

    fn hessian_matvec(&self, v: &[f64]) -> Option<Vec<f64>> {
        let r = self.aux(v);
        let p = self.cols.len();
        let half: Vec<f64> = self
            .cols
            .iter()
            .map(|c| c.iter().zip(&r).map(|(a, b)| a * b).sum())
            .collect();
        Some((0..2 * p).map(|i| if i < p { half[i] } else { -half[i - p] }).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> LassoBoxProblem {
        let a = vec![
            vec![1.0, 0.2, -0.5],
            vec![0.3, 1.0, 0.1],
            vec![-0.4, 0.6, 1.0],
            vec![0.5, -0.2, 0.3],
        ];
        LassoBoxProblem::new(&a, vec![1.0, -0.5, 0.2, 0.7], vec![0.1, 0.0, -0.2], 0.3).unwrap()
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lasso_lift(&[1.0, -2.0]), vec![1.0, 0.0, 0.0, 2.0]);
        assert_eq!(lasso_lift(&[0.0, 0.0]), vec![0.0; 4]);
        assert_eq!(lasso_project_back(&[1.0, 0.0, 0.0, 2.0]).unwrap(), vec![1.0, -2.0]);
        assert!(lasso_project_back(&[1.0, -0.5]).is_err());
        assert!(lasso_project_back(&[1.0, 0.5, 0.0]).is_err());
    }

    #[test]
    fn both_copies_share_lipschitz_constants() {
        let p = fixture();
        assert_eq!(p.dim(), 6);
        assert_eq!(p.lipschitz()[..3], p.lipschitz()[3..]);
        assert!((p.lipschitz()[0] - (1.0 + 0.09 + 0.16 + 0.25)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn lifted_objective_matches_original(x in prop::collection::vec(-5.0..5.0f64, 3)) {
            let p = fixture();
            let z = lasso_lift(&x);
            let lhs = p.value(&z);
            let rhs = p.original_value(&x);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            let back = lasso_project_back(&z).unwrap();
            prop_assert_eq!(back, x);
        }
    }
}
