use super::SolverError;
use crate::geometry::{project_box, projected_gradient, WeightVector};
use crate::problems::Problem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    /// Target duality gap, checked when the problem has one.
    pub gap_tol: f64,
    /// Target max-norm of the projected gradient, always checked.
    pub pg_tol: f64,
    pub max_sweeps: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-12,
            pg_tol: 1e-12,
            max_sweeps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    pub f: f64,
    pub gap: Option<f64>,
    pub pg_norm: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// High-accuracy minimizer by exact cyclic coordinate minimization, with the
/// cached image recomputed from scratch after every sweep.
pub fn reference_solve<P: Problem + ?Sized>(
    p: &P,
    opts: &ReferenceOptions,
) -> Result<ReferenceSolution, SolverError> {
    let n = p.dim();
    let ones = WeightVector::ones(n);
    let mut x = project_box(&vec![0.0; n], p.bounds(), &ones)?;
    let mut sweeps = 0;
    loop {
        let grad = p.gradient(&x);
        let pg = projected_gradient(&x, &grad, p.bounds(), &ones)?;
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gap = p.duality_gap(&x);
        let converged = pg_norm <= opts.pg_tol && gap.is_none_or(|g| g <= opts.gap_tol);
        if converged || sweeps == opts.max_sweeps {
            return Ok(ReferenceSolution {
                f: p.value(&x),
                x,
                gap,
                pg_norm,
                sweeps,
                converged,
            });
        }
        let mut aux = p.aux(&x);
        let before = x.clone();
        for i in 0..n {
            let t = p.exact_coord_min_with(&x, &aux, i)?;
            let delta = t - x[i];
            if delta != 0.0 {
                p.shift_aux(&mut aux, i, delta);
                x[i] = t;
            }
        }
        sweeps += 1;
        if x == before {
            // A fixed point of exact minimization: nothing further to gain.
            let grad = p.gradient(&x);
            let pg = projected_gradient(&x, &grad, p.bounds(), &ones)?;
            return Ok(ReferenceSolution {
                f: p.value(&x),
                gap: p.duality_gap(&x),
                pg_norm: pg.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                x,
                sweeps,
                converged: true,
            });
        }
    }
}
