//! Small dense helpers shared by the convexity and rate modules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest eigenvalue of a symmetric positive semidefinite operator, by power
/// iteration from a fixed pseudo-random start. Stops when the Rayleigh
/// quotient changes by less than `tol` relative, or after `max_iter` steps.
pub fn power_iteration(
    dim: usize,
    mut matvec: impl FnMut(&[f64]) -> Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..1.5)).collect();
    normalize(&mut v);
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let mut u = matvec(&v);
        let rayleigh: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        if normalize(&mut u) == 0.0 {
            return 0.0;
        }
        let converged = (rayleigh - estimate).abs() <= tol * rayleigh.abs();
        estimate = rayleigh;
        v = u;
        if converged {
            break;
        }
    }
    estimate
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn matches_dense_eigensolver() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let expected = m.clone().symmetric_eigen().eigenvalues.max();
        let got = power_iteration(
            3,
            |v| (&m * nalgebra::DVector::from_column_slice(v)).iter().copied().collect(),
            1e-14,
            10_000,
        );
        assert!((got - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn zero_operator() {
        assert_eq!(power_iteration(4, |v| vec![0.0; v.len()], 1e-12, 100), 0.0);
    }
}
