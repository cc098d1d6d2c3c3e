use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Problem;
use crate::geometry::{check_len, GeometryError, WeightVector};
use crate::linalg::power_iteration;

/// L_f^W ≤ Σ L_i / w_i.
pub fn global_lipschitz_bound(lipschitz: &[f64], w: &WeightVector) -> Result<f64, GeometryError> {
    check_len(w.len(), lipschitz.len())?;
    Ok(lipschitz.iter().zip(w.as_slice()).map(|(l, w)| l / w).sum())
}

/// The exact L_f^W = λ_max(W^{-1/2} H W^{-1/2}) for problems with a
/// constant Hessian, by power iteration; `None` otherwise.
pub fn tight_lipschitz_w<P: Problem + ?Sized>(p: &P, w: &WeightVector) -> Option<f64> {
    let n = p.dim();
    p.hessian_matvec(&vec![0.0; n])?;
    let scale: Vec<f64> = w.as_slice().iter().map(|v| 1.0 / v.sqrt()).collect();
    let estimate = power_iteration(
        n,
        |v| {
            let scaled: Vec<f64> = v.iter().zip(&scale).map(|(a, s)| a * s).collect();
            let hv = p.hessian_matvec(&scaled).expect("constant hessian");
            hv.iter().zip(&scale).map(|(a, s)| a * s).collect()
        },
        1e-12,
        100_000,
    );
    Some(estimate)
}

/// min_i (minimum slice curvature)/(2 w_i): every slice satisfies the
/// coordinate-wise strong convexity inequality with this modulus.
pub fn coord_convexity_modulus<P: Problem + ?Sized>(p: &P, w: &WeightVector) -> f64 {
    (0..p.dim())
        .map(|i| p.min_coord_curvature(i) / (2.0 * w.get(i)))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingOptions {
    pub samples: usize,
    pub seed: u64,
    /// Half-width of the sampling window along unbounded directions.
    pub radius: f64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0,
            radius: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityWitness {
    pub x: Vec<f64>,
    pub coord: usize,
    pub xi: f64,
    /// f(x + (ξ − x_i)e_i) − f(x) + ∇_i f(x)(x_i − ξ)
    pub lhs: f64,
    /// γ w_i (ξ − x_i)²
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub holds: bool,
    pub samples: usize,
    /// Smallest observed lhs / (w_i (ξ − x_i)²).
    pub min_ratio: f64,
    pub witness: Option<ConvexityWitness>,
}

/// Sampled check of f(x with ξ at i) − f(x) + ∇_i f(x)(x_i − ξ) ≥ γ w_i |ξ − x_i|².
pub fn check_coord_strong_convexity<P: Problem + ?Sized>(
    p: &P,
    gamma: f64,
    w: &WeightVector,
    opts: &SamplingOptions,
) -> Result<ConvexityReport, GeometryError> {
    let n = p.dim();
    check_len(n, w.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (lo, hi) = sampling_window(p, opts.radius);
    let mut report = ConvexityReport {
        holds: true,
        samples: 0,
        min_ratio: f64::INFINITY,
        witness: None,
    };
    for _ in 0..opts.samples {
        let x: Vec<f64> = (0..n).map(|j| sample(&mut rng, lo[j], hi[j])).collect();
        let i = rng.random_range(0..n);
        let xi = sample(&mut rng, lo[i], hi[i]);
        let delta = xi - x[i];
        if delta == 0.0 {
            continue;
        }
        let aux = p.aux(&x);
        let g = p.coord_gradient_with(&x, &aux, i);
        let change = p.slice_change_with(&x, &aux, i, xi);
        let lhs = change - g * delta;
        let rhs = gamma * w.get(i) * delta * delta;
        report.samples += 1;
        report.min_ratio = report.min_ratio.min(lhs / (w.get(i) * delta * delta));
        // lhs is a difference of terms of size |gδ|; allow for its rounding.
        let slack = 1e-10 * ((g * delta).abs() + change.abs() + rhs.abs());
        if report.holds && lhs < rhs - slack {
            report.holds = false;
            report.witness = Some(ConvexityWitness {
                x,
                coord: i,
                xi,
                lhs,
                rhs,
            });
        }
    }
    Ok(report)
}

fn sampling_window<P: Problem + ?Sized>(p: &P, radius: f64) -> (Vec<f64>, Vec<f64>) {
    let b = p.bounds();
    b.lower()
        .iter()
        .zip(b.upper())
        .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
            (true, true) => (l, u),
            (true, false) => (l, l + radius),
            (false, true) => (u - radius, u),
            (false, false) => (-radius, radius),
        })
        .unzip()
}

fn sample(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}
