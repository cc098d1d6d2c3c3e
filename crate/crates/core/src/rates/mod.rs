//! Linear-rate constants for the randomized feasible descent frameworks,
//! the duality-gap iteration bound for the SVM dual, and empirical
//! counterparts (rate regression, quadratic-growth modulus, Hoffman constant).

mod hoffman;
mod kappa;

pub use hoffman::{hoffman_theta_bruteforce, HOFFMAN_MAX_ROWS};
pub use kappa::{estimate_kappa_f, eta_f, kappa_from_eta, kappa_from_theta, KappaEstimate};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::power_iteration;
use crate::problems::{Problem, SvmDualProblem};
use crate::solvers::Trace;

/// One-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.326_347_874_040_841;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("need at least {needed} usable points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("Hoffman enumeration is limited to {max} rows, got {rows}")]
    SizeCap { rows: usize, max: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0}")]
    Undefined(String),
}

fn positive(name: &'static str, value: f64) -> Result<f64, RateError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(RateError::NonPositive { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Framework {
    Rfdm,
    RcfdmZeroZ,
    RcfdmGeneral,
}

/// Which side of the case split on ρ = ω̄κ_f/(ω̄ + 1) the general
/// coordinate rate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// ρ < 1: factor 1 − (1/(2n)) ρ (2ζ/D).
    Interior,
    /// ρ ≥ 1: factor 1 − ζ/(nD).
    Saturated,
}

/// Denominator D of the general coordinate rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    /// D = 2ζ + 2β + β² in both branches (continuous at ρ = 1).
    #[default]
    Consistent,
    /// D = 2ζ + 2β + β in the ρ < 1 branch, 2ζ + 2β + β² otherwise.
    LinearBeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub framework: Framework,
    pub c: f64,
    /// Per-iteration contraction of E[f(x_k) − f*].
    pub factor: f64,
    pub kappa: f64,
    pub zeta: Option<f64>,
    pub beta: Option<f64>,
    pub omega_bar: f64,
    pub lipschitz_w: Option<f64>,
    pub n: Option<usize>,
    /// Weight 1/(2ω̄) of ‖x₀ − x̄₀‖²_W in the initial term of the bound
    /// (zero-error coordinate framework only).
    pub distance_weight: Option<f64>,
    pub branch: Option<Branch>,
}

impl RateConstants {
    /// factor^k · initial
    pub fn bound(&self, k: usize, initial: f64) -> f64 {
        self.factor.powf(k as f64) * initial
    }

    /// f(x₀) − f* + ‖x₀ − x̄₀‖²_W/(2ω̄), or just f(x₀) − f* when the
    /// framework carries no distance term.
    pub fn initial_term(&self, f0_gap: f64, dist_sq: f64) -> f64 {
        f0_gap + self.distance_weight.unwrap_or(0.0) * dist_sq
    }
}

/// Full-vector framework: c = (2/(κ_f ζ))((L_f^W + 1/ω̄)² + β²),
/// factor c/(1 + c).
pub fn rate_rfdm(kappa_f: f64, zeta: f64, beta: f64, omega_bar: f64, lipschitz_w: f64) -> Result<RateConstants, RateError> {
    positive("kappa_f", kappa_f)?;
    positive("zeta", zeta)?;
    positive("omega_bar", omega_bar)?;
    positive("L_f^W", lipschitz_w)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(RateError::NonPositive { name: "beta", value: beta });
    }
    let c = 2.0 / (kappa_f * zeta) * ((lipschitz_w + 1.0 / omega_bar).powi(2) + beta * beta);
    Ok(RateConstants {
        framework: Framework::Rfdm,
        c,
        factor: c / (1.0 + c),
        kappa: kappa_f,
        zeta: Some(zeta),
        beta: Some(beta),
        omega_bar,
        lipschitz_w: Some(lipschitz_w),
        n: None,
        distance_weight: None,
        branch: None,
    })
}

/// Coordinate framework with z ≡ 0 and 1/ω_k ≥ max_i L_i/w_i:
/// c = 2ω̄κ/(n(2ω̄κ + 1)), factor 1 − c.
pub fn rate_rcfdm_zero_z(kappa: f64, omega_bar: f64, n: usize) -> Result<RateConstants, RateError> {
    positive("kappa", kappa)?;
    positive("omega_bar", omega_bar)?;
    positive("n", n as f64)?;
    let t = 2.0 * omega_bar * kappa;
    let c = t / (n as f64 * (t + 1.0));
    Ok(RateConstants {
        framework: Framework::RcfdmZeroZ,
        c,
        factor: 1.0 - c,
        kappa,
        zeta: None,
        beta: None,
        omega_bar,
        lipschitz_w: None,
        n: Some(n),
        distance_weight: Some(1.0 / (2.0 * omega_bar)),
        branch: None,
    })
}

/// Coordinate framework with general z, split on ρ = ω̄κ_f/(ω̄ + 1):
/// ρ < 1 gives 1 − (1/(2n)) ρ (2ζ/D), ρ ≥ 1 gives 1 − ζ/(nD).
pub fn rate_rcfdm_general(
    kappa_f: f64,
    zeta: f64,
    beta: f64,
    omega_bar: f64,
    n: usize,
    denominator: Denominator,
) -> Result<RateConstants, RateError> {
    positive("kappa_f", kappa_f)?;
    positive("zeta", zeta)?;
    positive("omega_bar", omega_bar)?;
    positive("n", n as f64)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(RateError::NonPositive { name: "beta", value: beta });
    }
    let nf = n as f64;
    let rho = omega_bar * kappa_f / (omega_bar + 1.0);
    let d_sat = 2.0 * zeta + 2.0 * beta + beta * beta;
    let (branch, c) = if rho < 1.0 {
        let d = match denominator {
            Denominator::Consistent => d_sat,
            Denominator::LinearBeta => 2.0 * zeta + 3.0 * beta,
        };
        (Branch::Interior, rho * 2.0 * zeta / (2.0 * nf * d))
    } else {
        (Branch::Saturated, zeta / (nf * d_sat))
    };
    Ok(RateConstants {
        framework: Framework::RcfdmGeneral,
        c,
        factor: 1.0 - c,
        kappa: kappa_f,
        zeta: Some(zeta),
        beta: Some(beta),
        omega_bar,
        lipschitz_w: None,
        n: Some(n),
        distance_weight: None,
        branch: Some(branch),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub epsilon: f64,
    pub s: f64,
    pub sigma_sq: f64,
    /// Iterations after which the expected duality gap is at most ε.
    pub k_bound: u64,
    /// First recorded iteration at which the mean gap was ≤ ε, if measured.
    pub observed: Option<usize>,
}

/// s = min{1, ελ/σ²} and
/// K = ⌈n(1 + 1/(2κ_f)) log(2·initial_bound/(sε))⌉ (0 if the log is ≤ 0),
/// with initial_bound = f(0) − f* + ‖x*‖²_L.
pub fn sdca_iteration_bound(
    epsilon: f64,
    lambda: f64,
    sigma_sq: f64,
    n: usize,
    kappa_f: f64,
    initial_bound: f64,
) -> Result<GapReport, RateError> {
    positive("epsilon", epsilon)?;
    positive("lambda", lambda)?;
    positive("sigma_sq", sigma_sq)?;
    positive("kappa_f", kappa_f)?;
    positive("n", n as f64)?;
    if !(initial_bound >= 0.0 && initial_bound.is_finite()) {
        return Err(RateError::NonPositive { name: "initial_bound", value: initial_bound });
    }
    let s = (epsilon * lambda / sigma_sq).min(1.0);
    let log = (2.0 * initial_bound / (s * epsilon)).ln();
    let k = n as f64 * (1.0 + 1.0 / (2.0 * kappa_f)) * log;
    Ok(GapReport {
        epsilon,
        s,
        sigma_sq,
        k_bound: if k > 0.0 { k.ceil() as u64 } else { 0 },
        observed: None,
    })
}

/// σ² = (1/n)‖A‖ with A the label-scaled data matrix and ‖·‖ the spectral
/// norm, by power iteration on Q = AᵀA to relative 1e−8.
pub fn svm_sigma_sq(p: &SvmDualProblem) -> f64 {
    let n = p.dim();
    let scale = p.lambda() * (n * n) as f64;
    let top = power_iteration(
        n,
        |v| {
            p.hessian_matvec(v)
                .expect("SVM dual has a constant Hessian")
                .into_iter()
                .map(|x| x * scale)
                .collect()
        },
        1e-8,
        100_000,
    );
    top.sqrt() / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredRate {
    /// exp(slope): the fitted per-iteration contraction.
    pub factor: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Minimum number of points for the rate regression.
pub const MIN_RATE_POINTS: usize = 10;

/// Least-squares fit of log(f(x_k) − f*) against k over the last `tail`
/// records (all records if `None`), using only points above the rounding
/// floor of f*.
pub fn measured_rate(trace: &Trace, f_star: f64, tail: Option<usize>) -> Result<MeasuredRate, RateError> {
    let floor = 1e-14 * (1.0 + f_star.abs());
    let records = &trace.records;
    let start = tail.map_or(0, |t| records.len().saturating_sub(t));
    let pts: Vec<(f64, f64)> = records[start..]
        .iter()
        .filter(|r| r.f - f_star > floor)
        .map(|r| (r.k as f64, (r.f - f_star).ln()))
        .collect();
    if pts.len() < MIN_RATE_POINTS {
        return Err(RateError::TooFewPoints {
            needed: MIN_RATE_POINTS,
            found: pts.len(),
        });
    }
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(MeasuredRate {
        factor: slope.exp(),
        slope,
        r_squared,
        points: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / m).sqrt(),
            samples: xs.len(),
        }
    }

    /// mean − z · std_err: a one-sided lower confidence bound on the true
    /// mean. A claimed upper bound u on the true mean is rejected only if
    /// this exceeds u.
    pub fn lower_confidence(&self, z: f64) -> f64 {
        self.mean - z * self.std_err
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{Method, Record, StepSchedule, Termination};

    #[test]
    fn full_vector_rate_example() {
        let r = rate_rfdm(1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(r.c, 8.0);
        assert_eq!(r.factor, 8.0 / 9.0);
        let half = rate_rfdm(2.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(half.c, 4.0);
        assert!(rate_rfdm(0.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(rate_rfdm(1.0, -1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn full_vector_factor_increases_with_beta() {
        let mut last = 0.0;
        for beta in [0.0, 1.0, 10.0, 100.0, 1e4] {
            let f = rate_rfdm(1.0, 1.0, beta, 1.0, 1.0).unwrap().factor;
            assert!(f > last && f < 1.0);
            last = f;
        }
    }

    #[test]
    fn zero_z_rate_examples() {
        let r = rate_rcfdm_zero_z(0.5, 1.0, 1).unwrap();
        assert_eq!(r.c, 0.5);
        assert_eq!(r.distance_weight, Some(0.5));
        for kappa in [0.1, 1.0, 3.0] {
            for n in [1, 5, 40] {
                let c = rate_rcfdm_zero_z(kappa, 1.0, n).unwrap().c;
                let quoted = kappa / (n as f64 * (kappa + 0.5));
                assert!((c - quoted).abs() < 1e-15);
            }
        }
        let c1 = rate_rcfdm_zero_z(1.0, 1.0, 100).unwrap().c;
        let c2 = rate_rcfdm_zero_z(1.0, 1.0, 200).unwrap().c;
        assert!((c1 / c2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn general_rate_branches() {
        // β = 0, interior branch: 1 − ρ/(2n).
        let r = rate_rcfdm_general(0.5, 0.3, 0.0, 1.0, 4, Denominator::Consistent).unwrap();
        assert_eq!(r.branch, Some(Branch::Interior));
        assert!((r.factor - (1.0 - 0.25 / 8.0)).abs() < 1e-15);
        let sat = rate_rcfdm_general(4.0, 0.3, 0.5, 1.0, 4, Denominator::Consistent).unwrap();
        assert_eq!(sat.branch, Some(Branch::Saturated));
        // Continuity at ρ = 1 (ω̄ = 1, κ_f = 2).
        let below = rate_rcfdm_general(2.0 * (1.0 - 1e-12), 0.3, 0.7, 1.0, 5, Denominator::Consistent).unwrap();
        let at = rate_rcfdm_general(2.0, 0.3, 0.7, 1.0, 5, Denominator::Consistent).unwrap();
        assert_eq!(below.branch, Some(Branch::Interior));
        assert_eq!(at.branch, Some(Branch::Saturated));
        assert!((below.factor - at.factor).abs() < 1e-9);
        let linear = rate_rcfdm_general(0.5, 0.3, 0.7, 1.0, 5, Denominator::LinearBeta).unwrap();
        let consistent = rate_rcfdm_general(0.5, 0.3, 0.7, 1.0, 5, Denominator::Consistent).unwrap();
        // β < 1, so β > β² and the linear-in-β denominator is larger.
        assert!(linear.c < consistent.c);
    }

    #[test]
    fn iteration_bound_examples() {
        // σ² chosen so that s = 1.
        let r = sdca_iteration_bound(0.2, 10.0, 1.0, 10, 1.0, 1.0).unwrap();
        assert_eq!(r.s, 1.0);
        assert_eq!(r.k_bound, 35);
        let zero = sdca_iteration_bound(10.0, 1.0, 1.0, 10, 1.0, 1.0).unwrap();
        assert_eq!(zero.k_bound, 0);
        assert!(sdca_iteration_bound(0.0, 1.0, 1.0, 10, 1.0, 1.0).is_err());
        let small = sdca_iteration_bound(0.01, 0.1, 0.5, 8, 1.0, 1.0).unwrap();
        assert!((small.s - 0.002).abs() < 1e-15);
    }

    fn synthetic_trace(fs: &[f64]) -> Trace {
        Trace {
            method: Method::OptionI,
            problem: "synthetic".into(),
            seed: 0,
            config_hash: None,
            weights: vec![1.0],
            omega: StepSchedule::Auto,
            steps_per_iter: 1,
            record_every: 1,
            x0: vec![0.0],
            steps: Vec::new(),
            checkpoints: Vec::new(),
            records: fs
                .iter()
                .enumerate()
                .map(|(k, f)| Record {
                    k,
                    coord: None,
                    f: *f,
                    disp_w_sq: None,
                    gap: None,
                    elapsed: 0.0,
                })
                .collect(),
            termination: Termination::Budget,
        }
    }

    #[test]
    fn geometric_sequence_rate() {
        let fs: Vec<f64> = (0..50).map(|k| 1.0 + 0.9f64.powi(k)).collect();
        let r = measured_rate(&synthetic_trace(&fs), 1.0, None).unwrap();
        assert!((r.factor - 0.9).abs() < 1e-12, "{}", r.factor);
        assert!(r.r_squared > 0.999_999);
        let flat = synthetic_trace(&[2.0; 30]);
        assert!(matches!(measured_rate(&flat, 2.0, None), Err(RateError::TooFewPoints { .. })));
    }

    #[test]
    fn mean_estimate() {
        let m = MeanEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((m.std_err - sd / 2.0).abs() < 1e-15);
        assert!(m.lower_confidence(Z_99) < m.mean);
    }
}
