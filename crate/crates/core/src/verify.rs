//! Certification of recorded traces as randomized feasible descent methods.
//!
//! For an exact coordinate step from x_k to x̃ (coordinate i) the error
//! vector is z^{(i)} = ∇_i f(x_k) − ∇_i f(x̃) + w_i (x̃^i − x_k^i), which
//! makes x̃^i = clip(x_k^i − (∇_i f(x_k) − z^{(i)})/w_i): the argument of the
//! clip is x̃^i − ∇_i f(x̃)/w_i, a fixed point of the slice optimality
//! condition. In the full-vector (R-FDM) view the other coordinates of z
//! are ∇_j f(x_k), so the projected step leaves them in place.
//!
//! Ratios such as ‖z‖²/‖Δ‖² are only meaningful when the step is resolved
//! in floating point, so they are taken over steps whose length exceeds a
//! relative resolution; every step is still checked against the
//! inequalities with a rounding-level slack.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{check_len, GeometryError, WeightVector};
use crate::problems::{coord_convexity_modulus, global_lipschitz_bound, tight_lipschitz_w, Problem, ProblemError};
use crate::solvers::{Method, Step, Trace};

/// Relative tolerance of the update replay.
pub const REPLAY_TOL: f64 = 1e-9;
/// Relative slack when comparing empirical to theoretical constants.
pub const CONSTANT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("replay mismatch at iteration {k}: update gives {expected}, trace has {found}")]
    Replay { k: usize, expected: f64, found: f64 },
    #[error("trace does not match the verifier: {0}")]
    Mismatch(String),
    #[error("the full-vector check needs an unconstrained problem")]
    Constrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdmMode {
    /// Full vector z; expectations over the coordinate choice.
    Rfdm,
    /// z restricted to the chosen coordinate; per-iteration inequalities.
    Rcfdm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZReconstruction {
    pub coord: usize,
    pub z: Vec<f64>,
    /// (‖z‖*_W)²
    pub dual_norm_sq: f64,
}

/// z_k for an exact coordinate step that moves coordinate `i` of `x` to
/// `x_tilde_i`.
pub fn reconstruct_z_option1<P: Problem + ?Sized>(
    p: &P,
    x: &[f64],
    i: usize,
    x_tilde_i: f64,
    w: &WeightVector,
    mode: FdmMode,
) -> Result<ZReconstruction, GeometryError> {
    check_len(p.dim(), x.len())?;
    check_len(p.dim(), w.len())?;
    let aux = p.aux(x);
    let zi = coord_z(p, x, &aux, i, x_tilde_i, w.get(i));
    let z = match mode {
        FdmMode::Rcfdm => {
            let mut z = vec![0.0; x.len()];
            z[i] = zi;
            z
        }
        FdmMode::Rfdm => {
            let mut z: Vec<f64> = (0..x.len()).map(|j| p.coord_gradient_with(x, &aux, j)).collect();
            z[i] = zi;
            z
        }
    };
    let dual_norm_sq = w.dual_norm_sq(&z)?;
    Ok(ZReconstruction { coord: i, z, dual_norm_sq })
}

fn coord_z<P: Problem + ?Sized>(p: &P, x: &[f64], aux: &[f64], i: usize, t: f64, wi: f64) -> f64 {
    let g = p.coord_gradient_with(x, aux, i);
    let mut shifted = aux.to_vec();
    p.shift_aux(&mut shifted, i, t - x[i]);
    let mut y = x.to_vec();
    y[i] = t;
    g - p.coord_gradient_with(&y, &shifted, i) + wi * (t - x[i])
}

/// Theoretical constants a certificate is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub beta_sq: f64,
    pub zeta: f64,
    /// The value of L_f^W the constants were computed with.
    pub lipschitz_w: f64,
    pub gamma: f64,
}

/// β² = 2[(L_f^W)² + 1], ζ = γ: exact coordinate steps, bounded box.
pub fn rcfdm_option1_constants(lipschitz_w: f64, gamma: f64) -> TheoryConstants {
    TheoryConstants {
        beta_sq: 2.0 * (lipschitz_w * lipschitz_w + 1.0),
        zeta: gamma,
        lipschitz_w,
        gamma,
    }
}

/// β = 0 for projected coordinate gradient steps. With w = L and ω ≤ 1 the
/// descent constant is γ; otherwise the projection inequality gives
/// ζ = min_i (1/ω_max − L_i/(2w_i)).
pub fn rcfdm_option2_constants(lipschitz: &[f64], w: &WeightVector, omega_max: f64, gamma: f64, lipschitz_w: f64) -> TheoryConstants {
    let w_is_l = lipschitz
        .iter()
        .zip(w.as_slice())
        .all(|(l, w)| (l - w).abs() <= 1e-12 * l.abs());
    let zeta = if w_is_l && omega_max <= 1.0 {
        gamma
    } else {
        lipschitz
            .iter()
            .zip(w.as_slice())
            .map(|(l, w)| 1.0 / omega_max - l / (2.0 * w))
            .fold(f64::INFINITY, f64::min)
    };
    TheoryConstants {
        beta_sq: 0.0,
        zeta,
        lipschitz_w,
        gamma,
    }
}

/// β² = 2[(L_f^W)² + 1] + (n − 1) r², r² = max_i L_i²/w_i², ζ = γ:
/// exact coordinate steps on an unconstrained problem, full-vector view.
pub fn rfdm_option1_constants(lipschitz: &[f64], w: &WeightVector, lipschitz_w: f64, gamma: f64) -> TheoryConstants {
    let n = lipschitz.len() as f64;
    let r_sq = lipschitz
        .iter()
        .zip(w.as_slice())
        .map(|(l, w)| (l / w).powi(2))
        .fold(0.0, f64::max);
    TheoryConstants {
        beta_sq: 2.0 * (lipschitz_w * lipschitz_w + 1.0) + (n - 1.0) * r_sq,
        zeta: gamma,
        lipschitz_w,
        gamma,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclicConstants {
    pub beta_sq: f64,
    pub zeta: f64,
    pub omega: f64,
}

/// Constants of cyclic coordinate descent as a deterministic feasible
/// descent method: β² = (1 + √n L_f^W)², ζ = γ, ω = 1.
pub fn cyclic_constants(n: usize, lipschitz_w: f64, gamma: f64) -> CyclicConstants {
    let root = (n as f64).sqrt();
    CyclicConstants {
        beta_sq: (1.0 + root * lipschitz_w).powi(2),
        zeta: gamma,
        omega: 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOptions {
    /// Use the exact L_f^W (power iteration) for problems with a constant
    /// Hessian instead of the bound Σ L_i/w_i.
    pub tight_lipschitz: bool,
    /// Check every this many iterations; `None` checks all of them, except
    /// that the full-vector check subsamples to about 10⁵ coordinate
    /// gradient evaluations.
    pub check_every: Option<usize>,
    /// A step enters the ratios when |Δ| ≥ rel · max(|x_k^i|, |x_{k+1}^i|) + abs.
    /// Shorter steps are still checked for violations, but their ratios are
    /// dominated by rounding in the coordinate gradient (of order 1e−16/|Δ|
    /// relative).
    pub rel_resolution: f64,
    pub abs_resolution: f64,
    pub max_witnesses: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            tight_lipschitz: false,
            check_every: None,
            rel_resolution: 1e-6,
            abs_resolution: 1e-6,
            max_witnesses: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// ‖z‖² exceeds β²‖Δ‖².
    ErrorBound,
    /// f decreased by less than ζ‖Δ‖².
    Descent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub k: usize,
    pub kind: ViolationKind,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub mode: FdmMode,
    pub method: Method,
    /// Largest ‖z‖²/‖Δ‖² (expected values in full-vector mode).
    pub beta_sq_hat: f64,
    /// Smallest decrease/‖Δ‖².
    pub zeta_hat: f64,
    /// Σ‖z‖² / Σ‖Δ‖² over the resolved iterations.
    pub eta_hat: f64,
    pub theory: TheoryConstants,
    pub checked: usize,
    /// Checked iterations whose step was too short to enter the ratios.
    pub unresolved: usize,
    pub max_replay_error: f64,
    /// min over checked iterations of β²‖Δ‖² − ‖z‖², scaled by ‖Δ‖².
    pub worst_error_bound_slack: f64,
    /// min over checked iterations of (decrease − ζ‖Δ‖²)/‖Δ‖².
    pub worst_descent_slack: f64,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
    pub pass: bool,
}

impl Certificate {
    fn new(mode: FdmMode, method: Method, theory: TheoryConstants) -> Self {
        Self {
            mode,
            method,
            beta_sq_hat: 0.0,
            zeta_hat: f64::INFINITY,
            eta_hat: 0.0,
            theory,
            checked: 0,
            unresolved: 0,
            max_replay_error: 0.0,
            worst_error_bound_slack: f64::INFINITY,
            worst_descent_slack: f64::INFINITY,
            violation_count: 0,
            violations: Vec::new(),
            pass: false,
        }
    }

    fn violation(&mut self, v: Violation, max: usize) {
        self.violation_count += 1;
        if self.violations.len() < max {
            self.violations.push(v);
        }
    }

    fn finalize(&mut self, z_sum: f64, d_sum: f64) {
        self.eta_hat = if d_sum > 0.0 { z_sum / d_sum } else { 0.0 };
        self.pass = self.violation_count == 0
            && self.beta_sq_hat <= self.theory.beta_sq * (1.0 + CONSTANT_SLACK)
            && (self.zeta_hat == f64::INFINITY || self.zeta_hat >= self.theory.zeta * (1.0 - CONSTANT_SLACK));
    }
}

fn lipschitz_w<P: Problem + ?Sized>(p: &P, w: &WeightVector, opts: &VerifyOptions) -> Result<f64, GeometryError> {
    if opts.tight_lipschitz {
        if let Some(l) = tight_lipschitz_w(p, w) {
            return Ok(l);
        }
    }
    global_lipschitz_bound(p.lipschitz(), w)
}

fn resolved(opts: &VerifyOptions, before: f64, after: f64) -> bool {
    (after - before).abs() >= opts.rel_resolution * before.abs().max(after.abs()) + opts.abs_resolution
}

fn check_trace_shape<P: Problem + ?Sized>(trace: &Trace, p: &P, w: &WeightVector) -> Result<(), VerifyError> {
    check_len(p.dim(), trace.x0.len())?;
    check_len(p.dim(), w.len())?;
    if trace.steps_per_iter != 1 {
        return Err(VerifyError::Mismatch("expected one coordinate step per iteration".into()));
    }
    if trace.weights != w.as_slice() {
        return Err(VerifyError::Mismatch("trace was produced with different weights".into()));
    }
    Ok(())
}

fn chosen_coord(trace: &Trace, k: usize) -> Result<(usize, f64), VerifyError> {
    match (&trace.steps[k], trace.records[k].coord) {
        (Step::Coordinate { i, value }, Some(c)) if *i == c => Ok((*i, *value)),
        _ => Err(VerifyError::Mismatch(format!("iteration {k} is not a recorded coordinate step"))),
    }
}

/// Per-coordinate certificate: replay of the projected update, then
/// ‖[z]_i‖² ≤ β²‖Δ‖² and f(x_k) − f(x_{k+1}) ≥ ζ‖Δ‖² at every checked
/// iteration.
pub fn check_rcfdm<P: Problem + ?Sized>(
    trace: &Trace,
    p: &P,
    w: &WeightVector,
    opts: &VerifyOptions,
) -> Result<Certificate, VerifyError> {
    check_trace_shape(trace, p, w)?;
    let lw = lipschitz_w(p, w, opts)?;
    let gamma = coord_convexity_modulus(p, w);
    let theory = match trace.method {
        Method::OptionI => rcfdm_option1_constants(lw, gamma),
        Method::OptionII => {
            let omega_max = (0..trace.iterations()).map(|k| trace.omega.at(k)).fold(0.0, f64::max);
            rcfdm_option2_constants(p.lipschitz(), w, omega_max.max(trace.omega.at(0)), gamma, lw)
        }
        m => return Err(VerifyError::Mismatch(format!("{m:?} is not a random coordinate method"))),
    };
    let mut cert = Certificate::new(FdmMode::Rcfdm, trace.method, theory);
    let every = opts.check_every.unwrap_or(1).max(1);
    let (mut z_sum, mut d_sum) = (0.0, 0.0);
    let mut failure = None;
    trace.for_each_iteration(|k, x, next| {
        if failure.is_some() || k % every != 0 {
            return;
        }
        let result = (|| -> Result<(), VerifyError> {
            let (i, t) = chosen_coord(trace, k)?;
            let wi = w.get(i);
            let aux = p.aux(x);
            let g = p.coord_gradient_with(x, &aux, i);
            let (z, omega) = match trace.method {
                Method::OptionI => (coord_z(p, x, &aux, i, t, wi), 1.0),
                _ => (0.0, trace.omega.at(k)),
            };
            let expected = p.bounds().clip(i, x[i] - omega / wi * (g - z));
            let err = (expected - next[i]).abs();
            cert.max_replay_error = cert.max_replay_error.max(err / (1.0 + next[i].abs()));
            if err > REPLAY_TOL * (1.0 + next[i].abs()) {
                return Err(VerifyError::Replay { k, expected, found: next[i] });
            }
            let delta = t - x[i];
            let disp = wi * delta * delta;
            let z_sq = z * z / wi;
            let decrease = -p.slice_change_with(x, &aux, i, t);
            cert.checked += 1;
            let f_scale = 1e-12 * (1.0 + p.value_with(x, &aux).abs());
            if z_sq > theory.beta_sq * disp * (1.0 + CONSTANT_SLACK) + 1e-24 {
                cert.violation(Violation { k, kind: ViolationKind::ErrorBound, lhs: z_sq, rhs: theory.beta_sq * disp }, opts.max_witnesses);
            }
            if decrease < theory.zeta * disp * (1.0 - CONSTANT_SLACK) - f_scale {
                cert.violation(Violation { k, kind: ViolationKind::Descent, lhs: decrease, rhs: theory.zeta * disp }, opts.max_witnesses);
            }
            if disp > 0.0 {
                cert.worst_error_bound_slack = cert.worst_error_bound_slack.min(theory.beta_sq - z_sq / disp);
            }
            if !resolved(opts, x[i], t) {
                cert.unresolved += 1;
                return Ok(());
            }
            cert.worst_descent_slack = cert.worst_descent_slack.min(decrease / disp - theory.zeta);
            cert.beta_sq_hat = cert.beta_sq_hat.max(z_sq / disp);
            cert.zeta_hat = cert.zeta_hat.min(decrease / disp);
            z_sum += z_sq;
            d_sum += disp;
            Ok(())
        })();
        if let Err(e) = result {
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    cert.finalize(z_sum, d_sum);
    Ok(cert)
}

/// Full-vector certificate for exact coordinate steps on an unconstrained
/// problem. At each checked iteration the conditional expectations over the
/// coordinate choice are computed exactly by enumerating all n candidates.
pub fn check_rfdm<P: Problem + ?Sized>(
    trace: &Trace,
    p: &P,
    w: &WeightVector,
    opts: &VerifyOptions,
) -> Result<Certificate, VerifyError> {
    check_trace_shape(trace, p, w)?;
    if !p.bounds().is_unbounded() {
        return Err(VerifyError::Constrained);
    }
    if trace.method != Method::OptionI {
        return Err(VerifyError::Mismatch("the full-vector check expects exact coordinate steps".into()));
    }
    let n = p.dim();
    let lw = lipschitz_w(p, w, opts)?;
    let gamma = coord_convexity_modulus(p, w);
    let theory = rfdm_option1_constants(p.lipschitz(), w, lw, gamma);
    let mut cert = Certificate::new(FdmMode::Rfdm, Method::OptionI, theory);
    let iters = trace.iterations();
    let every = opts
        .check_every
        .unwrap_or_else(|| (n * iters).div_ceil(100_000).max(1))
        .max(1);
    let (mut z_sum, mut d_sum) = (0.0, 0.0);
    let mut failure = None;
    trace.for_each_iteration(|k, x, next| {
        if failure.is_some() || k % every != 0 {
            return;
        }
        let result = (|| -> Result<(), VerifyError> {
            let (chosen, _) = chosen_coord(trace, k)?;
            let aux = p.aux(x);
            let grad: Vec<f64> = (0..n).map(|j| p.coord_gradient_with(x, &aux, j)).collect();
            let grad_dual: f64 = grad.iter().zip(w.as_slice()).map(|(g, w)| g * g / w).sum();
            let (mut ez, mut ed, mut edec) = (0.0, 0.0, 0.0);
            let mut any_resolved = false;
            for j in 0..n {
                let wj = w.get(j);
                let t = p.exact_coord_min_with(x, &aux, j)?;
                let zj = coord_z(p, x, &aux, j, t, wj);
                // Replay of x − W⁻¹(∇f − z): only coordinate j moves.
                let moved = x[j] - (grad[j] - zj) / wj;
                if j == chosen {
                    let err = (moved - next[j]).abs();
                    cert.max_replay_error = cert.max_replay_error.max(err / (1.0 + next[j].abs()));
                    if err > REPLAY_TOL * (1.0 + next[j].abs()) {
                        return Err(VerifyError::Replay { k, expected: moved, found: next[j] });
                    }
                }
                let delta = t - x[j];
                ez += grad_dual - grad[j] * grad[j] / wj + zj * zj / wj;
                ed += wj * delta * delta;
                edec -= p.slice_change_with(x, &aux, j, t);
                any_resolved |= resolved(opts, x[j], t);
            }
            let nf = n as f64;
            let (ez, ed, edec) = (ez / nf, ed / nf, edec / nf);
            cert.checked += 1;
            let f_scale = 1e-12 * (1.0 + p.value_with(x, &aux).abs());
            // At a numerical fixed point every Δ_j is 0 while the other
            // coordinates' gradients are rounding noise, so the error bound
            // is only decidable once some step is resolved.
            if any_resolved && ez > theory.beta_sq * ed * (1.0 + CONSTANT_SLACK) + 1e-24 {
                cert.violation(Violation { k, kind: ViolationKind::ErrorBound, lhs: ez, rhs: theory.beta_sq * ed }, opts.max_witnesses);
            }
            if edec < theory.zeta * ed * (1.0 - CONSTANT_SLACK) - f_scale {
                cert.violation(Violation { k, kind: ViolationKind::Descent, lhs: edec, rhs: theory.zeta * ed }, opts.max_witnesses);
            }
            if !any_resolved || ed == 0.0 {
                cert.unresolved += 1;
                return Ok(());
            }
            cert.worst_error_bound_slack = cert.worst_error_bound_slack.min(theory.beta_sq - ez / ed);
            cert.worst_descent_slack = cert.worst_descent_slack.min(edec / ed - theory.zeta);
            cert.beta_sq_hat = cert.beta_sq_hat.max(ez / ed);
            cert.zeta_hat = cert.zeta_hat.min(edec / ed);
            z_sum += ez;
            d_sum += ed;
            Ok(())
        })();
        if let Err(e) = result {
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    cert.finalize(z_sum, d_sum);
    Ok(cert)
}
