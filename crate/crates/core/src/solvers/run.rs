use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trace::{Record, Step, Termination, Trace};
use super::{Method, SolverConfig, SolverError, StepSchedule};
use crate::geometry::{check_len, project_box, WeightVector};
use crate::problems::{global_lipschitz_bound, Problem, ProblemError};

/// The cached image is rebuilt from x after this many primitive updates to
/// keep incremental drift at rounding level.
const AUX_REFRESH: usize = 1024;

/// x with coordinate i replaced by the exact minimizer of its slice over X_i.
pub fn scdm_step_option1<P: Problem + ?Sized>(p: &P, x: &[f64], i: usize) -> Result<Vec<f64>, ProblemError> {
    let mut y = x.to_vec();
    y[i] = p.exact_coord_min(x, i)?;
    Ok(y)
}

/// x with coordinate i replaced by clip(x_i − (ω/w_i)∇_i f(x)).
pub fn scdm_step_option2<P: Problem + ?Sized>(
    p: &P,
    x: &[f64],
    i: usize,
    omega: f64,
    w: &WeightVector,
) -> Vec<f64> {
    let mut y = x.to_vec();
    y[i] = p.bounds().clip(i, x[i] - omega / w.get(i) * p.coord_gradient(x, i));
    y
}

/// Algorithm loop shared by all solvers: owns the iterate, the cached image
/// and the growing trace.
struct Run<'a, P: ?Sized> {
    p: &'a P,
    cfg: &'a SolverConfig,
    x: Vec<f64>,
    aux: Vec<f64>,
    w: Vec<f64>,
    trace: Trace,
    disp: f64,
    since_refresh: usize,
    gap_every: usize,
    window_f: f64,
    start: Instant,
}

impl<'a, P: Problem + ?Sized> Run<'a, P> {
    fn start(
        p: &'a P,
        cfg: &'a SolverConfig,
        method: Method,
        omega: StepSchedule,
        steps_per_iter: usize,
    ) -> Result<Self, SolverError> {
        let start = Instant::now();
        let n = p.dim();
        if n == 0 {
            return Err(SolverError::InvalidConfig("problem has dimension 0".into()));
        }
        check_len(n, cfg.weights.len())?;
        omega.validate()?;
        let record_every = cfg
            .record_every
            .unwrap_or(if steps_per_iter == 1 && method.is_random() { n } else { 1 });
        if record_every == 0 || cfg.gap_every == Some(0) {
            return Err(SolverError::InvalidConfig("recording intervals must be positive".into()));
        }
        let x = match &cfg.x0 {
            Some(x0) => {
                check_len(n, x0.len())?;
                let violation = p.bounds().violation(x0);
                if violation > crate::geometry::FEASIBILITY_TOL {
                    return Err(ProblemError::Infeasible { violation }.into());
                }
                x0.clone()
            }
            None => project_box(&vec![0.0; n], p.bounds(), &cfg.weights)?,
        };
        let aux = p.aux(&x);
        let f = p.value_with(&x, &aux);
        if !f.is_finite() {
            return Err(SolverError::NonFinite { k: 0 });
        }
        let trace = Trace {
            method,
            problem: p.name().to_string(),
            seed: cfg.seed,
            config_hash: None,
            weights: cfg.weights.as_slice().to_vec(),
            omega,
            steps_per_iter,
            record_every,
            x0: x.clone(),
            steps: Vec::with_capacity(cfg.max_iters.saturating_mul(steps_per_iter).min(1 << 24)),
            checkpoints: Vec::new(),
            records: vec![Record {
                k: 0,
                coord: None,
                f,
                disp_w_sq: None,
                gap: p.duality_gap(&x),
                elapsed: start.elapsed().as_secs_f64(),
            }],
            termination: Termination::Budget,
        };
        Ok(Self {
            p,
            cfg,
            w: cfg.weights.as_slice().to_vec(),
            x,
            aux,
            trace,
            disp: 0.0,
            since_refresh: 0,
            gap_every: cfg.gap_every.unwrap_or(record_every),
            window_f: f,
            start,
        })
    }

    fn coord_step(&mut self, i: usize, t: f64) {
        let delta = t - self.x[i];
        if delta != 0.0 {
            self.disp += self.w[i] * delta * delta;
            self.p.shift_aux(&mut self.aux, i, delta);
            self.x[i] = t;
        }
        self.trace.steps.push(Step::Coordinate { i, value: t });
        self.since_refresh += 1;
        if self.since_refresh == AUX_REFRESH {
            self.aux = self.p.aux(&self.x);
            self.since_refresh = 0;
        }
    }

    fn full_step(&mut self, next: Vec<f64>) {
        self.disp = self
            .x
            .iter()
            .zip(&next)
            .zip(&self.w)
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum();
        self.aux = self.p.aux(&next);
        self.x.clone_from(&next);
        self.trace.steps.push(Step::Full(next));
    }

    fn current_f(&self) -> f64 {
        self.trace.records.last().expect("initial record").f
    }

    /// Close iteration k (the move x_k → x_{k+1}); returns a termination
    /// reason if a stopping rule fired.
    fn finish_iteration(&mut self, k: usize, coord: Option<usize>) -> Result<Option<Termination>, SolverError> {
        let last = self.trace.records.last_mut().expect("initial record");
        last.coord = coord;
        last.disp_w_sq = Some(std::mem::take(&mut self.disp));
        let f = self.p.value_with(&self.x, &self.aux);
        if !f.is_finite() {
            return Err(SolverError::NonFinite { k: k + 1 });
        }
        let next = k + 1;
        let at_budget = next == self.cfg.max_iters;
        let gap = if next.is_multiple_of(self.gap_every) || at_budget {
            self.p.duality_gap(&self.x)
        } else {
            None
        };
        self.trace.records.push(Record {
            k: next,
            coord: None,
            f,
            disp_w_sq: None,
            gap,
            elapsed: self.start.elapsed().as_secs_f64(),
        });
        if next.is_multiple_of(self.trace.record_every) {
            self.trace.checkpoints.push((next, self.x.clone()));
        }
        if let (Some(tol), Some(g)) = (self.cfg.stop.gap, gap) {
            if g <= tol {
                return Ok(Some(Termination::GapReached));
            }
        }
        if next.is_multiple_of(self.trace.record_every) {
            if let Some(tol) = self.cfg.stop.stall {
                if self.window_f - f <= tol * (1.0 + f.abs()) {
                    return Ok(Some(Termination::Stalled));
                }
            }
            self.window_f = f;
        }
        Ok(None)
    }

    fn finish(mut self, termination: Termination) -> Trace {
        let last = self.trace.records.last_mut().expect("initial record");
        if last.gap.is_none() {
            last.gap = self.p.duality_gap(&self.x);
        }
        self.trace.termination = termination;
        self.trace
    }
}

/// Stochastic coordinate descent with uniformly random coordinates, exact
/// slice minimization (`Method::OptionI`) or projected coordinate gradient
/// steps (`Method::OptionII`).
pub fn run_scdm<P: Problem + ?Sized>(p: &P, cfg: &SolverConfig, method: Method) -> Result<Trace, SolverError> {
    let omega = match (method, cfg.omega) {
        (Method::OptionI, _) => StepSchedule::Constant { omega: 1.0 },
        (Method::OptionII, StepSchedule::Auto) => {
            let omega = cfg
                .weights
                .as_slice()
                .iter()
                .zip(p.lipschitz())
                .map(|(w, l)| w / l)
                .fold(f64::INFINITY, f64::min);
            StepSchedule::Constant { omega }
        }
        (Method::OptionII, s) => s,
        (m, _) => {
            return Err(SolverError::InvalidConfig(format!(
                "run_scdm expects OptionI or OptionII, got {m:?}"
            )))
        }
    };
    let mut run = Run::start(p, cfg, method, omega, 1)?;
    let n = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut termination = Termination::Budget;
    for k in 0..cfg.max_iters {
        let i = rng.random_range(0..n);
        let t = match method {
            Method::OptionI => p.exact_coord_min_with(&run.x, &run.aux, i)?,
            _ => {
                let g = p.coord_gradient_with(&run.x, &run.aux, i);
                p.bounds().clip(i, run.x[i] - omega.at(k) / run.w[i] * g)
            }
        };
        run.coord_step(i, t);
        if let Some(t) = run.finish_iteration(k, Some(i))? {
            termination = t;
            break;
        }
    }
    Ok(run.finish(termination))
}

/// Cyclic coordinate descent with exact slice minimization; one iteration
/// is a sweep over coordinates 0..n.
pub fn run_cyclic_cd<P: Problem + ?Sized>(p: &P, cfg: &SolverConfig) -> Result<Trace, SolverError> {
    let n = p.dim();
    let mut run = Run::start(p, cfg, Method::Cyclic, StepSchedule::Constant { omega: 1.0 }, n)?;
    let mut termination = Termination::Budget;
    for k in 0..cfg.max_iters {
        for i in 0..n {
            let t = p.exact_coord_min_with(&run.x, &run.aux, i)?;
            run.coord_step(i, t);
        }
        if let Some(t) = run.finish_iteration(k, None)? {
            termination = t;
            break;
        }
    }
    Ok(run.finish(termination))
}

/// x_{k+1} = proj_X(x_k − ω_k W⁻¹∇f(x_k)). Aborts if f increases by more
/// than rounding (1e−12 relative) on two consecutive iterations.
pub fn run_projected_gradient<P: Problem + ?Sized>(p: &P, cfg: &SolverConfig) -> Result<Trace, SolverError> {
    let omega = match cfg.omega {
        StepSchedule::Auto => StepSchedule::Constant {
            omega: 1.0 / global_lipschitz_bound(p.lipschitz(), &cfg.weights)?,
        },
        s => s,
    };
    let mut run = Run::start(p, cfg, Method::ProjectedGradient, omega, 1)?;
    let n = p.dim();
    let mut termination = Termination::Budget;
    let mut increases = 0;
    for k in 0..cfg.max_iters {
        let step = omega.at(k);
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let g = p.coord_gradient_with(&run.x, &run.aux, i);
                p.bounds().clip(i, run.x[i] - step / run.w[i] * g)
            })
            .collect();
        let f_prev = run.current_f();
        run.full_step(next);
        let stop = run.finish_iteration(k, None)?;
        let f = run.current_f();
        if f - f_prev > 1e-12 * (1.0 + f_prev.abs()) {
            increases += 1;
            if increases == 2 {
                return Err(SolverError::Diverged { k: k + 1, f });
            }
        } else {
            increases = 0;
        }
        if let Some(t) = stop {
            termination = t;
            break;
        }
    }
    Ok(run.finish(termination))
}
