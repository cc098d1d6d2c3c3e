//! Runs a configured experiment: per-seed solver runs on a thread pool,
//! then the optional certificate, rate and duality-gap analyses.

use anyhow::{bail, Context, Result};
use fdm_core::geometry::WeightVector;
use fdm_core::problems::{coord_convexity_modulus, global_lipschitz_bound, tight_lipschitz_w, OptimalSet, Problem};
use fdm_core::rates::{
    estimate_kappa_f, measured_rate, rate_rcfdm_general, rate_rcfdm_zero_z, rate_rfdm, sdca_iteration_bound,
    svm_sigma_sq, MeanEstimate, RateConstants, Z_99,
};
use fdm_core::solvers::{
    reference_solve, run_cyclic_cd, run_projected_gradient, run_scdm, Method, ReferenceOptions, SolverConfig,
    StepSchedule, StopRule, Trace,
};
use fdm_core::verify::{
    check_rcfdm, check_rfdm, rcfdm_option1_constants, rfdm_option1_constants, VerifyOptions,
};
use rayon::prelude::*;

use crate::config::{solver_config, BuiltProblem, ExperimentConfig};
use crate::report::{GapEntry, GapSummary, ProblemSummary, RatesReport, Report, RunReport};

/// Allowed excess of the lower confidence bound on E[f(x_k)] − f* over the
/// theoretical bound before the rate check fails.
pub const RATE_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    Rates,
    Gap,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Rates => "rates",
            Command::Gap => "gap",
        }
    }
}

/// Turns on the analysis a command asks for and rejects combinations that
/// cannot run. Errors here are configuration errors.
pub fn prepare(cfg: &mut ExperimentConfig, command: Command, problem: &BuiltProblem) -> Result<()> {
    match command {
        Command::Solve => {}
        Command::Verify => {
            if !cfg.verify.rcfdm && !cfg.verify.rfdm {
                cfg.verify.rcfdm = true;
            }
        }
        Command::Rates => cfg.rates.enabled = true,
        Command::Gap => {
            if cfg.gap.epsilon.is_empty() {
                bail!("gap needs at least one epsilon (gap.epsilon or --epsilon)");
            }
        }
    }
    cfg.validate()?;
    let p = problem.as_dyn();
    if cfg.verify.rfdm && !p.bounds().is_unbounded() {
        bail!("the full-vector certificate needs an unconstrained problem; {} has a box", p.name());
    }
    if cfg.rates.enabled && !cfg.solver.method.is_random() {
        bail!("rate analysis covers the random coordinate methods only");
    }
    if command == Command::Gap {
        if !matches!(problem, BuiltProblem::Svm(_)) {
            bail!("the duality-gap experiment needs kind = \"svm-dual\"");
        }
        if cfg.solver.method != Method::OptionI {
            bail!("the duality-gap experiment runs method = \"option-i\"");
        }
    }
    if let Some(x0) = &cfg.solver.x0 {
        if x0.len() != p.dim() {
            bail!("solver.x0 has {} entries, the problem has dimension {}", x0.len(), p.dim());
        }
    }
    solver_config(&cfg.solver, p, 0)?;
    Ok(())
}

pub fn run_method(p: &dyn Problem, cfg: &SolverConfig, method: Method) -> Result<Trace> {
    Ok(match method {
        Method::OptionI | Method::OptionII => run_scdm(p, cfg, method)?,
        Method::Cyclic => run_cyclic_cd(p, cfg)?,
        Method::ProjectedGradient => run_projected_gradient(p, cfg)?,
    })
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build().context("cannot start the worker pool")
}

/// Everything produced by an experiment; traces are kept so the caller can
/// write them.
pub struct Outcome {
    pub report: Report,
    pub traces: Vec<Option<Trace>>,
}

pub fn run(cfg: &ExperimentConfig, command: Command, problem: &BuiltProblem) -> Result<Outcome> {
    let p = problem.as_dyn();
    let method = cfg.solver.method;
    let pool = pool(cfg.output.threads)?;
    let mut gap = None;

    let results: Vec<Result<(Trace, SolverConfig)>> = if command == Command::Gap {
        let (summary, traces) = pool.install(|| gap_experiment(cfg, problem))?;
        gap = Some(summary);
        traces
    } else {
        pool.install(|| {
            cfg.solver
                .seeds
                .par_iter()
                .map(|&seed| {
                    let sc = solver_config(&cfg.solver, p, seed)?;
                    let t = run_method(p, &sc, method)?;
                    Ok((t, sc))
                })
                .collect()
        })
    };

    let verify_opts = VerifyOptions {
        tight_lipschitz: cfg.verify.tight_lipschitz,
        check_every: cfg.verify.check_every,
        ..VerifyOptions::default()
    };
    let reference = if cfg.rates.enabled {
        Some(reference_solve(p, &ReferenceOptions::default())?)
    } else {
        None
    };

    let mut runs = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    let mut weights: Option<WeightVector> = None;
    for (&seed, res) in cfg.solver.seeds.iter().zip(results) {
        match res {
            Ok((trace, sc)) => {
                let mut run = RunReport::from_trace(seed, &trace);
                if cfg.verify.rcfdm {
                    run.certificates.push(check_rcfdm(&trace, p, &sc.weights, &verify_opts)?);
                }
                if cfg.verify.rfdm {
                    run.certificates.push(check_rfdm(&trace, p, &sc.weights, &verify_opts)?);
                }
                if let Some(r) = &reference {
                    run.measured_rate = match measured_rate(&trace, r.f, cfg.rates.tail) {
                        Ok(m) => Some(m),
                        Err(e) => {
                            log::info!("seed {seed}: no measured rate ({e})");
                            None
                        }
                    };
                }
                weights.get_or_insert(sc.weights);
                runs.push(run);
                traces.push(Some(trace));
            }
            Err(e) => {
                log::error!("seed {seed} failed: {e:#}");
                runs.push(RunReport::failed(seed, format!("{e:#}")));
                traces.push(None);
            }
        }
    }

    let rates = match (&reference, &weights) {
        (Some(r), Some(w)) => {
            let ok: Vec<&Trace> = traces.iter().flatten().collect();
            Some(rates_report(cfg, problem, &ok, w, r.x.clone(), r.f)?)
        }
        _ => None,
    };

    let failed_seeds: Vec<u64> = runs.iter().filter(|r| r.error.is_some()).map(|r| r.seed).collect();
    let pass = failed_seeds.is_empty()
        && runs.iter().flat_map(|r| &r.certificates).all(|c| c.pass)
        && rates.as_ref().is_none_or(|r| r.pass)
        && gap.as_ref().is_none_or(|g: &GapSummary| g.pass);
    let report = Report {
        schema_version: 1,
        command: command.name().to_string(),
        config_hash: cfg.hash(),
        generated_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        problem: ProblemSummary::of(p),
        method,
        seeds: cfg.solver.seeds.clone(),
        runs,
        failed_seeds,
        rates,
        gap,
        pass,
    };
    Ok(Outcome { report, traces })
}

/// ω̄ actually used by the runs: the automatic coordinate step is
/// min_i w_i/L_i.
fn omega_bar(schedule: &StepSchedule, method: Method, lipschitz: &[f64], w: &WeightVector) -> f64 {
    match (schedule, method) {
        (StepSchedule::Auto, Method::OptionII) => lipschitz
            .iter()
            .zip(w.as_slice())
            .map(|(l, w)| w / l)
            .fold(f64::INFINITY, f64::min),
        _ => schedule.floor(),
    }
}

fn theory_rate(cfg: &ExperimentConfig, p: &dyn Problem, w: &WeightVector, kappa: f64) -> Result<RateConstants> {
    let n = p.dim();
    let lw = if cfg.verify.tight_lipschitz {
        tight_lipschitz_w(p, w).map_or_else(|| global_lipschitz_bound(p.lipschitz(), w), Ok)?
    } else {
        global_lipschitz_bound(p.lipschitz(), w)?
    };
    let gamma = coord_convexity_modulus(p, w);
    Ok(match cfg.solver.method {
        Method::OptionII => rate_rcfdm_zero_z(kappa, omega_bar(&cfg.solver.omega, Method::OptionII, p.lipschitz(), w), n)?,
        Method::OptionI if cfg.verify.rfdm => {
            let t = rfdm_option1_constants(p.lipschitz(), w, lw, gamma);
            rate_rfdm(kappa, t.zeta, t.beta_sq.sqrt(), 1.0, lw)?
        }
        Method::OptionI => {
            let t = rcfdm_option1_constants(lw, gamma);
            rate_rcfdm_general(kappa, t.zeta, t.beta_sq.sqrt(), 1.0, n, cfg.rates.denominator)?
        }
        m => bail!("no rate theory for {m:?}"),
    })
}

fn rates_report(
    cfg: &ExperimentConfig,
    problem: &BuiltProblem,
    traces: &[&Trace],
    w: &WeightVector,
    x_star: Vec<f64>,
    f_star: f64,
) -> Result<RatesReport> {
    let p = problem.as_dyn();
    if traces.is_empty() {
        bail!("no successful runs to analyse");
    }
    let optimal = problem.optimal_set(x_star);
    let (kappa, kappa_source) = match cfg.rates.kappa {
        Some(k) => (k, "config"),
        None => (pooled_kappa(traces, &optimal, f_star)?, "estimated"),
    };
    let theory = theory_rate(cfg, p, w, kappa)?;
    let x0 = &traces[0].x0;
    let dist_sq = w.dist_sq(x0, &optimal.nearest(x0, w))?;
    let initial = theory.initial_term(traces[0].records[0].f - f_star, dist_sq);

    // Every seed shares x0, so the k-th records line up across runs.
    let common = traces.iter().map(|t| t.records.len()).min().unwrap_or(0);
    let mut worst_ratio = f64::NEG_INFINITY;
    for k in 0..common {
        let gaps: Vec<f64> = traces.iter().map(|t| t.records[k].f - f_star).collect();
        let bound = theory.bound(k, initial);
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(MeanEstimate::from_samples(&gaps).lower_confidence(Z_99) / bound);
        }
    }
    Ok(RatesReport {
        f_star,
        kappa,
        kappa_source: kappa_source.to_string(),
        theory,
        initial,
        worst_ratio,
        pass: worst_ratio <= 1.0 + RATE_SLACK,
    })
}

/// The smallest per-seed estimate: each is an upper estimate of the true
/// modulus along that path, and the bound is monotone in κ.
fn pooled_kappa(traces: &[&Trace], optimal: &OptimalSet, f_star: f64) -> Result<f64> {
    let kappa = traces
        .iter()
        .filter_map(|t| estimate_kappa_f(t, optimal, f_star).ok())
        .map(|k| k.kappa)
        .fold(f64::INFINITY, f64::min);
    if kappa.is_finite() {
        Ok(kappa)
    } else {
        bail!("κ_f could not be estimated from any run; set rates.kappa")
    }
}

type SeedRun = Result<(Trace, SolverConfig)>;

/// Duality-gap experiment on the SVM dual: f* and x* from a reference solve
/// to gap 1e-12, κ_f from pilot runs, then each seed runs Option I to the
/// largest iteration bound with the gap evaluated at every iteration. Runs
/// with the same seed share their path, so the gap at each smaller bound is
/// read from the same trace.
fn gap_experiment(cfg: &ExperimentConfig, problem: &BuiltProblem) -> Result<(GapSummary, Vec<SeedRun>)> {
    let BuiltProblem::Svm(svm) = problem else {
        bail!("the duality-gap experiment needs an SVM dual problem");
    };
    let n = svm.dim();
    let reference = reference_solve(svm, &ReferenceOptions::default())?;
    let ref_gap = reference.gap.unwrap_or(f64::INFINITY);
    if !reference.converged || ref_gap > 1e-12 {
        log::warn!("reference solve stopped at gap {ref_gap:.3e} after {} sweeps", reference.sweeps);
    }
    let f_star = reference.f;
    let x_star = reference.x.clone();
    let base = solver_config(&cfg.solver, svm, 0)?;
    let w = base.weights.clone();

    let kappa = match cfg.rates.kappa {
        Some(k) => k,
        None => {
            let pilot_iters = cfg.gap.pilot_iters.unwrap_or(60 * n);
            let pilot: Vec<Trace> = cfg
                .solver
                .seeds
                .par_iter()
                .map(|&seed| {
                    let mut sc = base.clone();
                    sc.seed = seed.wrapping_add(1_000_000);
                    sc.max_iters = pilot_iters;
                    sc.stop = StopRule::default();
                    sc.record_every = Some(1);
                    run_method(svm, &sc, Method::OptionI)
                })
                .collect::<Result<_>>()?;
            let refs: Vec<&Trace> = pilot.iter().collect();
            pooled_kappa(&refs, &OptimalSet::Point(x_star.clone()), f_star)?
        }
    };
    let sigma_sq = svm_sigma_sq(svm);
    let initial_bound = svm.value(&vec![0.0; n]) - f_star + w.norm_sq(&x_star)?;
    let reports = cfg
        .gap
        .epsilon
        .iter()
        .map(|&eps| sdca_iteration_bound(eps, svm.lambda(), sigma_sq, n, kappa, initial_bound))
        .collect::<Result<Vec<_>, _>>()?;
    let k_max = reports.iter().map(|r| r.k_bound as usize).max().unwrap_or(0);

    let runs: Vec<SeedRun> = cfg
        .solver
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut sc = base.clone();
            sc.seed = seed;
            sc.max_iters = k_max;
            sc.stop = StopRule::default();
            sc.gap_every = Some(1);
            let t = run_method(svm, &sc, Method::OptionI)?;
            Ok((t, sc))
        })
        .collect();
    let ok: Vec<&Trace> = runs.iter().filter_map(|r| r.as_ref().ok().map(|(t, _)| t)).collect();
    if ok.is_empty() {
        bail!("every gap run failed");
    }
    let mean_gap = |k: usize| -> f64 {
        let gaps: Vec<f64> = ok.iter().map(|t| t.records[k].gap.unwrap_or(f64::NAN)).collect();
        MeanEstimate::from_samples(&gaps).mean
    };
    let mut entries = Vec::new();
    for mut r in reports {
        let k = r.k_bound as usize;
        r.observed = (0..=k_max).find(|&j| mean_gap(j) <= r.epsilon);
        let mean = mean_gap(k);
        entries.push(GapEntry {
            pass: mean <= r.epsilon,
            mean_gap_at_bound: mean,
            report: r,
        });
    }
    let summary = GapSummary {
        f_star,
        reference_gap: ref_gap,
        kappa,
        sigma_sq,
        initial_bound,
        pass: entries.iter().all(|e| e.pass),
        entries,
    };
    Ok((summary, runs))
}
