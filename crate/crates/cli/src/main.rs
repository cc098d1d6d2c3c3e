//! Command-line driver for the feasible descent experiments.
//!
//! Exit codes: 0 success, 1 invalid configuration or data, 2 I/O error or
//! a failed run, 3 a certificate, rate or duality-gap check failed.

mod config;
mod experiment;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fdm_core::data::{generate_synthetic, write_libsvm, DataError, GeneratorSpec, Synthetic};

use config::{build_problem, ExperimentConfig, ProblemConfig};
use experiment::Command;

#[derive(Parser)]
#[command(name = "fdm", version, about = "Randomized feasible descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured solver for every seed.
    Solve(RunArgs),
    /// Run and check each trace against the descent certificate.
    Verify(RunArgs),
    /// Run and compare the decrease of f against the linear-rate bound.
    Rates(RunArgs),
    /// Duality-gap iteration bound for the SVM dual.
    Gap(GapArgs),
    /// Write a synthetic dataset, matrix or quadratic.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces solver.seeds; comma-separated or repeated.
    #[arg(long, alias = "seed", value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Output directory, replacing output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Skip row normalization of SVM data (the gap bound then no longer applies).
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args)]
struct GapArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Target gap; repeat for several. Replaces gap.epsilon.
    #[arg(long)]
    epsilon: Vec<f64>,
}

#[derive(Args)]
struct GenArgs {
    /// TOML generator spec, e.g. `generator = "gaussian-margin"`.
    #[arg(long)]
    config: PathBuf,
    /// Datasets are written in libsvm format, matrices as JSON and
    /// quadratics as a `[problem]` TOML table.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn invalid(error: anyhow::Error) -> Failure {
    Failure { code: 1, error }
}

fn io(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

fn is_io(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some() || matches!(c.downcast_ref::<DataError>(), Some(DataError::Io { .. }))
    })
}

fn classify(e: anyhow::Error) -> Failure {
    if is_io(&e) {
        io(e)
    } else {
        invalid(e)
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(classify)?;
    if let Some(s) = &args.seeds {
        cfg.solver.seeds = s.clone();
    }
    if let Some(k) = args.max_iters {
        cfg.solver.max_iters = k;
    }
    if let Some(o) = &args.out {
        cfg.output.dir = o.clone();
    }
    if args.threads.is_some() {
        cfg.output.threads = args.threads;
    }
    if args.no_normalize {
        match &mut cfg.problem {
            ProblemConfig::SvmDual { normalize, .. } | ProblemConfig::Erm { normalize, .. } => *normalize = false,
            _ => return Err(invalid(anyhow::anyhow!("--no-normalize applies to svm-dual and erm problems"))),
        }
    }
    Ok(cfg)
}

fn experiment(command: Command, args: &RunArgs, epsilon: &[f64]) -> Result<u8, Failure> {
    let mut cfg = load_config(args)?;
    if !epsilon.is_empty() {
        cfg.gap.epsilon = epsilon.to_vec();
    }
    let problem = build_problem(&cfg.problem).map_err(classify)?;
    experiment::prepare(&mut cfg, command, &problem).map_err(invalid)?;
    log::info!("{} on {} (dimension {}), config {}", command.name(), problem.as_dyn().name(), problem.as_dyn().dim(), cfg.hash());

    let outcome = experiment::run(&cfg, command, &problem).map_err(io)?;
    report::write_outputs(&cfg.output.dir, &outcome.report, &outcome.traces).map_err(io)?;
    let r = &outcome.report;
    println!(
        "{}: {} of {} runs ok, {} -> {}",
        command.name(),
        r.runs.len() - r.failed_seeds.len(),
        r.runs.len(),
        if r.pass { "pass" } else { "FAIL" },
        cfg.output.dir.join("report.json").display()
    );
    Ok(exit_code(r))
}

fn exit_code(r: &report::Report) -> u8 {
    if !r.failed_seeds.is_empty() {
        2
    } else if !r.pass {
        3
    } else {
        0
    }
}

fn quadratic_toml(q: &fdm_core::problems::QuadraticProblem) -> String {
    let h = q.hessian();
    let rows: Vec<Vec<f64>> = (0..h.nrows()).map(|i| h.row(i).iter().copied().collect()).collect();
    let b = fdm_core::problems::Problem::bounds(q);
    let table = toml::toml! {
        kind = "quadratic"
        h = rows
        c = (q.linear().to_vec())
        lower = (b.lower().to_vec())
        upper = (b.upper().to_vec())
    };
    let mut doc = toml::Table::new();
    doc.insert("problem".into(), toml::Value::Table(table));
    toml::to_string(&doc).expect("quadratic serializes")
}

fn generate(args: &GenArgs) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read {}", args.config.display()))
        .map_err(io)?;
    let mut spec: GeneratorSpec = toml::from_str(&text)
        .with_context(|| format!("invalid generator spec {}", args.config.display()))
        .map_err(invalid)?;
    if let Some(s) = args.seed {
        match &mut spec {
            GeneratorSpec::GaussianMargin { seed, .. } | GeneratorSpec::CorrelatedRows { seed, .. } => *seed = s,
            GeneratorSpec::DiagonalQuadratic { .. } => log::warn!("--seed ignored: diagonal-quadratic is deterministic"),
        }
    }
    let body = match generate_synthetic(&spec).map_err(|e| invalid(e.into()))? {
        Synthetic::Dataset(d) => write_libsvm(&d),
        Synthetic::Matrix(m) => serde_json::to_string_pretty(&serde_json::json!({ "rows": m })).map_err(|e| io(e.into()))? + "\n",
        Synthetic::Quadratic(q) => quadratic_toml(&q),
    };
    write_file(&args.out, &body).map_err(io)?;
    println!("gen: wrote {}", args.out.display());
    Ok(0)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Solve(a) => experiment(Command::Solve, a, &[]),
        Cmd::Verify(a) => experiment(Command::Verify, a, &[]),
        Cmd::Rates(a) => experiment(Command::Rates, a, &[]),
        Cmd::Gap(a) => experiment(Command::Gap, &a.run, &a.epsilon),
        Cmd::Gen(a) => generate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
