//! report.json and the per-seed trace CSV files.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use fdm_core::problems::Problem;
use fdm_core::rates::{GapReport, MeasuredRate, RateConstants};
use fdm_core::solvers::{Method, Termination, Trace};
use fdm_core::verify::Certificate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub generated_unix: u64,
    pub problem: ProblemSummary,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunReport>,
    pub failed_seeds: Vec<u64>,
    pub rates: Option<RatesReport>,
    pub gap: Option<GapSummary>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub name: String,
    pub dim: usize,
    pub bounded: bool,
    pub max_lipschitz: f64,
}

impl ProblemSummary {
    pub fn of(p: &dyn Problem) -> Self {
        Self {
            name: p.name().to_string(),
            dim: p.dim(),
            bounded: !p.bounds().is_unbounded(),
            max_lipschitz: p.lipschitz().iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub iterations: Option<usize>,
    pub final_f: Option<f64>,
    pub final_gap: Option<f64>,
    pub termination: Option<Termination>,
    /// Relative to the report's directory.
    pub trace_file: Option<String>,
    pub certificates: Vec<Certificate>,
    pub measured_rate: Option<MeasuredRate>,
}

impl RunReport {
    pub fn from_trace(seed: u64, t: &Trace) -> Self {
        Self {
            seed,
            status: RunStatus::Ok,
            error: None,
            iterations: Some(t.iterations()),
            final_f: Some(t.final_f()),
            final_gap: t.records.last().and_then(|r| r.gap),
            termination: Some(t.termination),
            trace_file: Some(trace_file_name(seed)),
            certificates: Vec::new(),
            measured_rate: None,
        }
    }

    pub fn failed(seed: u64, error: String) -> Self {
        Self {
            seed,
            status: RunStatus::Failed,
            error: Some(error),
            iterations: None,
            final_f: None,
            final_gap: None,
            termination: None,
            trace_file: None,
            certificates: Vec::new(),
            measured_rate: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatesReport {
    pub f_star: f64,
    pub kappa: f64,
    /// "config" or "estimated".
    pub kappa_source: String,
    pub theory: RateConstants,
    /// The k = 0 value the theoretical bound is scaled by.
    pub initial: f64,
    /// max over k of (mean − z₀.₉₉·se of f(x_k) − f*) / bound(k).
    pub worst_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapEntry {
    #[serde(flatten)]
    pub report: GapReport,
    pub mean_gap_at_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapSummary {
    pub f_star: f64,
    pub reference_gap: f64,
    pub kappa: f64,
    pub sigma_sq: f64,
    pub initial_bound: f64,
    pub entries: Vec<GapEntry>,
    pub pass: bool,
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace_seed{seed}.csv")
}

pub const TRACE_HEADER: [&str; 5] = ["k", "i_k", "f", "disp_w_sq", "gap"];

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per record; quantities that do not apply are empty cells.
pub fn write_trace_csv<W: Write>(t: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &t.records {
        w.write_record([
            r.k.to_string(),
            r.coord.map(|i| i.to_string()).unwrap_or_default(),
            float(r.f),
            r.disp_w_sq.map(float).unwrap_or_default(),
            r.gap.map(float).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the traces and report.json into `dir`.
pub fn write_outputs(dir: &Path, report: &Report, traces: &[Option<Trace>]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for (run, trace) in report.runs.iter().zip(traces) {
        if let Some(t) = trace {
            let path = dir.join(trace_file_name(run.seed));
            let file = std::fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
            write_trace_csv(t, std::io::BufWriter::new(file))?;
        }
    }
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
