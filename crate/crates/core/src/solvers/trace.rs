use serde::{Deserialize, Serialize};

use super::{Method, StepSchedule};

/// One primitive update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Step {
    /// x_i ← value.
    Coordinate { i: usize, value: f64 },
    /// x ← the stored vector.
    Full(Vec<f64>),
}

/// Per-iteration summary. `coord` and `disp_w_sq` describe the move from
/// x_k to x_{k+1} and are absent on the final record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub k: usize,
    pub coord: Option<usize>,
    pub f: f64,
    pub disp_w_sq: Option<f64>,
    pub gap: Option<f64>,
    /// Seconds since the start of the run.
    pub elapsed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Budget,
    GapReached,
    Stalled,
}

/// The recorded iterate sequence of one run.
///
/// Every primitive update is kept in `steps`; full iterates are stored only
/// at `checkpoints`, every `record_every` iterations. Iteration k consists of
/// steps `k * steps_per_iter .. (k + 1) * steps_per_iter`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub method: Method,
    pub problem: String,
    pub seed: u64,
    pub config_hash: Option<String>,
    pub weights: Vec<f64>,
    pub omega: StepSchedule,
    pub steps_per_iter: usize,
    pub record_every: usize,
    pub x0: Vec<f64>,
    pub steps: Vec<Step>,
    /// (iteration, x at that iteration)
    pub checkpoints: Vec<(usize, Vec<f64>)>,
    pub records: Vec<Record>,
    pub termination: Termination,
}

impl Trace {
    /// Number of completed iterations.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_f(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.f)
    }

    pub fn final_x(&self) -> Vec<f64> {
        self.iterate(self.iterations())
    }

    /// x_k, rebuilt from the nearest checkpoint at or before k.
    pub fn iterate(&self, k: usize) -> Vec<f64> {
        assert!(k <= self.iterations(), "iteration {k} is beyond the trace");
        let (start, mut x) = self
            .checkpoints
            .iter()
            .rev()
            .find(|(it, _)| *it <= k)
            .map_or((0, self.x0.clone()), |(it, x)| (*it, x.clone()));
        for step in &self.steps[start * self.steps_per_iter..k * self.steps_per_iter] {
            apply(&mut x, step);
        }
        x
    }

    /// Calls `visit(k, x_k, x_{k+1})` for every iteration in order.
    pub fn for_each_iteration(&self, mut visit: impl FnMut(usize, &[f64], &[f64])) {
        let mut x = self.x0.clone();
        let mut next = x.clone();
        for k in 0..self.iterations() {
            for step in &self.steps[k * self.steps_per_iter..(k + 1) * self.steps_per_iter] {
                apply(&mut next, step);
            }
            visit(k, &x, &next);
            x.clone_from(&next);
        }
    }

    /// Equality of everything except wall-clock timings.
    pub fn same_path(&self, other: &Trace) -> bool {
        let strip = |t: &Trace| {
            let mut t = t.clone();
            t.records.iter_mut().for_each(|r| r.elapsed = 0.0);
            t
        };
        strip(self) == strip(other)
    }
}

pub(crate) fn apply(x: &mut Vec<f64>, step: &Step) {
    match step {
        Step::Coordinate { i, value } => x[*i] = *value,
        Step::Full(v) => x.clone_from(v),
    }
}
