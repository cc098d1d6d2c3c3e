//! Stochastic coordinate descent (exact and gradient variants), cyclic
//! coordinate descent and projected gradient descent.
//!
//! Coordinates are drawn with `ChaCha8Rng::seed_from_u64(seed)`, one
//! `random_range(0..n)` per iteration, so the coordinate sequence of a seed
//! does not depend on how often the trace is recorded.

mod reference;
mod run;
mod trace;

pub use reference::{reference_solve, ReferenceOptions, ReferenceSolution};
pub use run::{run_cyclic_cd, run_projected_gradient, run_scdm, scdm_step_option1, scdm_step_option2};
pub use trace::{Record, Step, Termination, Trace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, WeightVector};
use crate::problems::ProblemError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("objective increased on two consecutive iterations ending at k = {k} (f = {f:e})")]
    Diverged { k: usize, f: f64 },
    #[error("non-finite objective at iteration {k}")]
    NonFinite { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Random coordinate, exact minimization of the slice.
    OptionI,
    /// Random coordinate, projected step x_i − (ω_k/w_i)∇_i f(x).
    #[serde(rename = "option-ii")]
    OptionII,
    Cyclic,
    ProjectedGradient,
}

impl Method {
    pub fn is_random(self) -> bool {
        matches!(self, Method::OptionI | Method::OptionII)
    }
}

/// Step sizes ω_k.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StepSchedule {
    /// min_i w_i/L_i for the coordinate gradient step, 1/Σ L_i/w_i for
    /// projected gradient, 1 for the exact methods (which ignore ω).
    #[default]
    Auto,
    Constant { omega: f64 },
    /// ω_k = max(floor, initial · ratio^k)
    Geometric { initial: f64, ratio: f64, floor: f64 },
}

impl StepSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Auto => 1.0,
            StepSchedule::Constant { omega } => omega,
            StepSchedule::Geometric {
                initial,
                ratio,
                floor,
            } => (initial * ratio.powf(k as f64)).max(floor),
        }
    }

    /// ω̄ = inf_k ω_k.
    pub fn floor(&self) -> f64 {
        match *self {
            StepSchedule::Auto => 1.0,
            StepSchedule::Constant { omega } => omega,
            StepSchedule::Geometric { initial, ratio, floor } => {
                if ratio < 1.0 {
                    floor
                } else {
                    initial.max(floor)
                }
            }
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        let ok = match *self {
            StepSchedule::Auto => true,
            StepSchedule::Constant { omega } => omega > 0.0 && omega.is_finite(),
            StepSchedule::Geometric { initial, ratio, floor } => {
                initial.is_finite()
                    && floor > 0.0
                    && floor <= initial
                    && ratio > 0.0
                    && ratio <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidConfig(format!("invalid step schedule {self:?}")))
        }
    }
}

/// Early termination; the iteration budget always applies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    /// Stop once the duality gap is at most this value.
    pub gap: Option<f64>,
    /// Stop when f drops by at most `stall · (1 + |f|)` over one recording window.
    pub stall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub weights: WeightVector,
    pub omega: StepSchedule,
    pub max_iters: usize,
    pub seed: u64,
    pub stop: StopRule,
    /// Checkpoint interval in iterations; `None` means n (1 for cyclic and
    /// projected gradient, whose iterations are full sweeps).
    pub record_every: Option<usize>,
    /// Duality-gap evaluation interval in iterations; `None` means
    /// `record_every`. The gap is always evaluated at the first and last
    /// iterate.
    pub gap_every: Option<usize>,
    /// Start point; `None` means the projection of 0 onto the box.
    pub x0: Option<Vec<f64>>,
}

impl SolverConfig {
    pub fn new(weights: WeightVector, max_iters: usize, seed: u64) -> Self {
        Self {
            weights,
            omega: StepSchedule::Auto,
            max_iters,
            seed,
            stop: StopRule::default(),
            record_every: None,
            gap_every: None,
            x0: None,
        }
    }
}
