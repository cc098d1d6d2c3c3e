//! Experiment configuration: a TOML document with unknown keys rejected.
//!
//! ```toml
//! [problem]
//! kind = "svm-dual"          # svm-dual | lasso | erm | quadratic
//! lambda = 0.1
//! normalize = true           # svm-dual only; off prints a warning
//! [problem.synthetic]        # or: data = "train.libsvm"
//! generator = "gaussian-margin"
//! n = 8
//! d = 10
//! seed = 1
//!
//! [solver]
//! method = "option-i"        # option-i | option-ii | cyclic | projected-gradient
//! weights = "lipschitz"      # lipschitz | ones | [w_1, ..., w_n]
//! omega = { kind = "auto" }  # auto | constant | geometric
//! max_iters = 2000
//! seeds = [0, 1, 2, 3]
//!
//! [verify]
//! rcfdm = true
//!
//! [rates]
//! enabled = true
//!
//! [gap]
//! epsilon = [0.1, 0.01]
//!
//! [output]
//! dir = "out"
//! ```
//!
//! The config hash is the SHA-256 of the canonical JSON form of everything
//! except `[output]`, after command-line overrides are applied.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fdm_core::data::{generate_synthetic, parse_libsvm, Dataset, GeneratorSpec, LabelKind, Synthetic};
use fdm_core::geometry::{Bounds, WeightVector};
use fdm_core::problems::{ErmProblem, LassoBoxProblem, Loss, OptimalSet, Problem, QuadraticProblem, SvmDualProblem};
use fdm_core::rates::Denominator;
use fdm_core::solvers::{Method, SolverConfig, StepSchedule, StopRule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub solver: SolverSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub gap: GapSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    SvmDual {
        data: Option<PathBuf>,
        synthetic: Option<GeneratorSpec>,
        lambda: f64,
        #[serde(default = "yes")]
        normalize: bool,
    },
    /// Rows of the data are the rows of A, labels are b.
    Lasso {
        data: Option<PathBuf>,
        synthetic: Option<GeneratorSpec>,
        lambda: f64,
        q: Option<Vec<f64>>,
    },
    Erm {
        data: Option<PathBuf>,
        synthetic: Option<GeneratorSpec>,
        lambda: f64,
        loss: Loss,
        #[serde(default)]
        normalize: bool,
    },
    /// Explicit `h`, `c` (and optional bounds, default unbounded), or a
    /// `diagonal-quadratic` generator.
    Quadratic {
        h: Option<Vec<Vec<f64>>>,
        c: Option<Vec<f64>>,
        lower: Option<Vec<f64>>,
        upper: Option<Vec<f64>>,
        synthetic: Option<GeneratorSpec>,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedWeights {
    Ones,
    #[default]
    Lipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightChoice {
    Named(NamedWeights),
    Custom(Vec<f64>),
}

impl Default for WeightChoice {
    fn default() -> Self {
        WeightChoice::Named(NamedWeights::Lipschitz)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub method: Method,
    #[serde(default)]
    pub weights: WeightChoice,
    #[serde(default)]
    pub omega: StepSchedule,
    pub max_iters: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub record_every: Option<usize>,
    pub gap_every: Option<usize>,
    #[serde(default)]
    pub stop: StopRule,
    pub x0: Option<Vec<f64>>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Per-coordinate certificate (random coordinate methods).
    #[serde(default)]
    pub rcfdm: bool,
    /// Full-vector certificate (Option I on unconstrained problems).
    #[serde(default)]
    pub rfdm: bool,
    #[serde(default)]
    pub tight_lipschitz: bool,
    pub check_every: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    #[serde(default)]
    pub enabled: bool,
    /// Number of trailing records used for the measured rate.
    pub tail: Option<usize>,
    #[serde(default)]
    pub denominator: Denominator,
    /// Use this κ_f instead of estimating it from the traces.
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSection {
    #[serde(default)]
    pub epsilon: Vec<f64>,
    /// Iterations per seed of the runs κ_f is estimated from (default 60n).
    pub pilot_iters: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Worker threads for per-seed runs; defaults to the number of cores.
    pub threads: Option<usize>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads the config and resolves relative data paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let ProblemConfig::SvmDual { data: Some(p), .. }
        | ProblemConfig::Lasso { data: Some(p), .. }
        | ProblemConfig::Erm { data: Some(p), .. } = &mut cfg.problem
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        if s.seeds.is_empty() {
            bail!("solver.seeds is empty");
        }
        if s.record_every == Some(0) || s.gap_every == Some(0) {
            bail!("record_every and gap_every must be positive");
        }
        if (self.verify.rcfdm || self.verify.rfdm) && !s.method.is_random() {
            bail!("certificates apply to random coordinate methods only, not {:?}", s.method);
        }
        if self.verify.rfdm && s.method != Method::OptionI {
            bail!("the full-vector certificate needs method = \"option-i\"");
        }
        if self.gap.epsilon.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            bail!("gap.epsilon values must be positive");
        }
        match &self.problem {
            ProblemConfig::SvmDual { lambda, .. }
            | ProblemConfig::Lasso { lambda, .. }
            | ProblemConfig::Erm { lambda, .. } => {
                if !(*lambda >= 0.0 && lambda.is_finite()) {
                    bail!("lambda must be nonnegative");
                }
            }
            ProblemConfig::Quadratic { .. } => {}
        }
        Ok(())
    }
}

/// A built problem, kept concrete where the experiment needs more than
/// the `Problem` interface.
pub enum BuiltProblem {
    Svm(SvmDualProblem),
    Lasso(LassoBoxProblem),
    Erm(ErmProblem),
    Quadratic(QuadraticProblem),
}

impl BuiltProblem {
    pub fn as_dyn(&self) -> &dyn Problem {
        match self {
            BuiltProblem::Svm(p) => p,
            BuiltProblem::Lasso(p) => p,
            BuiltProblem::Erm(p) => p,
            BuiltProblem::Quadratic(p) => p,
        }
    }

    pub fn optimal_set(&self, x_star: Vec<f64>) -> OptimalSet {
        match self {
            BuiltProblem::Quadratic(q) => q.optimal_set(x_star),
            _ => OptimalSet::Point(x_star),
        }
    }
}

fn load_dataset(data: &Option<PathBuf>, synthetic: &Option<GeneratorSpec>, kind: LabelKind) -> Result<Dataset> {
    match (data, synthetic) {
        (Some(path), None) => Ok(parse_libsvm(path, kind)?),
        (None, Some(spec)) => match generate_synthetic(spec)? {
            Synthetic::Dataset(d) => Ok(d),
            _ => bail!("generator {spec:?} does not produce a labelled dataset"),
        },
        _ => bail!("give exactly one of `data` and `synthetic`"),
    }
}

pub fn build_problem(cfg: &ProblemConfig) -> Result<BuiltProblem> {
    Ok(match cfg {
        ProblemConfig::SvmDual {
            data,
            synthetic,
            lambda,
            normalize,
        } => {
            let mut d = load_dataset(data, synthetic, LabelKind::Classification)?;
            if *normalize {
                d.normalize_rows();
            } else {
                log::warn!(
                    "row normalization is OFF: the duality-gap bound assumes every ‖a_i‖ ≤ 1 (max row norm here is {:.4})",
                    d.max_row_norm()
                );
            }
            BuiltProblem::Svm(SvmDualProblem::new(&d, *lambda)?)
        }
        ProblemConfig::Lasso {
            data,
            synthetic,
            lambda,
            q,
        } => {
            let d = load_dataset(data, synthetic, LabelKind::Regression)?;
            let rows = d.dense();
            let q = q.clone().unwrap_or_else(|| vec![0.0; d.n_features]);
            BuiltProblem::Lasso(LassoBoxProblem::new(&rows, d.labels.clone(), q, *lambda)?)
        }
        ProblemConfig::Erm {
            data,
            synthetic,
            lambda,
            loss,
            normalize,
        } => {
            let kind = match loss {
                Loss::Squared => LabelKind::Regression,
                _ => LabelKind::Classification,
            };
            let mut d = load_dataset(data, synthetic, kind)?;
            if *normalize {
                d.normalize_rows();
            }
            BuiltProblem::Erm(ErmProblem::new(&d.dense(), d.labels.clone(), *lambda, *loss)?)
        }
        ProblemConfig::Quadratic {
            h,
            c,
            lower,
            upper,
            synthetic,
        } => match (h, c, synthetic) {
            (Some(h), Some(c), None) => {
                let n = c.len();
                let bounds = Bounds::new(
                    lower.clone().unwrap_or_else(|| vec![f64::NEG_INFINITY; n]),
                    upper.clone().unwrap_or_else(|| vec![f64::INFINITY; n]),
                )?;
                BuiltProblem::Quadratic(QuadraticProblem::new(h.clone(), c.clone(), bounds)?)
            }
            (None, None, Some(spec)) => match generate_synthetic(spec)? {
                Synthetic::Quadratic(q) if lower.is_none() && upper.is_none() => BuiltProblem::Quadratic(q),
                Synthetic::Quadratic(_) => bail!("bounds come from the generator; drop `lower`/`upper`"),
                _ => bail!("generator {spec:?} does not produce a quadratic"),
            },
            _ => bail!("give either `h` and `c`, or `synthetic`"),
        },
    })
}

/// Solver settings for one seed.
pub fn solver_config(s: &SolverSection, p: &dyn Problem, seed: u64) -> Result<SolverConfig> {
    let weights = match &s.weights {
        WeightChoice::Named(NamedWeights::Ones) => WeightVector::ones(p.dim()),
        WeightChoice::Named(NamedWeights::Lipschitz) => WeightVector::new(p.lipschitz().to_vec())?,
        WeightChoice::Custom(w) => {
            if w.len() != p.dim() {
                bail!("solver.weights has {} entries, the problem has dimension {}", w.len(), p.dim());
            }
            WeightVector::new(w.clone())?
        }
    };
    let mut cfg = SolverConfig::new(weights, s.max_iters, seed);
    cfg.omega = s.omega;
    cfg.stop = s.stop;
    cfg.record_every = s.record_every;
    cfg.gap_every = s.gap_every;
    cfg.x0 = s.x0.clone();
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SVM: &str = r#"
[problem]
kind = "svm-dual"
lambda = 0.1
[problem.synthetic]
generator = "gaussian-margin"
n = 6
d = 8
seed = 3

[solver]
method = "option-i"
max_iters = 100
seeds = [1, 2]
"#;

    #[test]
    fn parses_minimal_svm_config() {
        let cfg = ExperimentConfig::from_toml(SVM).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.solver.weights, WeightChoice::Named(NamedWeights::Lipschitz));
        assert!(matches!(cfg.problem, ProblemConfig::SvmDual { normalize: true, .. }));
        let p = build_problem(&cfg.problem).unwrap();
        assert_eq!(p.as_dyn().dim(), 6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for extra in ["\n[verify]\nrcfdm = true\ncolour = 1\n", "\n[extra]\nx = 1\n"] {
            let text = format!("{SVM}{extra}");
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{extra}");
        }
        let typo = SVM.replace("lambda = 0.1", "lambda = 0.1\nlamda = 0.2");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
    }

    #[test]
    fn hash_ignores_output_but_not_semantics() {
        let a = ExperimentConfig::from_toml(SVM).unwrap();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        b.output.threads = Some(3);
        assert_eq!(a.hash(), b.hash());
        b.solver.seeds = vec![1, 3];
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn weight_choices() {
        let custom = SVM.replace("max_iters = 100", "max_iters = 100\nweights = [1, 2, 3, 4, 5, 6]");
        let cfg = ExperimentConfig::from_toml(&custom).unwrap();
        assert_eq!(cfg.solver.weights, WeightChoice::Custom(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let p = build_problem(&cfg.problem).unwrap();
        let sc = solver_config(&cfg.solver, p.as_dyn(), 0).unwrap();
        assert_eq!(sc.weights.as_slice()[5], 6.0);
        let short = SVM.replace("max_iters = 100", "max_iters = 100\nweights = [1, 2]");
        let cfg = ExperimentConfig::from_toml(&short).unwrap();
        assert!(solver_config(&cfg.solver, build_problem(&cfg.problem).unwrap().as_dyn(), 0).is_err());
    }

    #[test]
    fn quadratic_with_infinite_bounds() {
        let text = r#"
[problem]
kind = "quadratic"
h = [[2.0, 0.0], [0.0, 1.0]]
c = [-1.0, 1.0]
lower = [0.0, -inf]

[solver]
method = "cyclic"
max_iters = 5
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let p = build_problem(&cfg.problem).unwrap();
        assert_eq!(p.as_dyn().bounds().upper()[0], f64::INFINITY);
    }

    #[test]
    fn certificates_need_random_methods() {
        let text = SVM.replace("option-i", "cyclic") + "\n[verify]\nrcfdm = true\n";
        assert!(ExperimentConfig::from_toml(&text).unwrap().validate().is_err());
    }
}
