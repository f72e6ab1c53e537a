//! Experiment configuration (JSON).
//!
//! Unknown keys are rejected, and every offending field is reported at once.
//!
//! ```json
//! {
//!   "matrices": [
//!     { "name": "pendulum", "file": "pendulum.csv", "multitask": 0.61 },
//!     { "name": "smooth", "generator": { "kind": "gp_sample", "n": 100,
//!       "length_scale": 0.2, "field_scale": 0.3, "theta_true": 0.5 },
//!       "replicas": 20 }
//!   ],
//!   "strategies": [{ "kind": "random" }, { "kind": "gp", "acquisition": "ei" }],
//!   "budget": 15,
//!   "seeds": [0, 1, 2]
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::acquisition::{AcquisitionKind, BetaSchedule};
use crate::engine::{RunConfig, ThetaMode, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::gp::HyperGrid;
use crate::io::read_matrix;
use crate::landscape::{generate, GeneratorSpec};
use crate::matrix::TransferMatrix;
use crate::strategies::{AcquisitionSpec, StrategySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSource {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    /// Generator only: expand into this many landscapes with consecutive
    /// seeds.
    #[serde(default = "one")]
    pub replicas: usize,
    /// Externally measured multitask score for this task.
    #[serde(default)]
    pub multitask: Option<f64>,
    /// Min-max rescale every target column, even for matrices already in
    /// `[0, 1]`.
    #[serde(default)]
    pub rescale_per_target: bool,
}

fn one() -> usize {
    1
}

impl MatrixSource {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        Self {
            name: None,
            file: Some(path.into()),
            generator: None,
            replicas: 1,
            multitask: None,
            rescale_per_target: false,
        }
    }

    pub fn generator(spec: GeneratorSpec) -> Self {
        Self {
            name: None,
            file: None,
            generator: Some(spec),
            replicas: 1,
            multitask: None,
            rescale_per_target: false,
        }
    }

    fn prepare(&self, matrix: TransferMatrix) -> Result<TransferMatrix> {
        if self.rescale_per_target {
            matrix.rescale_per_target()
        } else {
            Ok(matrix)
        }
    }
}

/// A matrix ready to run, with its report metadata.
#[derive(Debug, Clone)]
pub struct Task {
    pub name: String,
    pub matrix: TransferMatrix,
    pub multitask: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub matrices: Vec<MatrixSource>,
    pub strategies: Vec<StrategySpec>,
    pub budget: usize,
    pub delta: f64,
    pub epsilon: Option<f64>,
    /// Overrides the schedule of every GP strategy.
    pub beta: Option<BetaSchedule>,
    /// Overrides the acquisition of every GP strategy.
    pub acquisition: Option<AcquisitionKind>,
    /// Overrides the GP hyperparameter grid everywhere.
    pub gp_grid: Option<HyperGrid>,
    pub theta: ThetaMode,
    pub seeds: Vec<u64>,
    pub normalize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            matrices: Vec::new(),
            strategies: vec![
                StrategySpec::Random,
                StrategySpec::Greedy,
                StrategySpec::Equidistant,
                StrategySpec::Gp(AcquisitionSpec::default()),
            ],
            budget: DEFAULT_BUDGET,
            delta: 0.1,
            epsilon: None,
            beta: None,
            acquisition: None,
            gp_grid: None,
            theta: ThetaMode::Fit,
            seeds: vec![0],
            normalize: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text)?;
        let config: Self =
            serde_json::from_value(raw.clone()).map_err(|e| Error::Schema(vec![e.to_string()]))?;
        let known = serde_json::to_value(&config)?;
        let mut problems = Vec::new();
        unknown_keys(&raw, &known, "", &mut problems);
        problems.extend(config.problems());
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(Error::Schema(problems))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut config = Self::from_json(&std::fs::read_to_string(path)?)?;
        // matrix paths are relative to the config file
        if let Some(dir) = path.parent() {
            for m in &mut config.matrices {
                if let Some(f) = &mut m.file {
                    if f.is_relative() {
                        *f = dir.join(&*f);
                    }
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema(problems))
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.strategies.is_empty() {
            out.push("strategies: must list at least one strategy".into());
        }
        if self.budget == 0 {
            out.push("budget: must be >= 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            out.push(format!("delta: must lie in (0, 1), got {}", self.delta));
        }
        if let Some(e) = self.epsilon {
            if !(0.0..=1.0).contains(&e) {
                out.push(format!("epsilon: must lie in [0, 1], got {e}"));
            }
        }
        if let Some(b) = &self.beta {
            if let Err(e) = b.validate() {
                out.push(format!("beta: {e}"));
            }
        }
        if let Some(g) = &self.gp_grid {
            if let Err(e) = g.validate() {
                out.push(format!("gp_grid: {e}"));
            }
        }
        if let ThetaMode::Fixed(t) = self.theta {
            if !(t >= 0.0 && t.is_finite()) {
                out.push(format!("theta: fixed slope must be >= 0, got {t}"));
            }
        }
        if self.seeds.is_empty() {
            out.push("seeds: must list at least one seed".into());
        }
        for (i, m) in self.matrices.iter().enumerate() {
            match (&m.file, &m.generator) {
                (Some(_), Some(_)) | (None, None) => {
                    out.push(format!("matrices[{i}]: give exactly one of 'file' or 'generator'"))
                }
                (None, Some(g)) => {
                    if let Err(e) = g.validate() {
                        out.push(format!("matrices[{i}].generator: {e}"));
                    }
                    if g.n < self.budget {
                        out.push(format!(
                            "matrices[{i}].generator.n: budget {} exceeds {} contexts",
                            self.budget, g.n
                        ));
                    }
                }
                (Some(_), None) if m.replicas != 1 => {
                    out.push(format!("matrices[{i}].replicas: only generators can be replicated"))
                }
                _ => {}
            }
            if m.replicas == 0 {
                out.push(format!("matrices[{i}].replicas: must be >= 1"));
            }
        }
        out
    }

    /// Strategies with the global GP overrides applied.
    pub fn resolved_strategies(&self) -> Vec<StrategySpec> {
        self.strategies
            .iter()
            .map(|s| match s {
                StrategySpec::Gp(acq) => {
                    let mut acq = acq.clone();
                    if let Some(b) = self.beta {
                        acq.beta = b;
                    }
                    if let Some(k) = self.acquisition {
                        acq.kind = k;
                    }
                    if let Some(g) = &self.gp_grid {
                        acq.grid = g.clone();
                    }
                    StrategySpec::Gp(acq)
                }
                other => other.clone(),
            })
            .collect()
    }

    pub fn run_config(&self, strategy: StrategySpec, seed: u64) -> RunConfig {
        let mut rc = RunConfig::new(strategy, self.budget, seed);
        rc.epsilon = self.epsilon;
        rc.theta = self.theta;
        rc.delta = self.delta;
        rc.normalize = self.normalize;
        if let Some(g) = &self.gp_grid {
            rc.bound_grid = g.clone();
        }
        rc
    }

    /// Load or generate every matrix, expanding replicas.
    pub fn tasks(&self) -> Result<Vec<Task>> {
        let mut out = Vec::new();
        for (i, src) in self.matrices.iter().enumerate() {
            if let Some(path) = &src.file {
                let (matrix, meta) = read_matrix(path)?;
                let matrix = src.prepare(matrix)?;
                let name = src
                    .name
                    .clone()
                    .or(meta.map(|m| m.name))
                    .unwrap_or_else(|| path.file_stem().map_or(format!("task{i}"), |s| s.to_string_lossy().into()));
                out.push(Task {
                    name,
                    matrix,
                    multitask: src.multitask,
                });
            } else if let Some(spec) = &src.generator {
                let base = src.name.clone().unwrap_or_else(|| format!("task{i}"));
                for r in 0..src.replicas {
                    let mut spec = spec.clone();
                    spec.seed = spec.seed.wrapping_add(r as u64);
                    let name = if src.replicas == 1 {
                        base.clone()
                    } else {
                        format!("{base}-{r}")
                    };
                    out.push(Task {
                        name,
                        matrix: src.prepare(generate(&spec)?)?,
                        multitask: src.multitask,
                    });
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Schema(vec!["matrices: no matrix source given".into()]));
        }
        Ok(out)
    }
}

/// Paths present in `raw` but absent from the re-serialized config.
fn unknown_keys(raw: &Value, known: &Value, path: &str, out: &mut Vec<String>) {
    match (raw, known) {
        (Value::Object(r), Value::Object(k)) => {
            for (key, value) in r {
                let child = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                match k.get(key) {
                    Some(kv) => unknown_keys(value, kv, &child, out),
                    None => out.push(format!("{child}: unknown field")),
                }
            }
        }
        (Value::Array(r), Value::Array(k)) => {
            for (i, (rv, kv)) in r.iter().zip(k).enumerate() {
                unknown_keys(rv, kv, &format!("{path}[{i}]"), out);
            }
        }
        _ => {}
    }
}
