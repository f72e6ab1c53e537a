//! The selection loop: pick a source, reveal its row, update the best-so-far
//! vector, and record regret quantities, until the budget, the candidate
//! pool, or the suboptimality target runs out.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::BetaSchedule;
use crate::error::{Error, Result};
use crate::gap_model::LinearGapModel;
use crate::gp::{information_gain, select_hyperparams, HyperGrid};
use crate::matrix::TransferMatrix;
use crate::regret::{
    bound_thm1, bound_thm2, c1, largest_segment, reduced_space, regret_step, true_g, RegretStep,
};
use crate::state::SelectionState;
use crate::strategies::{Selector, StrategySpec};

/// Default transfer budget.
pub const DEFAULT_BUDGET: usize = 15;

/// How the gap slope is obtained at each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMode {
    /// Refit from every revealed row after each step; prior `1 / span`
    /// before any data.
    #[default]
    Fit,
    Fixed(f64),
}

impl ThetaMode {
    pub fn model(&self, matrix: &TransferMatrix, trained: &[usize]) -> Result<LinearGapModel> {
        match *self {
            ThetaMode::Fit => Ok(LinearGapModel::fit_from_rows(matrix, trained)),
            ThetaMode::Fixed(theta) => LinearGapModel::fixed(theta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub strategy: StrategySpec,
    pub budget: usize,
    /// Stop once `V >= (1 - epsilon) * oracle`.
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub theta: ThetaMode,
    /// Confidence parameter of the bound schedule `beta_k`.
    pub delta: f64,
    /// Grid for the hyperparameters behind the bound's `gamma_K` and noise.
    pub bound_grid: HyperGrid,
    /// Per-target min-max normalize raw matrices before running.
    pub normalize: bool,
}

impl RunConfig {
    pub fn new(strategy: StrategySpec, budget: usize, seed: u64) -> Self {
        Self {
            strategy,
            budget,
            epsilon: None,
            seed,
            theta: ThetaMode::Fit,
            delta: 0.1,
            bound_grid: HyperGrid::default(),
            normalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget K must be >= 1".into()));
        }
        if let Some(eps) = self.epsilon {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::Config(format!("epsilon must lie in [0, 1], got {eps}")));
            }
        }
        if let ThetaMode::Fixed(t) = self.theta {
            LinearGapModel::fixed(t)?;
        }
        BetaSchedule::PaperLog { delta: self.delta }.validate()?;
        self.bound_grid.validate()
    }
}

/// Why a run ended. Exactly one reason is recorded per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    Exhausted,
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub k: usize,
    pub chosen: usize,
    pub chosen_context: f64,
    pub j_obs: f64,
    pub v: f64,
    pub theta: f64,
    pub regret: RegretStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub strategy: String,
    pub seed: u64,
    pub steps: Vec<TraceStep>,
    pub stop: StopReason,
    pub oracle_value: f64,
    pub exhaustive_value: f64,
}

impl RunTrace {
    pub fn final_v(&self) -> Option<f64> {
        self.steps.last().map(|s| s.v)
    }

    pub fn picks(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.chosen).collect()
    }

    pub fn regret_trace(&self) -> Vec<RegretStep> {
        self.steps.iter().map(|s| s.regret.clone()).collect()
    }
}

/// `V >= (1 - epsilon) * oracle`.
pub fn check_termination(v: f64, epsilon: f64, oracle_v: f64) -> bool {
    v >= (1.0 - epsilon) * oracle_v
}

/// Run one selection sequence on `matrix`.
pub fn run(matrix: &TransferMatrix, config: &RunConfig) -> Result<RunTrace> {
    config.validate()?;
    let normalized;
    let matrix = if matrix.is_normalized() {
        matrix
    } else if config.normalize {
        normalized = matrix.normalize()?;
        &normalized
    } else {
        return Err(Error::Config(
            "matrix is not normalized; enable normalization to run on raw rewards".into(),
        ));
    };

    let space = matrix.space();
    let n = matrix.n();
    let g = true_g(matrix);
    let oracle = matrix.oracle_value();
    let beta_schedule = BetaSchedule::PaperLog { delta: config.delta };
    let mut selector = Selector::new(config.strategy.clone(), config.budget, config.seed)?;
    let mut state = SelectionState::new(n);
    let mut steps = Vec::with_capacity(config.budget.min(n));
    let mut cumulative = 0.0;
    let mut reduced_fracs = Vec::with_capacity(config.budget.min(n));
    let mut stop = StopReason::Budget;

    for k in 1..=config.budget {
        if state.untrained().next().is_none() {
            stop = StopReason::Exhausted;
            break;
        }
        let gap = config.theta.model(matrix, state.trained())?;
        let pick = selector.next(&state, &gap, space)?;
        let reduced = reduced_space(&state, &gap, pick.index, pick.j_hat, space);
        reduced_fracs.push(reduced.len() as f64 / n as f64);
        state.update_best(matrix, pick.index)?;

        let r_k = regret_step(&g, pick.index);
        cumulative += r_k;
        let beta_k = beta_schedule.beta(k, n)?;
        let (xs, ys) = state.observations(space.values());
        let hyper = select_hyperparams(&xs, &ys, &config.bound_grid, space.span());
        selector.offer_hyperparams(xs.len(), &config.bound_grid, hyper);
        let gamma_k = information_gain(&hyper.kernel, hyper.noise_std, &xs)?;
        let c1 = c1(hyper.noise_std)?;
        let v = *state.v_history().last().expect("just updated");
        steps.push(TraceStep {
            k,
            chosen: pick.index,
            chosen_context: space.value(pick.index),
            j_obs: matrix.training_performance(pick.index),
            v,
            theta: gap.theta,
            regret: RegretStep {
                k,
                r_k,
                cumulative,
                beta_k,
                gamma_k,
                noise_std: hyper.noise_std,
                bound_thm1: bound_thm1(k, beta_k, gamma_k, hyper.noise_std)?,
                bound_thm2: bound_thm2(&reduced_fracs, c1, beta_k, gamma_k),
                largest_segment_frac: largest_segment(state.trained(), space) / space.span(),
                reduced_space_frac: reduced.len() as f64 / n as f64,
            },
        });

        // reaching the target on the last budgeted step still counts as budget
        let converged = config.epsilon.is_some_and(|eps| check_termination(v, eps, oracle));
        if converged && k < config.budget {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok(RunTrace {
        strategy: config.strategy.name().to_string(),
        seed: config.seed,
        steps,
        stop,
        oracle_value: oracle,
        exhaustive_value: matrix.exhaustive_value(),
    })
}

/// Run many configurations on one shared matrix in parallel. Output order
/// follows input order.
pub fn run_many(matrix: &TransferMatrix, configs: &[RunConfig]) -> Result<Vec<RunTrace>> {
    configs.par_iter().map(|c| run(matrix, c)).collect()
}

/// Mean and sample standard deviation (n - 1 denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }

    /// A single observation reports zero spread.
    pub fn single_run(&self) -> bool {
        self.n == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub k: usize,
    pub v: Stat,
    pub cumulative_regret: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub strategy: String,
    pub steps: Vec<StepSummary>,
    pub warnings: Vec<String>,
}

impl Aggregate {
    pub fn final_step(&self) -> Option<&StepSummary> {
        self.steps.last()
    }
}

/// Per-step mean/std across runs of one strategy. Runs of unequal length are
/// aligned on the shortest, with a warning.
pub fn aggregate(traces: &[RunTrace]) -> Result<Aggregate> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Input("nothing to aggregate".into()))?;
    let mut warnings = Vec::new();
    if traces.iter().any(|t| t.strategy != first.strategy) {
        warnings.push("traces mix strategies".to_string());
    }
    let len = traces.iter().map(|t| t.steps.len()).min().unwrap_or(0);
    if traces.iter().any(|t| t.steps.len() != len) {
        warnings.push(format!(
            "trace lengths differ; aligned on the shortest ({len} steps)"
        ));
    }
    let steps = (0..len)
        .map(|i| {
            let v: Vec<f64> = traces.iter().map(|t| t.steps[i].v).collect();
            let r: Vec<f64> = traces.iter().map(|t| t.steps[i].regret.cumulative).collect();
            StepSummary {
                k: i + 1,
                v: Stat::of(&v),
                cumulative_regret: Stat::of(&r),
            }
        })
        .collect();
    Ok(Aggregate {
        strategy: first.strategy.clone(),
        steps,
        warnings,
    })
}
