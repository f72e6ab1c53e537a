//! Acquisition scores: expected marginal improvement of generalized
//! performance, with a UCB or EI treatment of the GP uncertainty.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::context::ContextSpace;
use crate::error::{Error, Result};
use crate::gap_model::LinearGapModel;
use crate::gp::GpModel;
use crate::state::SelectionState;

/// Exploration-scale schedule for UCB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum BetaSchedule {
    /// `2 log(|X| pi^2 k^2 / (6 delta))`.
    PaperLog { delta: f64 },
    Constant { value: f64 },
    /// The `paper_log` value at `k = 1`, decayed as `1 / sqrt(k)`.
    Decreasing { delta: f64 },
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::PaperLog { delta: 0.1 }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

fn paper_log(k: usize, n_contexts: usize, delta: f64) -> f64 {
    let k = k as f64;
    2.0 * (n_contexts as f64 * PI * PI * k * k / (6.0 * delta)).ln()
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaSchedule::PaperLog { delta } | BetaSchedule::Decreasing { delta } => check_delta(delta),
            BetaSchedule::Constant { value } if !(value >= 0.0 && value.is_finite()) => Err(
                Error::Config(format!("constant beta must be finite and >= 0, got {value}")),
            ),
            BetaSchedule::Constant { .. } => Ok(()),
        }
    }

    /// `beta_k` for step `k >= 1` over `n_contexts` tasks.
    pub fn beta(&self, k: usize, n_contexts: usize) -> Result<f64> {
        self.validate()?;
        if k == 0 {
            return Err(Error::Input("beta is defined for k >= 1".into()));
        }
        Ok(match *self {
            BetaSchedule::PaperLog { delta } => paper_log(k, n_contexts, delta),
            BetaSchedule::Constant { value } => value,
            BetaSchedule::Decreasing { delta } => paper_log(1, n_contexts, delta) / (k as f64).sqrt(),
        })
    }
}

/// Which uncertainty treatment scores candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    #[default]
    Ucb,
    Ei,
}

/// UCB score of one candidate given its optimistic performance
/// `mu + sqrt(beta) sigma`: mean over targets of
/// `[optimistic - theta |x - x'| - best(x')]_+`.
pub fn ucb_score(
    optimistic: f64,
    candidate: usize,
    theta: f64,
    best: &[f64],
    space: &ContextSpace,
) -> f64 {
    let total: f64 = best
        .iter()
        .enumerate()
        .map(|(t, b)| (optimistic - theta * space.distance(candidate, t) - b).max(0.0))
        .sum();
    total / best.len() as f64
}

/// Closed-form `E[(Y - threshold)_+]` for `Y ~ N(mean, sd^2)`.
pub fn expected_improvement(mean: f64, sd: f64, threshold: f64) -> f64 {
    let diff = mean - threshold;
    if !(sd > 0.0) {
        return diff.max(0.0);
    }
    let z = diff / sd;
    let pdf = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let cdf = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    (sd * pdf + diff * cdf).max(0.0)
}

/// EI score of one candidate: per-target Gaussian EI of
/// `N(mu - theta |x - x'|, sigma^2)` over `best(x')`, averaged over targets.
pub fn ei_score(
    mu: f64,
    sigma: f64,
    candidate: usize,
    theta: f64,
    best: &[f64],
    space: &ContextSpace,
) -> f64 {
    let total: f64 = best
        .iter()
        .enumerate()
        .map(|(t, b)| expected_improvement(mu - theta * space.distance(candidate, t), sigma, *b))
        .sum();
    total / best.len() as f64
}

/// UCB scores `(index, score)` of every untrained context.
pub fn ucb_scores(
    gp: &GpModel,
    state: &SelectionState,
    gap: &LinearGapModel,
    beta_k: f64,
    space: &ContextSpace,
) -> Vec<(usize, f64)> {
    let bonus = beta_k.max(0.0).sqrt();
    state
        .untrained()
        .map(|c| {
            let (mu, var) = gp.posterior(space.value(c));
            let optimistic = mu + bonus * var.sqrt();
            (c, ucb_score(optimistic, c, gap.theta, state.best(), space))
        })
        .collect()
}

/// EI scores `(index, score)` of every untrained context.
pub fn ei_scores(
    gp: &GpModel,
    state: &SelectionState,
    gap: &LinearGapModel,
    space: &ContextSpace,
) -> Vec<(usize, f64)> {
    state
        .untrained()
        .map(|c| {
            let (mu, var) = gp.posterior(space.value(c));
            (c, ei_score(mu, var.sqrt(), c, gap.theta, state.best(), space))
        })
        .collect()
}
