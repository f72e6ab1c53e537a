//! Linear generalization-gap model: `gap(x, x') ~ theta * |x - x'|`.

use serde::{Deserialize, Serialize};

use crate::context::ContextSpace;
use crate::error::{Error, Result};
use crate::matrix::TransferMatrix;
use crate::state::{mean, SelectionState};

/// Slope of the linear gap model, in performance units per context unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearGapModel {
    pub theta: f64,
    /// Number of (distance, gap) pairs used in the fit.
    pub n_obs: usize,
    /// True when no observation had positive distance and the prior was used.
    pub from_prior: bool,
}

impl LinearGapModel {
    pub fn fixed(theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::Config(format!("fixed theta must be finite and >= 0, got {theta}")));
        }
        Ok(Self {
            theta,
            n_obs: 0,
            from_prior: false,
        })
    }

    /// Prior slope: one full unit of performance lost across the context span.
    pub fn prior_theta(space: &ContextSpace) -> f64 {
        1.0 / space.span()
    }

    /// Nonnegative least squares through the origin,
    /// `theta = max(0, sum(d*g) / sum(d^2))`.
    pub fn fit(observations: &[(f64, f64)], prior_theta: f64) -> Self {
        let (sdg, sdd) = observations
            .iter()
            .filter(|(d, _)| *d > 0.0)
            .fold((0.0, 0.0), |(sdg, sdd), (d, g)| (sdg + d * g, sdd + d * d));
        if sdd > 0.0 {
            Self {
                theta: (sdg / sdd).max(0.0),
                n_obs: observations.len(),
                from_prior: false,
            }
        } else {
            Self {
                theta: prior_theta,
                n_obs: observations.len(),
                from_prior: true,
            }
        }
    }

    /// Fit from the full evaluation rows of every trained source.
    pub fn fit_from_rows(matrix: &TransferMatrix, trained: &[usize]) -> Self {
        let obs = gap_observations(matrix, trained);
        Self::fit(&obs, Self::prior_theta(matrix.space()))
    }
}

/// `(|x_s - x_t|, gap(s, t))` for every trained source `s` and every other
/// target `t`.
pub fn gap_observations(matrix: &TransferMatrix, trained: &[usize]) -> Vec<(f64, f64)> {
    let space = matrix.space();
    let n = matrix.n();
    let mut obs = Vec::with_capacity(trained.len() * n.saturating_sub(1));
    for &s in trained {
        let j = matrix.training_performance(s);
        for t in (0..n).filter(|&t| t != s) {
            obs.push((space.distance(s, t), (j - matrix.get(s, t)).max(0.0)));
        }
    }
    obs
}

/// Predicted transfer `clamp(j_hat - theta * distance, 0, 1)`.
pub fn predict_transfer(j_hat: f64, distance: f64, model: &LinearGapModel) -> Result<f64> {
    if !(distance >= 0.0) {
        return Err(Error::Input(format!("distance must be nonnegative, got {distance}")));
    }
    Ok((j_hat - model.theta * distance).clamp(0.0, 1.0))
}

/// Predicted row `Û(x'; candidate)` for every target.
pub(crate) fn predicted_row(
    j_hat: f64,
    candidate: usize,
    model: &LinearGapModel,
    space: &ContextSpace,
) -> Vec<f64> {
    (0..space.len())
        .map(|t| (j_hat - model.theta * space.distance(candidate, t)).clamp(0.0, 1.0))
        .collect()
}

/// Mean over targets of `[Û(x'; candidate) - best(x')]_+`.
pub fn marginal_improvement(
    state: &SelectionState,
    candidate: usize,
    j_hat: f64,
    model: &LinearGapModel,
    space: &ContextSpace,
) -> Result<f64> {
    if candidate >= space.len() {
        return Err(Error::Input(format!("candidate index {candidate} out of range")));
    }
    if state.is_trained(candidate) {
        return Err(Error::Selection(format!("candidate {candidate} is already trained")));
    }
    let gains: Vec<f64> = predicted_row(j_hat, candidate, model, space)
        .into_iter()
        .zip(state.best())
        .map(|(u, b)| (u - b).max(0.0))
        .collect();
    Ok(mean(&gains))
}
