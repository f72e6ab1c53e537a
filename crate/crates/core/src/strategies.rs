//! Next-task policies: random, equidistant, greedy, and GP-based selection.
//!
//! Every policy returns an untrained context index and breaks ties toward the
//! lowest index.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{ei_scores, ucb_scores, AcquisitionKind, BetaSchedule};
use crate::argmax_tie_low;
use crate::context::ContextSpace;
use crate::error::{Error, Result};
use crate::gap_model::{marginal_improvement, LinearGapModel};
use crate::gp::{select_hyperparams, GpModel, HyperGrid, Hyperparams};
use crate::state::SelectionState;

/// GP acquisition settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionSpec {
    #[serde(rename = "acquisition")]
    pub kind: AcquisitionKind,
    pub beta: BetaSchedule,
    /// Select hyperparameters once (at the first step with two observations)
    /// instead of at every step.
    pub freeze_hyperparams: bool,
    pub grid: HyperGrid,
}

impl Default for AcquisitionSpec {
    fn default() -> Self {
        Self {
            kind: AcquisitionKind::Ucb,
            beta: BetaSchedule::default(),
            freeze_hyperparams: false,
            grid: HyperGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StrategySpec {
    Random,
    Equidistant,
    Greedy,
    Gp(AcquisitionSpec),
}

impl StrategySpec {
    pub fn name(&self) -> &'static str {
        match self {
            StrategySpec::Random => "random",
            StrategySpec::Equidistant => "equidistant",
            StrategySpec::Greedy => "greedy",
            StrategySpec::Gp(_) => "gp",
        }
    }

    /// Column heading used in summary tables.
    pub fn display_name(&self) -> &'static str {
        match self {
            StrategySpec::Random => "Random",
            StrategySpec::Equidistant => "MBTL-ES",
            StrategySpec::Greedy => "MBTL-GS",
            StrategySpec::Gp(_) => "MBTL-GP",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "random" => Ok(StrategySpec::Random),
            "equidistant" | "es" | "mbtl-es" => Ok(StrategySpec::Equidistant),
            "greedy" | "gs" | "mbtl-gs" => Ok(StrategySpec::Greedy),
            "gp" | "mbtl-gp" | "gp-ucb" => Ok(StrategySpec::Gp(AcquisitionSpec::default())),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn exhausted() -> Error {
    Error::Selection("no untrained contexts remain".into())
}

/// Uniform draw over untrained contexts.
pub fn next_random<R: Rng>(state: &SelectionState, rng: &mut R) -> Result<usize> {
    let open: Vec<usize> = state.untrained().collect();
    if open.is_empty() {
        return Err(exhausted());
    }
    Ok(open[rng.random_range(0..open.len())])
}

/// Target position `min + (2k - 1) / (2K) * span` of the `k`-th of `budget`
/// equidistant picks.
pub fn equidistant_position(k: usize, budget: usize, space: &ContextSpace) -> Result<f64> {
    if budget == 0 || k == 0 || k > budget {
        return Err(Error::Config(format!(
            "equidistant step k = {k} must satisfy 1 <= k <= K = {budget}"
        )));
    }
    let frac = (2 * k - 1) as f64 / (2 * budget) as f64;
    Ok(space.min() + frac * space.span())
}

/// Grid index nearest the `k`-th equidistant position; an already-trained
/// index falls through to the nearest untrained one.
pub fn next_equidistant(
    k: usize,
    budget: usize,
    space: &ContextSpace,
    state: &SelectionState,
) -> Result<usize> {
    let pos = equidistant_position(k, budget, space)?;
    space
        .nearest_index_where(pos, |i| !state.is_trained(i))
        .ok_or_else(exhausted)
}

/// Argmax of marginal improvement assuming every task trains to performance 1.
pub fn next_greedy(
    state: &SelectionState,
    gap: &LinearGapModel,
    space: &ContextSpace,
) -> Result<usize> {
    let scores = state
        .untrained()
        .map(|c| marginal_improvement(state, c, 1.0, gap, space).map(|s| (c, s)))
        .collect::<Result<Vec<_>>>()?;
    argmax_tie_low(scores).map(|(i, _)| i).ok_or_else(exhausted)
}

/// Argmax of the acquisition over untrained contexts for a GP fitted on the
/// trained sources. `beta_k` is ignored by EI.
pub fn next_gp(
    state: &SelectionState,
    gp: &GpModel,
    kind: AcquisitionKind,
    beta_k: f64,
    gap: &LinearGapModel,
    space: &ContextSpace,
) -> Result<usize> {
    let scores = match kind {
        AcquisitionKind::Ucb => ucb_scores(gp, state, gap, beta_k, space),
        AcquisitionKind::Ei => ei_scores(gp, state, gap, space),
    };
    argmax_tie_low(scores).map(|(i, _)| i).ok_or_else(exhausted)
}

/// One selection decision with the model context it was made in.
#[derive(Debug, Clone, PartialEq)]
pub struct Pick {
    pub index: usize,
    /// Predicted training performance of the pick (GP mean, or 1 for the
    /// model-free and greedy policies).
    pub j_hat: f64,
    /// Hyperparameters of the GP used for the pick, if any.
    pub hyperparams: Option<Hyperparams>,
    pub beta: Option<f64>,
}

/// A running policy: owns the RNG stream and any frozen GP hyperparameters.
#[derive(Debug, Clone)]
pub struct Selector {
    spec: StrategySpec,
    budget: usize,
    rng: ChaCha8Rng,
    frozen: Option<Hyperparams>,
    // selection already made on the current observations with a known grid
    offered: Option<(usize, HyperGrid, Hyperparams)>,
}

impl Selector {
    pub fn new(spec: StrategySpec, budget: usize, seed: u64) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Config("budget K must be >= 1".into()));
        }
        if let StrategySpec::Gp(acq) = &spec {
            acq.beta.validate()?;
            acq.grid.validate()?;
        }
        Ok(Self {
            spec,
            budget,
            rng: ChaCha8Rng::seed_from_u64(seed),
            frozen: None,
            offered: None,
        })
    }

    pub fn spec(&self) -> &StrategySpec {
        &self.spec
    }

    /// Hand over the result of [`select_hyperparams`] on the first `n_obs`
    /// observations over `grid`, so the next pick can skip the search when
    /// its data and grid match.
    pub fn offer_hyperparams(&mut self, n_obs: usize, grid: &HyperGrid, h: Hyperparams) {
        self.offered = Some((n_obs, grid.clone(), h));
    }

    /// Choose the next source given the current state and gap model.
    pub fn next(
        &mut self,
        state: &SelectionState,
        gap: &LinearGapModel,
        space: &ContextSpace,
    ) -> Result<Pick> {
        if state.untrained().next().is_none() {
            return Err(exhausted());
        }
        let k = state.k() + 1;
        let simple = |index| Pick {
            index,
            j_hat: 1.0,
            hyperparams: None,
            beta: None,
        };
        match &self.spec {
            StrategySpec::Random => next_random(state, &mut self.rng).map(simple),
            StrategySpec::Equidistant => {
                next_equidistant(k, self.budget, space, state).map(simple)
            }
            StrategySpec::Greedy => next_greedy(state, gap, space).map(simple),
            StrategySpec::Gp(acq) => {
                let beta = acq.beta.beta(k, space.len())?;
                if state.is_empty() {
                    let index = space
                        .nearest_index_where(0.5 * (space.min() + space.max()), |i| {
                            !state.is_trained(i)
                        })
                        .ok_or_else(exhausted)?;
                    return Ok(Pick {
                        index,
                        j_hat: 1.0,
                        hyperparams: None,
                        beta: Some(beta),
                    });
                }
                let (xs, ys) = state.observations(space.values());
                let offered = match self.offered.take() {
                    Some((n, grid, h)) if n == xs.len() && grid == acq.grid => Some(h),
                    _ => None,
                };
                let hyper = match self.frozen {
                    Some(h) => h,
                    None => {
                        let h = offered
                            .unwrap_or_else(|| select_hyperparams(&xs, &ys, &acq.grid, space.span()));
                        if acq.freeze_hyperparams && xs.len() >= 2 {
                            self.frozen = Some(h);
                        }
                        h
                    }
                };
                let gp = GpModel::fit(&xs, &ys, hyper.kernel, hyper.noise_std)?;
                let index = next_gp(state, &gp, acq.kind, beta, gap, space)?;
                Ok(Pick {
                    index,
                    j_hat: gp.posterior(space.value(index)).0,
                    hyperparams: Some(hyper),
                    beta: Some(beta),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{Normalization, TransferMatrix};
    use crate::gp::Kernel;

    fn linear(n: usize, theta: f64) -> TransferMatrix {
        let space = ContextSpace::integers(n).unwrap();
        let rows = (0..n)
            .map(|s| {
                (0..n)
                    .map(|t| (1.0 - theta * space.distance(s, t)).clamp(0.0, 1.0))
                    .collect()
            })
            .collect();
        TransferMatrix::new(space, rows, Normalization::Native).unwrap()
    }

    #[test]
    fn random_forced_and_deterministic() {
        let m = linear(3, 0.1);
        let mut state = SelectionState::new(3);
        state.update_best(&m, 0).unwrap();
        state.update_best(&m, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(next_random(&state, &mut rng).unwrap(), 1);
        state.update_best(&m, 1).unwrap();
        assert!(next_random(&state, &mut rng).is_err());

        let fresh = SelectionState::new(50);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| next_random(&fresh, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn equidistant_positions() {
        let space = ContextSpace::uniform(101, 0.0, 100.0, "x").unwrap();
        let pos: Vec<f64> = (1..=5)
            .map(|k| equidistant_position(k, 5, &space).unwrap())
            .collect();
        assert_eq!(pos, vec![10.0, 30.0, 50.0, 70.0, 90.0]);
        assert_eq!(equidistant_position(1, 1, &space).unwrap(), 50.0);
        assert!(equidistant_position(6, 5, &space).is_err());

        let ten = ContextSpace::integers(10).unwrap();
        let state = SelectionState::new(10);
        let picks: Vec<usize> = (1..=3)
            .map(|k| next_equidistant(k, 3, &ten, &state).unwrap())
            .collect();
        assert_eq!(picks, vec![1, 4, 7]);
    }

    #[test]
    fn equidistant_collision_moves_to_nearest_untrained() {
        let m = linear(10, 0.1);
        let mut state = SelectionState::new(10);
        state.update_best(&m, 4).unwrap();
        // position 4.5: index 4 taken, 5 is the nearest free
        assert_eq!(next_equidistant(2, 3, m.space(), &state).unwrap(), 5);
    }

    #[test]
    fn equidistant_symmetric_about_midpoint() {
        let space = ContextSpace::uniform(11, -3.0, 7.0, "x").unwrap();
        for budget in 1..12 {
            for k in 1..=budget {
                let a = equidistant_position(k, budget, &space).unwrap();
                let b = equidistant_position(budget + 1 - k, budget, &space).unwrap();
                assert!((a + b - (space.min() + space.max())).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn greedy_examples() {
        let m = linear(5, 0.25);
        let gap = LinearGapModel::fixed(0.25).unwrap();
        let mut state = SelectionState::new(5);
        assert_eq!(next_greedy(&state, &gap, m.space()).unwrap(), 2);
        state.update_best(&m, 2).unwrap();
        assert_eq!(next_greedy(&state, &gap, m.space()).unwrap(), 0);
        let flat = LinearGapModel::fixed(0.0).unwrap();
        assert_eq!(next_greedy(&SelectionState::new(5), &flat, m.space()).unwrap(), 0);
    }

    #[test]
    fn gp_cold_start_is_midpoint() {
        let m = linear(9, 0.1);
        let mut sel = Selector::new(StrategySpec::Gp(AcquisitionSpec::default()), 3, 0).unwrap();
        let gap = LinearGapModel::fixed(0.1).unwrap();
        let pick = sel.next(&SelectionState::new(9), &gap, m.space()).unwrap();
        assert_eq!(pick.index, 4);
    }

    #[test]
    fn saturated_state_falls_back_to_lowest_untrained() {
        let space = ContextSpace::integers(4).unwrap();
        let m = TransferMatrix::new(space.clone(), vec![vec![1.0; 4]; 4], Normalization::Native).unwrap();
        let mut state = SelectionState::new(4);
        state.update_best(&m, 0).unwrap();
        state.update_best(&m, 2).unwrap();
        let (xs, ys) = state.observations(space.values());
        let gp = GpModel::fit(&xs, &ys, Kernel::new(1.0, 1.0).unwrap(), 0.01).unwrap();
        let gap = LinearGapModel::fixed(0.3).unwrap();
        let pick = next_gp(&state, &gp, AcquisitionKind::Ucb, 2.0, &gap, &space).unwrap();
        // the bonus is small next to trained points; scores may be positive but
        // every untrained candidate stays a valid answer
        assert!(pick == 1 || pick == 3);
        let zero = next_gp(&state, &gp, AcquisitionKind::Ucb, 0.0, &gap, &space).unwrap();
        assert_eq!(zero, 1);
    }

    #[test]
    fn gp_with_zero_beta_tracks_greedy() {
        let m = linear(21, 0.03);
        let gap = LinearGapModel::fixed(0.03).unwrap();
        let acq = AcquisitionSpec {
            beta: BetaSchedule::Constant { value: 0.0 },
            ..AcquisitionSpec::default()
        };
        let mut sel = Selector::new(StrategySpec::Gp(acq), 8, 0).unwrap();
        let mut gp_state = SelectionState::new(21);
        let mut gs_state = SelectionState::new(21);
        for _ in 0..8 {
            let a = sel.next(&gp_state, &gap, m.space()).unwrap().index;
            let b = next_greedy(&gs_state, &gap, m.space()).unwrap();
            assert_eq!(a, b);
            gp_state.update_best(&m, a).unwrap();
            gs_state.update_best(&m, b).unwrap();
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!(StrategySpec::parse("GS").unwrap(), StrategySpec::Greedy);
        assert_eq!(StrategySpec::parse("equidistant").unwrap().display_name(), "MBTL-ES");
        assert!(StrategySpec::parse("multitask").is_err());
    }

    #[test]
    fn no_strategy_repeats_a_pick() {
        let m = linear(12, 0.05);
        let gap = LinearGapModel::fixed(0.05).unwrap();
        for spec in [
            StrategySpec::Random,
            StrategySpec::Equidistant,
            StrategySpec::Greedy,
            StrategySpec::Gp(AcquisitionSpec::default()),
            StrategySpec::Gp(AcquisitionSpec {
                kind: AcquisitionKind::Ei,
                ..AcquisitionSpec::default()
            }),
        ] {
            let mut sel = Selector::new(spec.clone(), 12, 5).unwrap();
            let mut state = SelectionState::new(12);
            for _ in 0..12 {
                let p = sel.next(&state, &gap, m.space()).unwrap();
                assert!(!state.is_trained(p.index), "{spec} repeated {}", p.index);
                state.update_best(&m, p.index).unwrap();
            }
            assert!(sel.next(&state, &gap, m.space()).is_err());
        }
    }
}
