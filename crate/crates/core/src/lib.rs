//! Model-based transfer learning for sequential source-task selection.
//!
//! A transfer matrix records how well a model trained on one context performs
//! on every other context. Given such a matrix (ingested from disk or produced
//! by [`landscape`]), the crate runs source-selection strategies (random,
//! equidistant, greedy on a linear gap model, and GP-UCB / GP-EI), tracks the
//! best-so-far generalized performance, and evaluates the cumulative regret
//! and its high-probability bounds.
//!
//! The modules follow the data flow of a single run:
//!
//! - [`context`], [`matrix`], [`state`]: task space, transfer table, and the
//!   best-so-far bookkeeping.
//! - [`gap_model`]: the linear generalization-gap model.
//! - [`gp`]: exact Gaussian-process regression over training performance.
//! - [`acquisition`]: UCB/EI scores of expected marginal improvement.
//! - [`strategies`]: the next-task policies.
//! - [`engine`]: the selection loop, termination, and multi-seed aggregation.
//! - [`regret`]: regret, bound values, and search-space elimination traces.
//! - [`landscape`]: synthetic transfer matrices.
//! - [`io`], [`config`], [`report`], [`cli`]: files, configuration, and the
//!   command-line surface.

#![forbid(unsafe_code)]

pub mod acquisition;
pub mod cli;
pub mod config;
pub mod context;
pub mod engine;
pub mod error;
pub mod gap_model;
pub mod gp;
pub mod io;
pub mod landscape;
pub mod matrix;
pub mod regret;
pub mod report;
pub mod state;
pub mod strategies;

pub use context::ContextSpace;
pub use error::{Error, Result};
pub use matrix::TransferMatrix;
pub use state::SelectionState;

/// Absolute tolerance under which two scores are treated as tied.
///
/// Ties resolve to the lowest context index everywhere in the crate.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the maximal score, lowest index among (near-)ties.
///
/// Entries that are `None` are skipped. Returns `None` if nothing is scored.
pub fn argmax_tie_low<I>(scores: I) -> Option<(usize, f64)>
where
    I: IntoIterator<Item = (usize, f64)>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores {
        match best {
            None => best = Some((i, s)),
            Some((bi, bs)) => {
                if s > bs + TIE_TOLERANCE || ((s - bs).abs() <= TIE_TOLERANCE && i < bi) {
                    best = Some((i, s));
                }
            }
        }
    }
    best
}
