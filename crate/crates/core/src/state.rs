//! Best-so-far bookkeeping for a sequence of trained sources.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::TransferMatrix;

/// Trained sources, the per-target best-so-far vector `U(x'; x_(1:k))`, and
/// the history of expected generalized performance `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    trained: Vec<usize>,
    best: Vec<f64>,
    v_history: Vec<f64>,
    j_observed: BTreeMap<usize, f64>,
}

impl SelectionState {
    /// Empty state over `n` targets. `best` reads as zero until the first pick.
    pub fn new(n: usize) -> Self {
        Self {
            trained: Vec::new(),
            best: vec![0.0; n],
            v_history: Vec::new(),
            j_observed: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.best.len()
    }

    pub fn k(&self) -> usize {
        self.trained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trained.is_empty()
    }

    pub fn trained(&self) -> &[usize] {
        &self.trained
    }

    pub fn is_trained(&self, index: usize) -> bool {
        self.j_observed.contains_key(&index)
    }

    pub fn untrained(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |i| !self.is_trained(*i))
    }

    pub fn best(&self) -> &[f64] {
        &self.best
    }

    pub fn v_history(&self) -> &[f64] {
        &self.v_history
    }

    pub fn j_observed(&self) -> &BTreeMap<usize, f64> {
        &self.j_observed
    }

    /// Fold a newly trained source into the state: `best[j] <- max(best[j], u[s][j])`.
    pub fn update_best(&mut self, matrix: &TransferMatrix, new_source: usize) -> Result<()> {
        if matrix.n() != self.n() {
            return Err(Error::Input(format!(
                "matrix has {} contexts, state tracks {}",
                matrix.n(),
                self.n()
            )));
        }
        if new_source >= self.n() {
            return Err(Error::Selection(format!("source index {new_source} out of range")));
        }
        if self.is_trained(new_source) {
            return Err(Error::Selection(format!("source {new_source} was already trained")));
        }
        let row = matrix.row(new_source);
        if self.trained.is_empty() {
            self.best.copy_from_slice(row);
        } else {
            for (b, &u) in self.best.iter_mut().zip(row) {
                *b = b.max(u);
            }
        }
        self.trained.push(new_source);
        self.j_observed
            .insert(new_source, matrix.training_performance(new_source));
        let v = self.expected_generalized_performance()?;
        self.v_history.push(v);
        Ok(())
    }

    /// `V`: uniform mean of the best-so-far vector over all targets.
    pub fn expected_generalized_performance(&self) -> Result<f64> {
        if self.trained.is_empty() {
            return Err(Error::State(
                "expected generalized performance is undefined before the first training".into(),
            ));
        }
        Ok(mean(&self.best))
    }

    /// Context values and observed training performance of trained sources,
    /// in training order.
    pub fn observations(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.trained
            .iter()
            .map(|&i| (values[i], self.j_observed[&i]))
            .unzip()
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
