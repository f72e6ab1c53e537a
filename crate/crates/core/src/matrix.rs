//! Transfer-performance matrix and its reference values.

use serde::{Deserialize, Serialize};

use crate::context::ContextSpace;
use crate::error::{Error, Result};

/// How (and whether) matrix entries were mapped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Raw rewards, no range guarantee.
    Raw,
    /// Column-wise min-max over sources, one column per target.
    PerTarget,
    /// Min-max over the whole matrix.
    Global,
    /// Produced directly in `[0, 1]` (synthetic or pre-normalized input).
    Native,
}

impl Normalization {
    pub fn is_normalized(self) -> bool {
        !matches!(self, Normalization::Raw)
    }
}

/// `u[s][t]` is the performance on target `t` of the model trained on source
/// `s`. The diagonal holds the source training performance `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    space: ContextSpace,
    // row-major, n * n
    u: Vec<f64>,
    normalization: Normalization,
}

impl TransferMatrix {
    pub fn new(space: ContextSpace, rows: Vec<Vec<f64>>, normalization: Normalization) -> Result<Self> {
        let n = space.len();
        if rows.len() != n {
            return Err(Error::Input(format!(
                "matrix has {} rows but the context space has {} values",
                rows.len(),
                n
            )));
        }
        let mut u = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Input(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            u.extend(row);
        }
        Self::from_flat(space, u, normalization)
    }

    pub fn from_flat(space: ContextSpace, u: Vec<f64>, normalization: Normalization) -> Result<Self> {
        let n = space.len();
        if u.len() != n * n {
            return Err(Error::Input(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                u.len()
            )));
        }
        if let Some(p) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite entry at source {}, target {}",
                p / n,
                p % n
            )));
        }
        if normalization.is_normalized() {
            if let Some(p) = u.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Input(format!(
                    "normalized matrix entry {} at source {}, target {} lies outside [0, 1]",
                    u[p],
                    p / n,
                    p % n
                )));
            }
        }
        Ok(Self {
            space,
            u,
            normalization,
        })
    }

    pub fn space(&self) -> &ContextSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.len()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization.is_normalized()
    }

    pub fn get(&self, source: usize, target: usize) -> f64 {
        self.u[source * self.n() + target]
    }

    pub fn row(&self, source: usize) -> &[f64] {
        let n = self.n();
        &self.u[source * n..(source + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.u.chunks(self.n())
    }

    /// Training performance `J(x_i)` of source `i`.
    pub fn training_performance(&self, source: usize) -> f64 {
        self.get(source, source)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    fn check_index(&self, i: usize, what: &str) -> Result<()> {
        if i >= self.n() {
            return Err(Error::Input(format!(
                "{what} index {i} out of range for {} contexts",
                self.n()
            )));
        }
        Ok(())
    }

    /// Per-target min-max normalization of a raw matrix.
    ///
    /// Already-normalized matrices are returned unchanged; use
    /// [`TransferMatrix::rescale_per_target`] to rescale those as well.
    pub fn normalize(&self) -> Result<Self> {
        if self.is_normalized() {
            return Ok(self.clone());
        }
        self.rescale_per_target()
    }

    /// Map each column affinely onto `[0, 1]`, whatever the current
    /// normalization. A constant column maps to all ones.
    pub fn rescale_per_target(&self) -> Result<Self> {
        let n = self.n();
        let mut u = self.u.clone();
        for t in 0..n {
            let (lo, hi) = (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                let v = self.get(s, t);
                (lo.min(v), hi.max(v))
            });
            for s in 0..n {
                u[s * n + t] = if hi > lo {
                    ((self.get(s, t) - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    1.0
                };
            }
        }
        Self::from_flat(self.space.clone(), u, Normalization::PerTarget)
    }

    /// Min-max over the whole matrix, for replaying the alternative reading
    /// of the normalization step.
    pub fn normalize_global(&self) -> Result<Self> {
        if self.is_normalized() {
            return Ok(self.clone());
        }
        let lo = self.u.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let u = self
            .u
            .iter()
            .map(|v| if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 1.0 })
            .collect();
        Self::from_flat(self.space.clone(), u, Normalization::Global)
    }

    /// Nonnegative performance lost when the model trained on `source` is
    /// deployed on `target`: `J(source) - U(target; source)`, clamped at 0.
    pub fn generalization_gap(&self, source: usize, target: usize) -> Result<f64> {
        self.check_index(source, "source")?;
        self.check_index(target, "target")?;
        Ok((self.get(source, source) - self.get(source, target)).max(0.0))
    }

    /// Mean over targets of the best source for each target.
    pub fn oracle_value(&self) -> f64 {
        let n = self.n();
        let total: f64 = (0..n)
            .map(|t| (0..n).map(|s| self.get(s, t)).fold(f64::NEG_INFINITY, f64::max))
            .sum();
        total / n as f64
    }

    /// Mean of the diagonal: one independently trained model per task.
    pub fn exhaustive_value(&self) -> f64 {
        self.diagonal().iter().sum::<f64>() / self.n() as f64
    }
}
