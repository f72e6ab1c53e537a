//! The one-dimensional grid of context values that indexes tasks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, strictly increasing grid of context values.
///
/// Tasks are addressed by index; strategies reason about distances in value
/// space, so non-uniform grids are handled correctly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSpace {
    values: Vec<f64>,
    label: String,
}

impl ContextSpace {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Input(format!(
                "context space needs at least 2 values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("context value {i} is not finite")));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Input(format!(
                "context values must be strictly increasing: {} then {} at position {}",
                values[i],
                values[i + 1],
                i + 1
            )));
        }
        Ok(Self {
            values,
            label: label.into(),
        })
    }

    /// `n` evenly spaced values from `lo` to `hi` inclusive.
    pub fn uniform(n: usize, lo: f64, hi: f64, label: impl Into<String>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Input(format!("context space needs at least 2 values, got {n}")));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let values = (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
            .collect();
        Self::new(values, label)
    }

    /// The integer grid `0, 1, ..., n-1`.
    pub fn integers(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i as f64).collect(), "context")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Width of the context range, `max - min`.
    pub fn span(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        (self.values[a] - self.values[b]).abs()
    }

    /// Exact lookup of a context value.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.values
            .binary_search_by(|v| v.total_cmp(&value))
            .ok()
    }

    /// Grid index closest to `position`; equidistant neighbours resolve low.
    pub fn nearest_index(&self, position: f64) -> usize {
        self.nearest_index_where(position, |_| true)
            .expect("grid is never empty")
    }

    /// Closest index to `position` among those accepted by `allowed`.
    pub fn nearest_index_where<F>(&self, position: f64, allowed: F) -> Option<usize>
    where
        F: Fn(usize) -> bool,
    {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.values.iter().enumerate() {
            if !allowed(i) {
                continue;
            }
            let d = (v - position).abs();
            match best {
                Some((_, bd)) if d >= bd => {}
                _ => best = Some((i, d)),
            }
        }
        best.map(|(i, _)| i)
    }

    /// Index nearest the centre of the range.
    pub fn midpoint_index(&self) -> usize {
        self.nearest_index(0.5 * (self.min() + self.max()))
    }
}
