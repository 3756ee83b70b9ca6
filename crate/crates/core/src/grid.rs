//! Uniform time grids and the sampled-path container.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform partition of `[t_min, t_max]` into `n_cells` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    t_min: f64,
    t_max: f64,
    n_cells: usize,
}

impl UniformGrid {
    pub fn new(t_min: f64, t_max: f64, n_cells: usize) -> Result<Self> {
        if !t_min.is_finite() || !t_max.is_finite() {
            return Err(Error::InvalidGrid("endpoints must be finite".into()));
        }
        if t_min >= t_max {
            return Err(Error::InvalidGrid(format!(
                "t_min ({t_min}) must be below t_max ({t_max})"
            )));
        }
        if n_cells == 0 {
            return Err(Error::InvalidGrid("n_cells must be at least 1".into()));
        }
        Ok(Self { t_min, t_max, n_cells })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn step(&self) -> f64 {
        (self.t_max - self.t_min) / self.n_cells as f64
    }

    /// `t_min + k * step`; the last node is pinned to `t_max` exactly.
    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_cells {
            self.t_max
        } else {
            self.t_min + k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_cells).map(move |k| self.node(k))
    }

    /// Index of the last node `<= t`, clamped to the grid.
    pub fn index_at_or_before(&self, t: f64) -> usize {
        if t <= self.t_min {
            return 0;
        }
        let x = (t - self.t_min) / self.step();
        // absorb rounding for times that sit on a node
        let k = (x + 1e-9).floor();
        (k as usize).min(self.n_cells)
    }

    /// Index of the node equal to `t` up to a relative rounding tolerance.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t_min) / self.step();
        let k = x.round();
        if (x - k).abs() > 1e-7 || k < 0.0 || k > self.n_cells as f64 {
            None
        } else {
            Some(k as usize)
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max
    }
}

/// Values of a process on the nodes of a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    grid: UniformGrid,
    values: Vec<f64>,
    label: String,
}

impl SampledPath {
    pub fn new(grid: UniformGrid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite value at node {k}")));
        }
        Ok(Self { grid, values, label: label.into() })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Piecewise-constant, right-continuous evaluation: value at the last
    /// node `<= t`. Times before the grid take the first value.
    pub fn value_at_or_before(&self, t: f64) -> f64 {
        self.values[self.grid.index_at_or_before(t)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
