//! The Brownian driver on a uniform grid.

use crate::error::{Error, Result};
use crate::grid::{SampledPath, UniformGrid};
use crate::rng::{self, Domain};

/// Brownian increments over the cells of a grid, addressable by
/// `(seed, stream_id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGrid {
    grid: UniformGrid,
    increments: Vec<f64>,
    seed: u64,
    stream_id: u64,
}

impl NoiseGrid {
    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Builds a noise grid from explicit increments (tests and fixtures).
    pub fn from_increments(grid: UniformGrid, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != grid.n_cells() {
            return Err(crate::Error::GridMismatch(format!(
                "{} increments for {} cells",
                increments.len(),
                grid.n_cells()
            )));
        }
        Ok(Self { grid, increments, seed: 0, stream_id: 0 })
    }
}

impl NoiseGrid {
    /// Sums `factor` consecutive increments into one cell.
    pub fn coarsen(&self, factor: usize) -> Result<NoiseGrid> {
        if factor == 0 || self.grid.n_cells() % factor != 0 {
            return Err(Error::GridMismatch(format!(
                "{} cells cannot be grouped by {factor}",
                self.grid.n_cells()
            )));
        }
        let grid = UniformGrid::new(self.grid.t_min(), self.grid.t_max(), self.grid.n_cells() / factor)?;
        let increments = self.increments.chunks(factor).map(|c| c.iter().sum()).collect();
        Ok(NoiseGrid { grid, increments, seed: self.seed, stream_id: self.stream_id })
    }
}

/// Draws i.i.d. `Normal(0, step)` increments for every cell of `grid`.
pub fn make_noise(seed: u64, stream_id: u64, grid: UniformGrid) -> Result<NoiseGrid> {
    // re-validate: a grid may have been deserialized without going through `new`
    let grid = UniformGrid::new(grid.t_min(), grid.t_max(), grid.n_cells())?;
    let mut increments = vec![0.0; grid.n_cells()];
    let mut rng = rng::stream(seed, stream_id, Domain::Driver);
    rng::fill_standard_normal(&mut rng, &mut increments);
    let scale = grid.step().sqrt();
    increments.iter_mut().for_each(|x| *x *= scale);
    Ok(NoiseGrid { grid, increments, seed, stream_id })
}

/// Running sum of the increments, starting from 0 at `t_min`.
pub fn cumulate(noise: &NoiseGrid) -> SampledPath {
    let mut values = Vec::with_capacity(noise.increments.len() + 1);
    let mut acc = 0.0;
    values.push(acc);
    for dw in &noise.increments {
        acc += dw;
        values.push(acc);
    }
    SampledPath::new(noise.grid, values, "W").expect("cumulated increments are finite")
}
