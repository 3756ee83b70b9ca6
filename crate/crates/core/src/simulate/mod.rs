//! Discretized simulation of `X_t = ∫_{-∞}^t g_s(t) dW_s` and of the
//! coupled mBm field.
//!
//! The driver lives on a fine grid over `[-M_near, T]`. Kernel weights are
//! frozen at the left end of each driver cell and tabulated on Chebyshev
//! nodes in `H`, so every path costs a handful of FFT convolutions. The past
//! beyond `M_near` is covered by geometric blocks up to the horizon and a
//! rank-one variance-matched term beyond it.

mod plan;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use plan::{Draw, SimPlan};

use crate::error::{Error, Result};
use crate::grid::{SampledPath, UniformGrid};
use crate::hurst::{generate_hurst, HurstPath, HurstSpec};
use crate::kernels::KernelSpec;

/// Treatment of the driver cell that touches the evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularCell {
    /// Raw kernel at the left end of the cell.
    LeftPoint,
    /// Cell-averaged kernel plus an independent normal carrying the rest of
    /// the exact cell variance.
    #[default]
    VarianceMatched,
}

/// Weights of the remaining driver cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// Kernel evaluated at the left end of the cell.
    LeftPoint,
    /// Kernel averaged over the cell with `H` and `σ` frozen at its left end.
    #[default]
    CellAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonRule {
    /// From the truncation bound, capped at the maximal horizon.
    #[default]
    Auto,
    Fixed(f64),
}

fn default_substeps() -> usize {
    8
}

fn default_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Output times; must start at 0.
    pub grid: UniformGrid,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_tol")]
    pub tol_truncation: f64,
    #[serde(default)]
    pub singular_cell: SingularCell,
    #[serde(default)]
    pub weights: WeightRule,
    #[serde(default)]
    pub horizon: HorizonRule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stream_id: u64,
}

impl SimConfig {
    pub fn new(grid: UniformGrid) -> Self {
        Self {
            grid,
            substeps: default_substeps(),
            tol_truncation: default_tol(),
            singular_cell: SingularCell::default(),
            weights: WeightRule::default(),
            horizon: HorizonRule::default(),
            seed: 0,
            stream_id: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64, stream_id: u64) -> Self {
        self.seed = seed;
        self.stream_id = stream_id;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let g = UniformGrid::new(self.grid.t_min(), self.grid.t_max(), self.grid.n_cells())?;
        if g.t_min() != 0.0 {
            return Err(Error::GridMismatch("the output grid must start at t = 0".into()));
        }
        if self.substeps == 0 {
            return Err(Error::param("substeps must be at least 1"));
        }
        if !(self.tol_truncation > 0.0 && self.tol_truncation.is_finite()) {
            return Err(Error::param("tol_truncation must be positive"));
        }
        Ok(())
    }
}

/// Which process a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    /// The adapted moving average `X_t = ∫ g_s(t) dW_s`.
    #[default]
    Ito,
    /// The field `B(t, H_t)`; requires the `ito_mbm` family.
    Field,
}

/// Simulates one path of `X` for the given kernel and Hurst path.
pub fn simulate_moving_average(kernel: &KernelSpec, hurst: &HurstPath, cfg: &SimConfig) -> Result<SampledPath> {
    let plan = SimPlan::new(kernel, hurst.h_lower(), hurst.h_upper(), cfg)?;
    plan.ito(&plan.draw(cfg.seed, cfg.stream_id), hurst)
}

/// Simulates the field `B(t, H_t)` with the same driver that
/// [`simulate_moving_average`] uses for equal seeds and `σ ≡ 1`.
pub fn simulate_mbm_field(hurst: &HurstPath, cfg: &SimConfig) -> Result<SampledPath> {
    let plan = SimPlan::new(&KernelSpec::ito_mbm(), hurst.h_lower(), hurst.h_upper(), cfg)?;
    plan.field(&plan.draw(cfg.seed, cfg.stream_id), hurst)
}

/// Simulates `n_paths` paths on streams `cfg.stream_id + i`, each with the
/// Hurst path it was driven by. Output order is the stream order.
pub fn simulate_ensemble(
    kernel: &KernelSpec,
    hurst: &HurstSpec,
    cfg: &SimConfig,
    n_paths: usize,
    process: Process,
) -> Result<Vec<(SampledPath, HurstPath)>> {
    hurst.validate()?;
    let (lo, hi) = hurst.bounds();
    let plan = SimPlan::new(kernel, lo, hi, cfg)?;
    ensemble(n_paths, |i| {
        let stream = cfg.stream_id + i;
        let hp = generate_hurst(hurst, plan.hurst_grid(), cfg.seed, stream)?;
        let draw = plan.draw(cfg.seed, stream);
        let x = match process {
            Process::Ito => plan.ito(&draw, &hp)?,
            Process::Field => plan.field(&draw, &hp)?,
        };
        Ok((x, hp))
    })
}

/// `h^{-H_t} (X_{t+hr} - X_t)` over a list of `r`, scaled with the realized
/// exponent of the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledPath {
    pub r: Vec<f64>,
    pub values: Vec<f64>,
    pub h_t: f64,
}

/// Rescales the increments of `path` around `t`. Every `t + h r` must be a
/// node of the path grid.
pub fn rescale_increments(path: &SampledPath, h_t: f64, t: f64, h: f64, r_grid: &[f64]) -> Result<RescaledPath> {
    let g = path.grid();
    if !(h > 0.0) {
        return Err(Error::Range(format!("h must be positive, got {h}")));
    }
    let base = g
        .index_of(t)
        .ok_or_else(|| Error::Range(format!("t = {t} is not a grid node")))?;
    let scale = h.powf(-h_t);
    let mut values = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let u = t + h * r;
        if u < g.t_min() - 1e-12 || u > g.t_max() + 1e-12 {
            return Err(Error::Range(format!("t + h r = {u} leaves [{}, {}]", g.t_min(), g.t_max())));
        }
        let k = g
            .index_of(u)
            .ok_or_else(|| Error::Range(format!("t + h r = {u} is not a grid node")))?;
        values.push(scale * (path.values()[k] - path.values()[base]));
    }
    Ok(RescaledPath { r: r_grid.to_vec(), values, h_t })
}

/// Runs `f` for streams `0..n_paths` in parallel; results keep stream order.
pub fn ensemble<T, F>(n_paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n_paths as u64).into_par_iter().map(f).collect()
}

/// Monte Carlo rescaled increments of `X` at `t`, one per stream
/// `cfg.stream_id + i`. Random Hurst specs are redrawn per path.
pub fn rescaled_increment_paths(
    kernel: &KernelSpec,
    hurst: &HurstSpec,
    cfg: &SimConfig,
    t: f64,
    h: f64,
    r_grid: &[f64],
    n_paths: usize,
) -> Result<Vec<RescaledPath>> {
    let (lo, hi) = hurst.bounds();
    let t_max = cfg.grid.t_max();
    for &r in r_grid {
        let u = t + h * r;
        if !(0.0..=t_max + 1e-12).contains(&u) {
            return Err(Error::Range(format!("t + h r = {u} outside [0, {t_max}]")));
        }
    }
    let plan = SimPlan::new(kernel, lo, hi, cfg)?;
    let fixed = if hurst.is_deterministic() {
        Some(generate_hurst(hurst, plan.hurst_grid(), cfg.seed, cfg.stream_id)?)
    } else {
        None
    };
    ensemble(n_paths, |i| {
        let stream = cfg.stream_id + i;
        let hp = match &fixed {
            Some(p) => p.clone(),
            None => generate_hurst(hurst, plan.hurst_grid(), cfg.seed, stream)?,
        };
        let x = plan.ito(&plan.draw(cfg.seed, stream), &hp)?;
        rescale_increments(&x, hp.at(t), t, h, r_grid)
    })
}
