//! Versioned JSON run configuration shared by the CLI commands.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "seed": 42,
//!   "grid": { "t_max": 1.0, "n_cells": 1024 },
//!   "kernel": { "family": "ito_mbm", "sigma": 1.0 },
//!   "hurst": { "kind": "constant", "value": 0.5 },
//!   "sim": { "substeps": 8, "n_paths": 1 },
//!   "analysis": { "rescale": { "t": 0.5 } }
//! }
//! ```
//!
//! Every section except `schema` is optional and unknown fields are errors.
//! Defaults: `seed` 0; grid `[0, 1]` with 1024 cells; kernel `ito_mbm` with
//! `σ = 1` and its default Condition-A bounds; `H ≡ 0.5`; the simulation
//! defaults of [`SimConfig`] with one path of the adapted process.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::Fig2Config;
use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::hurst::HurstSpec;
use crate::kernels::{ConditionABounds, KernelFamily, KernelSpec, Sigma};
use crate::simulate::{HorizonRule, Process, SimConfig, SingularCell, WeightRule};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default = "default_hurst")]
    pub hurst: HurstSpec,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

fn default_hurst() -> HurstSpec {
    HurstSpec::Constant { value: 0.5 }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            seed: 0,
            grid: GridSection::default(),
            kernel: KernelSection::default(),
            hurst: default_hurst(),
            sim: SimSection::default(),
            analysis: AnalysisSection::default(),
        }
    }
}

/// Output grid `[0, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub t_max: f64,
    pub n_cells: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { t_max: 1.0, n_cells: 1024 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    #[default]
    ItoMbm,
    Matern,
    LogModified,
    Truncated,
}

/// Kernel family with its parameters; `lambda` is required for `matern`
/// and `cutoff` for `truncated`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default)]
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<ConditionABounds>,
}

fn one() -> f64 {
    1.0
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { family: FamilyName::ItoMbm, lambda: None, cutoff: None, sigma: 1.0, bounds: None }
    }
}

impl KernelSection {
    pub fn to_spec(&self) -> Result<KernelSpec> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Config(format!("kernel.{name} is required")));
        let refuse = |v: Option<f64>, name: &str| match v {
            Some(_) => Err(Error::Config(format!("kernel.{name} does not apply to this family"))),
            None => Ok(()),
        };
        let family = match self.family {
            FamilyName::ItoMbm | FamilyName::LogModified => {
                refuse(self.lambda, "lambda")?;
                refuse(self.cutoff, "cutoff")?;
                if self.family == FamilyName::ItoMbm {
                    KernelFamily::ItoMbm
                } else {
                    KernelFamily::LogModified
                }
            }
            FamilyName::Matern => {
                refuse(self.cutoff, "cutoff")?;
                KernelFamily::Matern { lambda: need(self.lambda, "lambda")? }
            }
            FamilyName::Truncated => {
                refuse(self.lambda, "lambda")?;
                KernelFamily::Truncated { cutoff: need(self.cutoff, "cutoff")? }
            }
        };
        KernelSpec::new(family, Sigma::Constant(self.sigma), self.bounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub process: Process,
    pub n_paths: usize,
    pub substeps: usize,
    pub tol_truncation: f64,
    pub singular_cell: SingularCell,
    pub weights: WeightRule,
    pub horizon: HorizonRule,
    pub stream_id: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::new(GridSection::default().to_grid().expect("default grid"));
        Self {
            process: Process::Ito,
            n_paths: 1,
            substeps: d.substeps,
            tol_truncation: d.tol_truncation,
            singular_cell: d.singular_cell,
            weights: d.weights,
            horizon: d.horizon,
            stream_id: 0,
        }
    }
}

impl GridSection {
    pub fn to_grid(&self) -> Result<UniformGrid> {
        UniformGrid::new(0.0, self.t_max, self.n_cells)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub rescale: RescaleSection,
    pub kc: KcSection,
    pub holder: HolderSection,
    pub fig2: Fig2Config,
}

/// Settings of `verify rescale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RescaleSection {
    pub t: f64,
    /// Decreasing scales `h`.
    pub h_values: Vec<f64>,
    pub pairs: Vec<(f64, f64)>,
    pub n_paths: usize,
}

impl Default for RescaleSection {
    fn default() -> Self {
        Self {
            t: 0.5,
            h_values: vec![0.0625, 0.03125, 0.015625, 0.0078125],
            pairs: vec![(1.0, 1.0), (1.0, -1.0), (2.0, 1.0)],
            n_paths: 2000,
        }
    }
}

/// Settings of `verify kc`. Without `exponent` the realized Hurst path of
/// each sample serves as the exponent field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KcSection {
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    pub n_paths: usize,
    pub t_values: Vec<f64>,
    pub h_values: Vec<f64>,
}

impl Default for KcSection {
    fn default() -> Self {
        Self {
            p: 4.0,
            exponent: None,
            n_paths: 1000,
            t_values: vec![0.25, 0.5],
            h_values: vec![0.125, 0.0625, 0.03125, 0.015625, 0.0078125],
        }
    }
}

/// Settings of `verify holder`: the median estimate over paths and points
/// must lie within `tolerance` of the median of the lower semicontinuous
/// Hurst variant at those points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolderSection {
    pub points: Vec<f64>,
    pub window: f64,
    pub n_scales: usize,
    pub tolerance: f64,
}

impl Default for HolderSection {
    fn default() -> Self {
        Self { points: vec![0.2, 0.35, 0.5, 0.65, 0.8], window: 1.0 / 32.0, n_scales: 6, tolerance: 0.07 }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema)));
        }
        if self.sim.n_paths == 0 {
            return Err(Error::Config("sim.n_paths must be at least 1".into()));
        }
        let kernel = self.kernel_spec()?;
        if self.sim.process == Process::Field && kernel.family != KernelFamily::ItoMbm {
            return Err(Error::Config("the field process requires the ito_mbm kernel".into()));
        }
        self.hurst.validate()?;
        self.sim_config()?.validate()
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        self.kernel.to_spec()
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let mut c = SimConfig::new(self.grid.to_grid()?).with_seed(self.seed, self.sim.stream_id);
        c.substeps = self.sim.substeps;
        c.tol_truncation = self.sim.tol_truncation;
        c.singular_cell = self.sim.singular_cell;
        c.weights = self.sim.weights;
        c.horizon = self.sim.horizon;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_takes_defaults() {
        let c = RunConfig::from_json(r#"{"schema": 1}"#).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.sim_config().unwrap().grid.n_cells(), 1024);
    }

    #[test]
    fn round_trips() {
        let mut c = RunConfig::default();
        c.kernel.family = FamilyName::Matern;
        c.kernel.lambda = Some(4.0);
        c.hurst = HurstSpec::Step { levels: vec![0.3, 0.7], breakpoints: vec![0.5] };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_fields_and_schema() {
        assert!(RunConfig::from_json(r#"{"schema": 1, "extra": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema": 1, "sim": {"paths": 3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema": 1, "hurst": {"kind": "constant", "value": 0.5, "x": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema": 2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"seed": 1}"#).is_err());
    }

    #[test]
    fn kernel_parameters_are_checked() {
        assert!(RunConfig::from_json(r#"{"schema": 1, "kernel": {"family": "matern"}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema": 1, "kernel": {"family": "ito_mbm", "lambda": 2}}"#).is_err());
        let c = RunConfig::from_json(r#"{"schema": 1, "kernel": {"family": "truncated", "cutoff": 3}}"#).unwrap();
        assert_eq!(c.kernel_spec().unwrap().family, KernelFamily::Truncated { cutoff: 3.0 });
        let bad = r#"{"schema": 1, "kernel": {"family": "matern", "lambda": 1}, "sim": {"process": "field"}}"#;
        assert!(RunConfig::from_json(bad).is_err());
    }
}
