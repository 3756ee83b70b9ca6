//! Functional Hurst exponents: generators and the lower-semicontinuous
//! envelope.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{FbmSampler, Normalization};
use crate::grid::{SampledPath, UniformGrid};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusKind {
    Holder,
    Lipschitz,
    None,
}

/// Declared modulus of continuity `ω(h) = constant · h^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulus {
    pub kind: ModulusKind,
    pub exponent: f64,
    pub constant: f64,
}

impl Modulus {
    pub fn lipschitz(constant: f64) -> Self {
        Self { kind: ModulusKind::Lipschitz, exponent: 1.0, constant }
    }

    pub fn bound(&self, h: f64) -> f64 {
        match self.kind {
            ModulusKind::None => f64::INFINITY,
            _ => self.constant * h.powf(self.exponent),
        }
    }
}

/// A sampled Hurst path with its declared bounds and regularity.
#[derive(Debug, Clone, PartialEq)]
pub struct HurstPath {
    path: SampledPath,
    h_lower: f64,
    h_upper: f64,
    modulus: Option<Modulus>,
    continuous: bool,
    /// Nodes `k` at which the path jumps between nodes `k-1` and `k`; the
    /// node itself carries the right limit.
    jumps: Vec<usize>,
}

impl HurstPath {
    pub fn new(
        path: SampledPath,
        h_lower: f64,
        h_upper: f64,
        modulus: Option<Modulus>,
        continuous: bool,
        jumps: Vec<usize>,
    ) -> Result<Self> {
        if !(h_lower > 0.0 && h_lower <= h_upper && h_upper < 1.0) {
            return Err(Error::param(format!("bounds [{h_lower}, {h_upper}] not inside (0, 1)")));
        }
        let (lo, hi) = (path.min(), path.max());
        if lo < h_lower || hi > h_upper {
            return Err(Error::param(format!(
                "path range [{lo}, {hi}] escapes declared bounds [{h_lower}, {h_upper}]"
            )));
        }
        if continuous && !jumps.is_empty() {
            return Err(Error::param("a continuous Hurst path cannot carry jumps"));
        }
        if let Some(m) = modulus {
            let vals = path.values();
            let dt = path.grid().step();
            for lag in [1usize, 2, 4, 16] {
                for k in lag..vals.len() {
                    let d = (vals[k] - vals[k - lag]).abs();
                    let b = m.bound(lag as f64 * dt);
                    if d > b * (1.0 + 1e-9) + 1e-12 {
                        return Err(Error::param(format!(
                            "declared modulus violated at node {k}: {d} > {b}"
                        )));
                    }
                }
            }
        }
        Ok(Self { path, h_lower, h_upper, modulus, continuous, jumps })
    }

    pub fn constant(grid: UniformGrid, h: f64) -> Result<Self> {
        generate_hurst(&HurstSpec::Constant { value: h }, grid, 0, 0)
    }

    pub fn path(&self) -> &SampledPath {
        &self.path
    }

    pub fn values(&self) -> &[f64] {
        self.path.values()
    }

    pub fn grid(&self) -> &UniformGrid {
        self.path.grid()
    }

    pub fn h_lower(&self) -> f64 {
        self.h_lower
    }

    pub fn h_upper(&self) -> f64 {
        self.h_upper
    }

    pub fn modulus(&self) -> Option<Modulus> {
        self.modulus
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    pub fn jumps(&self) -> &[usize] {
        &self.jumps
    }

    /// Value at the last node `<= t`; times before the grid take the first
    /// value.
    pub fn at(&self, t: f64) -> f64 {
        self.path.value_at_or_before(t)
    }

    /// Realized range of the sampled values.
    pub fn realized_range(&self) -> (f64, f64) {
        (self.path.min(), self.path.max())
    }
}

/// Recipe for a Hurst path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HurstSpec {
    Constant {
        value: f64,
    },
    /// Piecewise-linear interpolation of `(t, H)` pairs, flat outside.
    DeterministicFunction {
        points: Vec<(f64, f64)>,
    },
    /// `levels[i]` on `[breakpoints[i-1], breakpoints[i])`.
    Step {
        levels: Vec<f64>,
        breakpoints: Vec<f64>,
    },
    /// `center + amplitude · tanh(B_t)` with `B` a standard fBm independent
    /// of the Brownian driver.
    TanhOfFbm {
        center: f64,
        amplitude: f64,
        driver_hurst: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        driver_seed: Option<u64>,
    },
    /// One level per path, drawn from a finite law.
    StationaryConstantPerPath {
        values: Vec<f64>,
        weights: Vec<f64>,
    },
}

fn in_unit(h: f64) -> bool {
    h.is_finite() && h > 0.0 && h < 1.0
}

impl HurstSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            HurstSpec::Constant { value } if in_unit(*value) => Ok(()),
            HurstSpec::Constant { value } => Err(Error::param(format!("constant H {value} outside (0, 1)"))),
            HurstSpec::DeterministicFunction { points } => {
                if points.is_empty() {
                    return Err(Error::param("deterministic Hurst function needs points"));
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::param("Hurst table times must be strictly increasing"));
                }
                if let Some(p) = points.iter().find(|p| !in_unit(p.1) || !p.0.is_finite()) {
                    return Err(Error::param(format!("Hurst table entry {p:?} invalid")));
                }
                Ok(())
            }
            HurstSpec::Step { levels, breakpoints } => {
                if levels.len() != breakpoints.len() + 1 {
                    return Err(Error::param("step needs one more level than breakpoints"));
                }
                if breakpoints.windows(2).any(|w| !(w[1] > w[0])) || breakpoints.iter().any(|b| !b.is_finite()) {
                    return Err(Error::param("breakpoints must be finite and increasing"));
                }
                if let Some(h) = levels.iter().find(|h| !in_unit(**h)) {
                    return Err(Error::param(format!("step level {h} outside (0, 1)")));
                }
                Ok(())
            }
            HurstSpec::TanhOfFbm { center, amplitude, driver_hurst, .. } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return Err(Error::param("amplitude must be nonnegative"));
                }
                if !(in_unit(center - amplitude) && in_unit(center + amplitude)) {
                    return Err(Error::param(format!(
                        "center ± amplitude = [{}, {}] leaves (0, 1)",
                        center - amplitude,
                        center + amplitude
                    )));
                }
                if !in_unit(*driver_hurst) {
                    return Err(Error::param("driver Hurst outside (0, 1)"));
                }
                Ok(())
            }
            HurstSpec::StationaryConstantPerPath { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return Err(Error::param("stationary law needs matching values and weights"));
                }
                if values.iter().any(|h| !in_unit(*h)) {
                    return Err(Error::param("stationary law charges values outside (0, 1)"));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::param("stationary law weights must be nonnegative"));
                }
                Ok(())
            }
        }
    }

    /// True when every path of the spec is the same function.
    pub fn is_deterministic(&self) -> bool {
        matches!(
            self,
            HurstSpec::Constant { .. } | HurstSpec::DeterministicFunction { .. } | HurstSpec::Step { .. }
        )
    }

    /// Declared `(H_lower, H_upper)`.
    pub fn bounds(&self) -> (f64, f64) {
        let min_max = |vals: &mut dyn Iterator<Item = f64>| {
            vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        match self {
            HurstSpec::Constant { value } => (*value, *value),
            HurstSpec::DeterministicFunction { points } => min_max(&mut points.iter().map(|p| p.1)),
            HurstSpec::Step { levels, .. } => min_max(&mut levels.iter().copied()),
            HurstSpec::TanhOfFbm { center, amplitude, .. } => (center - amplitude, center + amplitude),
            HurstSpec::StationaryConstantPerPath { values, .. } => min_max(&mut values.iter().copied()),
        }
    }
}

/// Samples `spec` on `grid`. Randomized specs draw from streams keyed by
/// `(seed, stream_id)` that are disjoint from the Brownian driver.
pub fn generate_hurst(spec: &HurstSpec, grid: UniformGrid, seed: u64, stream_id: u64) -> Result<HurstPath> {
    spec.validate()?;
    let grid = UniformGrid::new(grid.t_min(), grid.t_max(), grid.n_cells())?;
    let (lo, hi) = spec.bounds();
    match spec {
        HurstSpec::Constant { value } => {
            let path = SampledPath::new(grid, vec![*value; grid.n_nodes()], "H")?;
            HurstPath::new(path, lo, hi, Some(Modulus::lipschitz(0.0)), true, vec![])
        }
        HurstSpec::DeterministicFunction { points } => {
            let values: Vec<f64> = grid.nodes().map(|t| interpolate_table(points, t)).collect();
            let slope = points
                .windows(2)
                .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                .fold(0.0, f64::max);
            let path = SampledPath::new(grid, values, "H")?;
            HurstPath::new(path, lo, hi, Some(Modulus::lipschitz(slope)), true, vec![])
        }
        HurstSpec::Step { levels, breakpoints } => {
            let level_at = |t: f64| {
                let tol = 1e-9 * grid.step();
                levels[breakpoints.iter().filter(|&&b| t + tol >= b).count()]
            };
            let values: Vec<f64> = grid.nodes().map(level_at).collect();
            let jumps: Vec<usize> = (1..values.len()).filter(|&k| values[k] != values[k - 1]).collect();
            let path = SampledPath::new(grid, values, "H")?;
            let continuous = jumps.is_empty();
            HurstPath::new(path, lo, hi, None, continuous, jumps)
        }
        HurstSpec::TanhOfFbm { center, amplitude, driver_hurst, driver_seed } => {
            if grid.t_min() != 0.0 {
                return Err(Error::GridMismatch("tanh-of-fBm Hurst paths start at t = 0".into()));
            }
            let sampler = FbmSampler::new(*driver_hurst, grid, Normalization::Standard)?;
            let driver = sampler.sample(driver_seed.unwrap_or(seed), stream_id, Domain::HurstDriver);
            let values: Vec<f64> = driver.values().iter().map(|b| center + amplitude * b.tanh()).collect();
            let path = SampledPath::new(grid, values, "H")?;
            HurstPath::new(path, lo, hi, None, true, vec![])
        }
        HurstSpec::StationaryConstantPerPath { values, weights } => {
            let mut rng = rng::stream(seed, stream_id, Domain::HurstDraw);
            let total: f64 = weights.iter().sum();
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut level = *values.last().expect("validated non-empty");
            for (v, w) in values.iter().zip(weights) {
                acc += w;
                if u < acc {
                    level = *v;
                    break;
                }
            }
            let path = SampledPath::new(grid, vec![level; grid.n_nodes()], "H")?;
            HurstPath::new(path, lo, hi, Some(Modulus::lipschitz(0.0)), true, vec![])
        }
    }
}

fn interpolate_table(points: &[(f64, f64)], t: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= t);
    let (t0, h0) = points[i - 1];
    let (t1, h1) = points[i];
    h0 + (h1 - h0) * (t - t0) / (t1 - t0)
}

/// Lower-semicontinuous envelope `H*_t = lim inf_{r → t} H_r` on the grid.
///
/// Continuous paths are returned unchanged. At a jump node the value becomes
/// the minimum of the left limit (previous node) and the right limit (the
/// node itself).
pub fn lsc_variant(h: &HurstPath) -> HurstPath {
    if h.continuous || h.jumps.is_empty() {
        return h.clone();
    }
    let mut values = h.values().to_vec();
    for &k in &h.jumps {
        values[k] = values[k].min(h.values()[k - 1]);
    }
    let path = SampledPath::new(*h.grid(), values, h.path.label().to_string())
        .expect("envelope of finite values is finite");
    HurstPath {
        path,
        h_lower: h.h_lower,
        h_upper: h.h_upper,
        modulus: None,
        continuous: false,
        jumps: h.jumps.clone(),
    }
}
