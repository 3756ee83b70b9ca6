//! Statistical checks on simulated paths: local Hölder estimation, moment
//! ratios, and convergence of rescaled increments.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{local_cov_limit, norm_const_a_unchecked, Law};
use crate::grid::{SampledPath, UniformGrid};
use crate::hurst::{generate_hurst, HurstPath, HurstSpec};
use crate::kernels::KernelSpec;
use crate::simulate::{ensemble, rescale_increments, SimConfig, SimPlan};
use crate::special::normal_cdf;

/// Slope above which moment ratios count as bounded in `h`.
pub const KC_SLOPE_THRESHOLD: f64 = -0.1;
/// Draws of the Hurst driver used to approximate the law of `H_t`.
pub const LAW_SAMPLES: usize = 4000;
/// Stream offset that keeps law draws disjoint from simulated paths.
const LAW_STREAM_OFFSET: u64 = 1 << 40;

/// Median; sorts in place. NaN for an empty slice.
pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Least-squares slope and its standard error.
fn regress(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    let se = if x.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, se)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub t: f64,
    pub alpha_hat: f64,
    pub scales_used: Vec<f64>,
    pub stderr: f64,
    pub window: f64,
}

/// Local Hölder exponent at `t` from the log-log slope of mean absolute
/// increments at scales `window·2^{-j}`, `j = 1..=n_scales`. Every scale
/// averages the increments starting in the window centred at `t`, so the
/// path must extend to `t + window`.
pub fn estimate_holder(path: &SampledPath, t: f64, n_scales: usize, window: f64) -> Result<HolderEstimate> {
    if n_scales < 3 {
        return Err(Error::param("at least 3 scales are needed"));
    }
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::param("window must be positive"));
    }
    let g = path.grid();
    let dt = g.step();
    let lo = t - 0.5 * window;
    let hi = t + 0.5 * window;
    let tol = 1e-9 * dt;
    if lo < g.t_min() - tol || t + window > g.t_max() + tol {
        return Err(Error::Range(format!("window [{lo}, {}] leaves the grid", t + window)));
    }
    let smallest = window / 2f64.powi(n_scales as i32);
    if smallest < dt * (1.0 - 1e-9) {
        return Err(Error::InsufficientResolution(format!(
            "smallest scale {smallest} is below the grid step {dt}"
        )));
    }
    let vals = path.values();
    let first = ((lo - g.t_min()) / dt - 1e-9).ceil() as usize;
    let mut log_h = Vec::with_capacity(n_scales);
    let mut log_m = Vec::with_capacity(n_scales);
    let mut scales = Vec::with_capacity(n_scales);
    let mut degenerate = false;
    for j in 1..=n_scales {
        let lag = (window / 2f64.powi(j as i32) / dt).round() as usize;
        let last = ((hi - g.t_min()) / dt + 1e-9).floor() as usize;
        let count = last + 1 - first;
        let mean = (first..=last).map(|u| (vals[u + lag] - vals[u]).abs()).sum::<f64>() / count as f64;
        let h = lag as f64 * dt;
        scales.push(h);
        if mean <= 0.0 {
            degenerate = true;
            continue;
        }
        log_h.push(h.ln());
        log_m.push(mean.ln());
    }
    let (alpha, stderr) = if degenerate || log_h.len() < 3 { (1.5, 0.0) } else { regress(&log_h, &log_m) };
    Ok(HolderEstimate { t, alpha_hat: alpha.clamp(0.0, 1.5), scales_used: scales, stderr, window })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KcVerdict {
    Bounded,
    UnboundedTrend,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KcRatio {
    pub t: f64,
    pub h: f64,
    pub ratio: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct KcCheckReport {
    pub p: f64,
    pub exponent_field: HurstPath,
    pub ratios: Vec<KcRatio>,
    pub verdict: KcVerdict,
    pub slope: f64,
}

impl KcCheckReport {
    /// Mean ratio over the whole table with the standard error of that mean.
    pub fn pooled_ratio(&self) -> (f64, f64) {
        let n = self.ratios.len() as f64;
        let m = self.ratios.iter().map(|r| r.ratio).sum::<f64>() / n;
        let se = self.ratios.iter().map(|r| r.stderr * r.stderr).sum::<f64>().sqrt() / n;
        (m, se)
    }

    /// CSV with header `t,h,ratio,stderr`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,h,ratio,stderr")?;
        for r in &self.ratios {
            writeln!(out, "{},{},{:.17e},{:.17e}", r.t, r.h, r.ratio, r.stderr)?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let (pooled, pooled_se) = self.pooled_ratio();
        serde_json::json!({
            "p": self.p,
            "verdict": self.verdict,
            "slope": self.slope,
            "slope_threshold": KC_SLOPE_THRESHOLD,
            "pooled_ratio": pooled,
            "pooled_stderr": pooled_se,
        })
    }
}

/// Empirical `E|Y_{t+h} - Y_t|^p / h^{p a_t}` over `(t, h)`, with `a_t` read
/// at the left index of each path. `exponent_field` holds one path per
/// sample path, or a single path shared by all.
pub fn kc_moment_check(
    paths: &[SampledPath],
    exponent_field: &[HurstPath],
    p: f64,
    t_grid: &[f64],
    h_grid: &[f64],
) -> Result<KcCheckReport> {
    if paths.is_empty() {
        return Err(Error::Empty("path set".into()));
    }
    if exponent_field.is_empty() {
        return Err(Error::Empty("exponent field".into()));
    }
    if exponent_field.len() != 1 && exponent_field.len() != paths.len() {
        return Err(Error::param("need one exponent path or one per sample path"));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::param(format!("p must be positive, got {p}")));
    }
    if t_grid.is_empty() || h_grid.len() < 2 {
        return Err(Error::Empty("t grid or h grid (at least two h values)".into()));
    }
    let grid = *paths[0].grid();
    if paths.iter().any(|q| *q.grid() != grid) {
        return Err(Error::GridMismatch("paths must share one grid".into()));
    }
    let node = |u: f64| grid.index_of(u).ok_or_else(|| Error::Range(format!("{u} is not a grid node")));
    let mut ratios = Vec::with_capacity(t_grid.len() * h_grid.len());
    for &t in t_grid {
        let i = node(t)?;
        for &h in h_grid {
            let k = node(t + h)?;
            let samples: Vec<f64> = paths
                .iter()
                .enumerate()
                .map(|(n, q)| {
                    let a = exponent_field[if exponent_field.len() == 1 { 0 } else { n }].at(t);
                    (q.values()[k] - q.values()[i]).abs().powf(p) / h.powf(p * a)
                })
                .collect();
            let (ratio, stderr) = mean_se(&samples);
            ratios.push(KcRatio { t, h, ratio, stderr });
        }
    }
    let mut log_h = Vec::with_capacity(h_grid.len());
    let mut log_max = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let max = ratios.iter().filter(|r| r.h == h).map(|r| r.ratio).fold(0.0, f64::max);
        log_h.push(h.ln());
        log_max.push(max.ln());
    }
    let (slope, _) = regress(&log_h, &log_max);
    let verdict = if slope > KC_SLOPE_THRESHOLD { KcVerdict::Bounded } else { KcVerdict::UnboundedTrend };
    Ok(KcCheckReport { p, exponent_field: exponent_field[0].clone(), ratios, verdict, slope })
}

/// Law of `H_t` induced by a Hurst spec. Random specs are approximated by
/// independent draws on `grid`, disjoint from the simulation streams.
pub fn hurst_law_at(spec: &HurstSpec, t: f64, grid: UniformGrid, seed: u64, n_samples: usize) -> Result<Law> {
    match spec {
        HurstSpec::StationaryConstantPerPath { values, weights } => {
            spec.validate()?;
            Ok(Law::Mixture { values: values.clone(), weights: weights.clone() })
        }
        _ if spec.is_deterministic() => Ok(Law::point(generate_hurst(spec, grid, seed, 0)?.at(t))),
        _ => {
            let values = (0..n_samples as u64)
                .map(|i| generate_hurst(spec, grid, seed, LAW_STREAM_OFFSET + i).map(|h| h.at(t)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Law::Samples { values })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescalingEntry {
    pub h: f64,
    pub r: f64,
    pub v: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub limit: f64,
    pub limit_stderr: f64,
}

impl RescalingEntry {
    pub fn abs_err(&self) -> f64 {
        (self.empirical - self.limit).abs()
    }

    /// Combined standard error of the empirical value and the limit.
    pub fn total_se(&self) -> f64 {
        self.stderr.hypot(self.limit_stderr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescalingReport {
    pub t: f64,
    pub h_values: Vec<f64>,
    pub pairs: Vec<(f64, f64)>,
    /// Row-major over `(h, pair)`.
    pub entries: Vec<RescalingEntry>,
    pub max_abs_err: Vec<f64>,
    pub ks_distance: Vec<f64>,
    pub n_paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescalingChecks {
    /// Every pair within 3 SE of the limit at the smallest `h`.
    pub final_within_3se: bool,
    /// Errors non-increasing as `h` decreases, up to 2 SE slack.
    pub monotone: bool,
}

impl RescalingReport {
    pub fn entry(&self, h_index: usize, pair_index: usize) -> &RescalingEntry {
        &self.entries[h_index * self.pairs.len() + pair_index]
    }

    pub fn checks(&self) -> RescalingChecks {
        let last = self.h_values.len() - 1;
        let np = self.pairs.len();
        let final_within_3se = (0..np).all(|p| {
            let e = self.entry(last, p);
            e.abs_err() <= 3.0 * e.total_se()
        });
        let monotone = (0..np).all(|p| {
            (1..self.h_values.len()).all(|i| {
                let (a, b) = (self.entry(i - 1, p), self.entry(i, p));
                b.abs_err() <= a.abs_err() + 2.0 * a.stderr.hypot(b.stderr)
            })
        });
        RescalingChecks { final_within_3se, monotone }
    }

    /// CSV with header `h,r,v,empirical,stderr,limit,limit_stderr,abs_err`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "h,r,v,empirical,stderr,limit,limit_stderr,abs_err")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                e.h,
                e.r,
                e.v,
                e.empirical,
                e.stderr,
                e.limit,
                e.limit_stderr,
                e.abs_err()
            )?;
        }
        Ok(())
    }
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Monte Carlo check that the covariance of `h^{-H_t}(X_{t+hr} - X_t)`
/// approaches the local limit as `h` decreases. One simulated path serves
/// every `h`; the law of `H_t` comes from [`hurst_law_at`].
pub fn rescaling_test(
    kernel: &KernelSpec,
    hurst: &HurstSpec,
    cfg: &SimConfig,
    t: f64,
    h_values: &[f64],
    rv_pairs: &[(f64, f64)],
    n_paths: usize,
) -> Result<RescalingReport> {
    if h_values.is_empty() || rv_pairs.is_empty() {
        return Err(Error::Empty("h values or (r, v) pairs".into()));
    }
    if h_values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::param("h values must be decreasing"));
    }
    if n_paths < 2 {
        return Err(Error::param("at least two paths are needed"));
    }
    let mut rs: Vec<f64> = vec![0.0, 1.0];
    for &(r, v) in rv_pairs {
        for x in [r, v] {
            if !rs.contains(&x) {
                rs.push(x);
            }
        }
    }
    let pos = |x: f64| rs.iter().position(|&y| y == x).expect("collected above");
    let (lo, hi) = hurst.bounds();
    let plan = SimPlan::new(kernel, lo, hi, cfg)?;
    let hgrid = plan.hurst_grid();
    let fixed = if hurst.is_deterministic() { Some(generate_hurst(hurst, hgrid, cfg.seed, 0)?) } else { None };
    let nh = h_values.len();
    let np = rv_pairs.len();

    // per path: products for every (h, pair), then the r = 1 marginals
    let per_path = ensemble(n_paths, |i| {
        let stream = cfg.stream_id + i;
        let hp = match &fixed {
            Some(p) => p.clone(),
            None => generate_hurst(hurst, hgrid, cfg.seed, stream)?,
        };
        let x = plan.ito(&plan.draw(cfg.seed, stream), &hp)?;
        let h_t = hp.at(t);
        let mut out = Vec::with_capacity(nh * (np + 1));
        let mut marg = Vec::with_capacity(nh);
        for &h in h_values {
            let resc = rescale_increments(&x, h_t, t, h, &rs)?;
            for &(r, v) in rv_pairs {
                out.push(resc.values[pos(r)] * resc.values[pos(v)]);
            }
            marg.push(resc.values[pos(1.0)]);
        }
        out.extend(marg);
        Ok(out)
    })?;

    let h_law = hurst_law_at(hurst, t, hgrid, cfg.seed, LAW_SAMPLES)?;
    let sigma = kernel.sigma.at(t);
    let sigma_law = Law::point(sigma);
    let limits = rv_pairs
        .iter()
        .map(|&(r, v)| local_cov_limit(r, v, &h_law, &sigma_law))
        .collect::<Result<Vec<_>>>()?;

    let mut entries = Vec::with_capacity(nh * np);
    let mut max_abs_err = Vec::with_capacity(nh);
    let mut ks = Vec::with_capacity(nh);
    let support = thin(&h_law.support(), 1000);
    let scales: Vec<f64> = support.iter().map(|&h| sigma.abs() * norm_const_a_unchecked(h).sqrt()).collect();
    let mixture_cdf = |x: f64| scales.iter().map(|s| normal_cdf(x / s)).sum::<f64>() / scales.len() as f64;
    let weights = match &h_law {
        Law::Mixture { weights, .. } => Some(weights.clone()),
        _ => None,
    };
    for (hi, &h) in h_values.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (pi, &(r, v)) in rv_pairs.iter().enumerate() {
            let xs: Vec<f64> = per_path.iter().map(|row| row[hi * np + pi]).collect();
            let (empirical, stderr) = mean_se(&xs);
            let l = limits[pi];
            let e = RescalingEntry { h, r, v, empirical, stderr, limit: l.value, limit_stderr: l.stderr };
            worst = worst.max(e.abs_err());
            entries.push(e);
        }
        max_abs_err.push(worst);
        let marg: Vec<f64> = per_path.iter().map(|row| row[nh * np + hi]).collect();
        let d = match &weights {
            Some(w) => {
                let total: f64 = w.iter().sum();
                ks_distance(&marg, |x| {
                    scales.iter().zip(w).map(|(s, w)| w * normal_cdf(x / s)).sum::<f64>() / total
                })
            }
            None => ks_distance(&marg, mixture_cdf),
        };
        ks.push(d);
    }
    Ok(RescalingReport {
        t,
        h_values: h_values.to_vec(),
        pairs: rv_pairs.to_vec(),
        entries,
        max_abs_err,
        ks_distance: ks,
        n_paths,
    })
}

fn thin(values: &[f64], max: usize) -> Vec<f64> {
    if values.len() <= max {
        return values.to_vec();
    }
    let step = values.len() as f64 / max as f64;
    (0..max).map(|i| values[(i as f64 * step) as usize]).collect()
}

/// Settings of the rough-Hurst contrast between the field and the adapted
/// process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig2Config {
    pub hurst: HurstSpec,
    pub n_cells: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub points: Vec<f64>,
    pub window: f64,
    pub n_scales: usize,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            hurst: HurstSpec::TanhOfFbm { center: 0.9, amplitude: 0.05, driver_hurst: 0.2, driver_seed: None },
            n_cells: 1 << 14,
            n_paths: 20,
            seed: 2,
            points: vec![0.2, 0.35, 0.5, 0.65, 0.8],
            window: 1.0 / 32.0,
            n_scales: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig2Row {
    pub path: u64,
    pub t: f64,
    pub h_t: f64,
    pub alpha_field: f64,
    pub alpha_ito: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Summary {
    pub rows: Vec<Fig2Row>,
    pub median_alpha_field: f64,
    pub median_alpha_ito: f64,
    pub median_h: f64,
}

impl Fig2Summary {
    /// CSV with header `path,t,H,alpha_mbm,alpha_ito_mbm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "path,t,H,alpha_mbm,alpha_ito_mbm")?;
        for r in &self.rows {
            writeln!(out, "{},{},{:.17e},{:.17e},{:.17e}", r.path, r.t, r.h_t, r.alpha_field, r.alpha_ito)?;
        }
        Ok(())
    }
}

/// Simulates coupled pairs `(B^H, K^H)` from one driver per path and
/// estimates the local Hölder exponent of both at the configured points.
pub fn fig2_contrast(cfg: &Fig2Config) -> Result<Fig2Summary> {
    let grid = UniformGrid::new(0.0, 1.0, cfg.n_cells)?;
    let mut sim = SimConfig::new(grid).with_seed(cfg.seed, 0);
    sim.substeps = 1;
    let (lo, hi) = cfg.hurst.bounds();
    let plan = SimPlan::new(&KernelSpec::ito_mbm(), lo, hi, &sim)?;
    let per_path = ensemble(cfg.n_paths, |i| {
        let hp = generate_hurst(&cfg.hurst, plan.hurst_grid(), cfg.seed, i)?;
        let draw = plan.draw(cfg.seed, i);
        let k = plan.ito(&draw, &hp)?;
        let b = plan.field(&draw, &hp)?;
        cfg.points
            .iter()
            .map(|&t| {
                Ok(Fig2Row {
                    path: i,
                    t,
                    h_t: hp.at(t),
                    alpha_field: estimate_holder(&b, t, cfg.n_scales, cfg.window)?.alpha_hat,
                    alpha_ito: estimate_holder(&k, t, cfg.n_scales, cfg.window)?.alpha_hat,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<Fig2Row> = per_path.into_iter().flatten().collect();
    let mut b: Vec<f64> = rows.iter().map(|r| r.alpha_field).collect();
    let mut k: Vec<f64> = rows.iter().map(|r| r.alpha_ito).collect();
    let mut h: Vec<f64> = rows.iter().map(|r| r.h_t).collect();
    Ok(Fig2Summary { median_alpha_field: median(&mut b), median_alpha_ito: median(&mut k), median_h: median(&mut h), rows })
}
