use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{HorizonRule, SimConfig, SingularCell, WeightRule};
use crate::error::{Error, Result};
use crate::grid::{SampledPath, UniformGrid};
use crate::hurst::HurstPath;
use crate::kernels::{truncation_horizon, KernelFamily, KernelSpec, Sigma, MAX_HORIZON};
use crate::noise::{make_noise, NoiseGrid};
use crate::rng::{self, Domain};
use crate::special::{Chebyshev, GaussRule};

/// Ratio between consecutive far-field block edges.
const FAR_RATIO: f64 = 1.05;
/// Chebyshev nodes in `t` for the far field and the tail.
const T_NODES: usize = 24;
/// Relative accuracy targeted by the interpolation in `H`.
const H_INTERP_TOL: f64 = 1e-10;
const MAX_H_NODES: usize = 64;
/// Lower bound of the automatic horizon; beyond it the kernel is close to
/// proportional in `t`, which the rank-one tail relies on.
const AUTO_MIN_HORIZON: f64 = 1e3;

/// Chebyshev interpolation in the Hurst exponent over the declared bounds.
#[derive(Debug, Clone)]
struct HInterp {
    cheb: Option<Chebyshev>,
    nodes: Vec<f64>,
}

impl HInterp {
    fn new(lo: f64, hi: f64, log_scales: (f64, f64)) -> Self {
        if hi - lo <= 0.0 {
            return Self { cheb: None, nodes: vec![lo] };
        }
        let (c_lo, c_hi) = log_scales;
        let probes: Vec<f64> = (0..=8).map(|i| c_lo + (c_hi - c_lo) * i as f64 / 8.0).collect();
        let mut n = 2;
        loop {
            let cheb = Chebyshev::new(lo, hi, n);
            let mut worst: f64 = 0.0;
            for &c in &probes {
                let vals: Vec<f64> = cheb.points().iter().map(|h| (c * h).exp()).collect();
                for i in 0..=40 {
                    let h = lo + (hi - lo) * (i as f64 + 0.5) / 41.0;
                    let want = (c * h).exp();
                    worst = worst.max(((cheb.interpolate(&vals, h) - want) / want).abs());
                }
            }
            if worst <= H_INTERP_TOL || n >= MAX_H_NODES {
                let nodes = cheb.points().to_vec();
                return Self { cheb: Some(cheb), nodes };
            }
            n += 2;
        }
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn basis(&self, h: f64, out: &mut [f64]) {
        match &self.cheb {
            None => out[0] = 1.0,
            Some(c) => c.basis_into(h, out),
        }
    }
}

/// Where the far field and tail are tabulated in `t`.
#[derive(Debug, Clone)]
enum TNodes {
    /// One entry per output node.
    Direct,
    /// Chebyshev nodes on `[0, T]` with the basis rows of every output node.
    Cheb { points: Vec<f64>, rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone)]
struct FarField {
    edges: Vec<f64>,
    /// `weights[p][q][b]`: block-averaged kernel at H node `p`, t node `q`.
    weights: Vec<Vec<Vec<f64>>>,
    /// `tail[p][q]`: signed rank-one amplitude of everything beyond the horizon.
    tail: Vec<Vec<f64>>,
}

/// Random inputs of one path: the Brownian driver on the fine grid plus the
/// auxiliary normals of the far field, the tail, and the singular cells.
#[derive(Debug, Clone)]
pub struct Draw {
    noise: NoiseGrid,
    far: Vec<f64>,
    tail: f64,
    residual: Vec<f64>,
}

impl Draw {
    /// Driver increments on `[-M_near, T]`.
    pub fn noise(&self) -> &NoiseGrid {
        &self.noise
    }
}

/// Precomputed weights for one kernel, Hurst range and configuration. A plan
/// is immutable and serves any number of paths.
pub struct SimPlan {
    family: KernelFamily,
    sigma: Sigma,
    singular: SingularCell,
    out: UniformGrid,
    sub: usize,
    delta: f64,
    j0: usize,
    fine: UniformGrid,
    horizon: f64,
    h_lower: f64,
    h_upper: f64,
    interp: HInterp,
    fft_len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Spectra of the lag tables, pre-divided by the FFT length.
    spectra: Vec<Vec<Complex64>>,
    /// `anchors[p][j]` for fine cells left of 0.
    anchors: Vec<Vec<f64>>,
    t_nodes: TNodes,
    far: FarField,
    rule: GaussRule,
}

impl std::fmt::Debug for SimPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimPlan")
            .field("family", &self.family)
            .field("out", &self.out)
            .field("substeps", &self.sub)
            .field("horizon", &self.horizon)
            .field("h_nodes", &self.interp.len())
            .field("far_blocks", &self.far.edges.len().saturating_sub(1))
            .finish()
    }
}

impl SimPlan {
    /// Builds the plan for Hurst paths with values in `[h_lower, h_upper]`.
    pub fn new(kernel: &KernelSpec, h_lower: f64, h_upper: f64, cfg: &SimConfig) -> Result<Self> {
        kernel.validate()?;
        cfg.validate()?;
        if !(h_lower > 0.0 && h_lower <= h_upper && h_upper < 1.0) {
            return Err(Error::param(format!("Hurst bounds [{h_lower}, {h_upper}] not inside (0, 1)")));
        }
        let out = cfg.grid;
        let n_out = out.n_cells();
        let big_t = out.t_max();
        let step = out.step();
        let sub = cfg.substeps;
        let delta = step / sub as f64;
        let near_cells = (big_t.max(2.0) / step - 1e-9).ceil() as usize;
        let m_near = near_cells as f64 * step;
        let j0 = near_cells * sub;
        let n_fine = j0 + n_out * sub;
        let fine = UniformGrid::new(-m_near, big_t, n_fine)?;

        let horizon = match cfg.horizon {
            HorizonRule::Auto => {
                match truncation_horizon(&kernel.bounds, step, cfg.tol_truncation) {
                    Ok(m) => m,
                    Err(Error::HorizonTooLarge { .. }) => MAX_HORIZON,
                    Err(e) => return Err(e),
                }
                .max(AUTO_MIN_HORIZON)
                .max(m_near)
            }
            HorizonRule::Fixed(m) => {
                if !(m.is_finite() && m >= m_near) {
                    return Err(Error::HorizonInsufficient { required: m_near, available: m });
                }
                m
            }
        };

        let family = kernel.family;
        let rule = GaussRule::new(24);
        let interp = HInterp::new(h_lower, h_upper, ((delta / 2.0).ln(), (4.0 * horizon).ln()));

        let fft_len = (2 * n_fine + 2).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(fft_len);
        let inv = planner.plan_fft_inverse(fft_len);

        let mut spectra = Vec::with_capacity(interp.len());
        let mut anchors = Vec::with_capacity(interp.len());
        for &h in &interp.nodes {
            let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
            for (m, slot) in buf.iter_mut().enumerate().take(n_fine + 1).skip(1) {
                let w = lag_weight(&family, m, h, delta, cfg.weights, cfg.singular_cell, &rule);
                *slot = Complex64::new(w / fft_len as f64, 0.0);
            }
            fwd.process(&mut buf);
            spectra.push(buf);
            let a: Vec<f64> = (0..j0)
                .map(|j| anchor_weight(&family, j0 - j, h, delta, cfg.weights, &rule))
                .collect();
            anchors.push(a);
        }

        let t_nodes = if out.n_nodes() <= T_NODES || matches!(family, KernelFamily::Truncated { .. }) {
            TNodes::Direct
        } else {
            let cheb = Chebyshev::new(0.0, big_t, T_NODES);
            let rows = out
                .nodes()
                .map(|t| {
                    let mut row = vec![0.0; T_NODES];
                    cheb.basis_into(t, &mut row);
                    row
                })
                .collect();
            TNodes::Cheb { points: cheb.points().to_vec(), rows }
        };
        let t_points: Vec<f64> = match &t_nodes {
            TNodes::Direct => out.nodes().collect(),
            TNodes::Cheb { points, .. } => points.clone(),
        };
        let far = build_far(&family, m_near, horizon, &interp.nodes, &t_points);

        Ok(Self {
            family,
            sigma: kernel.sigma.clone(),
            singular: cfg.singular_cell,
            out,
            sub,
            delta,
            j0,
            fine,
            horizon,
            h_lower,
            h_upper,
            interp,
            fft_len,
            fwd,
            inv,
            spectra,
            anchors,
            t_nodes,
            far,
            rule,
        })
    }

    pub fn output_grid(&self) -> &UniformGrid {
        &self.out
    }

    /// Driver grid `[-M_near, T]` with step `Δ / substeps`.
    pub fn driver_grid(&self) -> &UniformGrid {
        &self.fine
    }

    /// Grid on `[0, T]` at driver resolution, for sampling Hurst paths.
    pub fn hurst_grid(&self) -> UniformGrid {
        UniformGrid::new(0.0, self.out.t_max(), self.out.n_cells() * self.sub).expect("valid by construction")
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn near_horizon(&self) -> f64 {
        -self.fine.t_min()
    }

    pub fn hurst_nodes(&self) -> usize {
        self.interp.len()
    }

    pub fn far_blocks(&self) -> usize {
        self.far.edges.len().saturating_sub(1)
    }

    pub fn draw(&self, seed: u64, stream_id: u64) -> Draw {
        let noise = make_noise(seed, stream_id, self.fine).expect("driver grid is valid");
        self.complete_draw(noise, seed, stream_id)
    }

    /// Uses the given driver increments, which must live on
    /// [`SimPlan::driver_grid`]; the remaining normals come from `(seed, stream_id)`.
    pub fn draw_with_noise(&self, noise: NoiseGrid, seed: u64, stream_id: u64) -> Result<Draw> {
        let g = noise.grid();
        let tol = 1e-9 * self.delta;
        if g.n_cells() != self.fine.n_cells()
            || (g.t_min() - self.fine.t_min()).abs() > tol
            || (g.t_max() - self.fine.t_max()).abs() > tol
        {
            return Err(Error::GridMismatch(format!(
                "driver on [{}, {}] with {} cells, plan needs [{}, {}] with {}",
                g.t_min(),
                g.t_max(),
                g.n_cells(),
                self.fine.t_min(),
                self.fine.t_max(),
                self.fine.n_cells()
            )));
        }
        Ok(self.complete_draw(noise, seed, stream_id))
    }

    fn complete_draw(&self, noise: NoiseGrid, seed: u64, stream_id: u64) -> Draw {
        let mut far = vec![0.0; self.far_blocks()];
        let mut frng = rng::stream(seed, stream_id, Domain::FarField);
        rng::fill_standard_normal(&mut frng, &mut far);
        for (x, w) in far.iter_mut().zip(self.far.edges.windows(2)) {
            *x *= (w[1] - w[0]).sqrt();
        }
        let tail = rng::standard_normal(&mut rng::stream(seed, stream_id, Domain::Tail));
        let mut residual = vec![0.0; self.out.n_nodes()];
        let mut rrng = rng::stream(seed, stream_id, Domain::SingularResidual);
        rng::fill_standard_normal(&mut rrng, &mut residual);
        Draw { noise, far, tail, residual }
    }

    fn check_bounds(&self, hurst: &HurstPath) -> Result<()> {
        let (lo, hi) = hurst.realized_range();
        let slack = 1e-12;
        if lo < self.h_lower - slack || hi > self.h_upper + slack {
            return Err(Error::Range(format!(
                "Hurst values [{lo}, {hi}] outside the plan bounds [{}, {}]",
                self.h_lower, self.h_upper
            )));
        }
        let g = hurst.grid();
        let tol = 1e-9 * self.out.step();
        if g.t_min() > tol || g.t_max() < self.out.t_max() - tol {
            return Err(Error::GridMismatch(format!(
                "Hurst path on [{}, {}] does not cover [0, {}]",
                g.t_min(),
                g.t_max(),
                self.out.t_max()
            )));
        }
        Ok(())
    }

    fn check_resolution(&self, hurst: &HurstPath) -> Result<()> {
        let (lo, hi) = hurst.realized_range();
        if lo != hi && hurst.grid().step() > self.delta * (1.0 + 1e-9) {
            return Err(Error::GridMismatch(format!(
                "Hurst step {} is coarser than the driver step {}",
                hurst.grid().step(),
                self.delta
            )));
        }
        Ok(())
    }

    fn out_index(&self, k: usize) -> usize {
        self.j0 + k * self.sub
    }

    /// Standard deviation of the singular-cell residual at exponent `h`.
    fn residual_sd(&self, h: f64) -> f64 {
        if self.singular != SingularCell::VarianceMatched {
            return 0.0;
        }
        let d = self.delta;
        let var = match self.family {
            KernelFamily::ItoMbm => d.powf(2.0 * h) * (1.0 / (2.0 * h) - 1.0 / ((h + 0.5) * (h + 0.5))),
            _ => {
                let i1 = self.family.integral(0.0, d, h, &self.rule);
                self.family.integral_sq(0.0, d, h, &self.rule) - i1 * i1 / d
            }
        };
        var.max(0.0).sqrt()
    }

    /// Whether the cell touching output node `k` is covered by the anchor,
    /// in which case its kernel vanishes identically.
    fn residual_skipped(&self, k: usize) -> bool {
        self.family.has_anchor() && self.out_index(k) <= self.j0
    }

    fn far_tail_at(&self, q_values: &[f64]) -> Vec<f64> {
        match &self.t_nodes {
            TNodes::Direct => q_values.to_vec(),
            TNodes::Cheb { rows, .. } => {
                rows.iter().map(|row| row.iter().zip(q_values).map(|(b, v)| b * v).sum()).collect()
            }
        }
    }

    /// Far-field plus tail contribution at every t node for H-node `p`.
    fn far_tail_node(&self, p: usize, draw: &Draw) -> Vec<f64> {
        self.far.weights[p]
            .iter()
            .zip(&self.far.tail[p])
            .map(|(w, a)| w.iter().zip(&draw.far).map(|(w, x)| w * x).sum::<f64>() + a * draw.tail)
            .collect()
    }

    fn pad(&self, values: impl Iterator<Item = f64>) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (slot, v) in buf.iter_mut().zip(values) {
            slot.re = v;
        }
        buf
    }

    /// Adapted process `X_t = ∫ g_s(t) dW_s` with exponent and σ taken at
    /// the left end of every driver cell.
    pub fn ito(&self, draw: &Draw, hurst: &HurstPath) -> Result<SampledPath> {
        self.check_bounds(hurst)?;
        self.check_resolution(hurst)?;
        let np = self.interp.len();
        let n_fine = self.fine.n_cells();
        let dw = draw.noise.increments();

        let mut h_cell = Vec::with_capacity(n_fine);
        let mut s_cell = Vec::with_capacity(n_fine);
        for j in 0..n_fine {
            let s = self.fine.node(j);
            h_cell.push(hurst.at(s));
            s_cell.push(self.sigma.at(s));
        }
        let mut basis = vec![0.0; np * n_fine];
        for j in 0..n_fine {
            self.interp.basis(h_cell[j], &mut basis[j * np..(j + 1) * np]);
        }

        let mut acc = vec![Complex64::new(0.0, 0.0); self.fft_len];
        let mut anchor = 0.0;
        for p in 0..np {
            let mut buf = self.pad((0..n_fine).map(|j| basis[j * np + p] * s_cell[j] * dw[j]));
            self.fwd.process(&mut buf);
            for (a, (b, t)) in acc.iter_mut().zip(buf.iter().zip(&self.spectra[p])) {
                *a += b * t;
            }
        }
        for j in 0..self.j0 {
            let mut w = 0.0;
            for p in 0..np {
                w += basis[j * np + p] * s_cell[j] * self.anchors[p][j];
            }
            anchor += w * dw[j];
        }
        self.inv.process(&mut acc);

        let h_far = hurst.at(self.fine.t_min());
        let s_far = self.sigma.at(self.fine.t_min());
        let mut lf = vec![0.0; np];
        self.interp.basis(h_far, &mut lf);
        let mut far_q = vec![0.0; self.far.tail[0].len()];
        for (p, l) in lf.iter().enumerate() {
            for (f, v) in far_q.iter_mut().zip(self.far_tail_node(p, draw)) {
                *f += l * s_far * v;
            }
        }
        let far = self.far_tail_at(&far_q);

        let mut memo = (f64::NAN, 0.0);
        let mut values = Vec::with_capacity(self.out.n_nodes());
        for k in 0..self.out.n_nodes() {
            let i = self.out_index(k);
            let mut x = acc[i].re - anchor + far[k];
            if !self.residual_skipped(k) && i >= 1 {
                let h = h_cell[i - 1];
                if h != memo.0 {
                    memo = (h, self.residual_sd(h));
                }
                x += s_cell[i - 1] * memo.1 * draw.residual[k];
            }
            values.push(x);
        }
        self.pin_origin(&mut values);
        SampledPath::new(self.out, values, "X")
    }

    /// Anchored kernels vanish identically at `t = 0`; drop FFT round-off.
    fn pin_origin(&self, values: &mut [f64]) {
        if self.family.has_anchor() {
            values[0] = 0.0;
        }
    }

    /// The field `B(t, H_t)`: the Itô-mBm kernel with the exponent frozen at
    /// the output time, driven by the same increments as [`SimPlan::ito`].
    pub fn field(&self, draw: &Draw, hurst: &HurstPath) -> Result<SampledPath> {
        if self.family != KernelFamily::ItoMbm {
            return Err(Error::param("the mBm field requires the ito_mbm kernel family"));
        }
        self.check_bounds(hurst)?;
        let np = self.interp.len();
        let dw = draw.noise.increments();
        let n_nodes = self.out.n_nodes();

        let h_out: Vec<f64> = self.out.nodes().map(|t| hurst.at(t)).collect();
        let mut basis = vec![0.0; np * n_nodes];
        for k in 0..n_nodes {
            self.interp.basis(h_out[k], &mut basis[k * np..(k + 1) * np]);
        }
        let mut spec_dw = self.pad(dw.iter().copied());
        self.fwd.process(&mut spec_dw);

        let mut values = vec![0.0; n_nodes];
        for p in 0..np {
            let mut buf: Vec<Complex64> = spec_dw.iter().zip(&self.spectra[p]).map(|(a, t)| a * t).collect();
            self.inv.process(&mut buf);
            let anchor = self.anchors[p][..self.j0].iter().zip(&dw[..self.j0]).fold(0.0, |w, (a, d)| w + a * d);
            let far = self.far_tail_at(&self.far_tail_node(p, draw));
            for k in 0..n_nodes {
                let x = buf[self.out_index(k)].re - anchor + far[k];
                values[k] += basis[k * np + p] * x;
            }
        }
        let mut memo = (f64::NAN, 0.0);
        for k in 0..n_nodes {
            if self.residual_skipped(k) {
                continue;
            }
            if h_out[k] != memo.0 {
                memo = (h_out[k], self.residual_sd(h_out[k]));
            }
            values[k] += memo.1 * draw.residual[k];
        }
        self.pin_origin(&mut values);
        SampledPath::new(self.out, values, "B")
    }

    /// Direct `O(n · N)` evaluation of [`SimPlan::ito`] without FFTs or
    /// interpolation in `H` or `t`. Slow; meant for cross-checks.
    pub fn ito_reference(&self, draw: &Draw, hurst: &HurstPath, weights: WeightRule) -> Result<SampledPath> {
        self.check_bounds(hurst)?;
        self.check_resolution(hurst)?;
        let n_fine = self.fine.n_cells();
        let dw = draw.noise.increments();
        let f = &self.family;
        let h_far = hurst.at(self.fine.t_min());
        let s_far = self.sigma.at(self.fine.t_min());
        let t_points: Vec<f64> = self.out.nodes().collect();
        let far = build_far(f, self.near_horizon(), self.horizon, &[h_far], &t_points);
        let mut values = Vec::with_capacity(self.out.n_nodes());
        for k in 0..self.out.n_nodes() {
            let i = self.out_index(k);
            let mut x = 0.0;
            for j in 0..n_fine {
                let s = self.fine.node(j);
                let h = hurst.at(s);
                let mut w = if j < i {
                    lag_weight(f, i - j, h, self.delta, weights, self.singular, &self.rule)
                } else {
                    0.0
                };
                if j < self.j0 {
                    w -= anchor_weight(f, self.j0 - j, h, self.delta, weights, &self.rule);
                }
                x += self.sigma.at(s) * w * dw[j];
            }
            let blocks: f64 = far.weights[0][k].iter().zip(&draw.far).map(|(w, z)| w * z).sum();
            x += s_far * (blocks + far.tail[0][k] * draw.tail);
            if !self.residual_skipped(k) && i >= 1 {
                let s = self.fine.node(i - 1);
                x += self.sigma.at(s) * self.residual_sd(hurst.at(s)) * draw.residual[k];
            }
            values.push(x);
        }
        SampledPath::new(self.out, values, "X")
    }
}

impl SimPlan {
    /// Exact covariance of the discretized `X` at output nodes `k1`, `k2`
    /// for a constant exponent `h` and the plan's σ.
    pub fn scheme_covariance(&self, h: f64, k1: usize, k2: usize, weights: WeightRule) -> Result<f64> {
        if !(h >= self.h_lower && h <= self.h_upper) {
            return Err(Error::Range(format!("h = {h} outside the plan bounds")));
        }
        let n = self.out.n_nodes();
        if k1 >= n || k2 >= n {
            return Err(Error::Range(format!("node index beyond {n}")));
        }
        let f = &self.family;
        let (i1, i2) = (self.out_index(k1), self.out_index(k2));
        let weight = |i: usize, j: usize| {
            let mut w = if j < i { lag_weight(f, i - j, h, self.delta, weights, self.singular, &self.rule) } else { 0.0 };
            if j < self.j0 {
                w -= anchor_weight(f, self.j0 - j, h, self.delta, weights, &self.rule);
            }
            w * self.sigma.at(self.fine.node(j))
        };
        let mut cov = 0.0;
        for j in 0..self.fine.n_cells() {
            cov += weight(i1, j) * weight(i2, j) * self.delta;
        }
        let s_far = self.sigma.at(self.fine.t_min());
        let t = [self.out.node(k1), self.out.node(k2)];
        let far = build_far(f, self.near_horizon(), self.horizon, &[h], &t);
        for (b, e) in self.far.edges.windows(2).enumerate() {
            cov += s_far * s_far * far.weights[0][0][b] * far.weights[0][1][b] * (e[1] - e[0]);
        }
        cov += s_far * s_far * far.tail[0][0] * far.tail[0][1];
        if k1 == k2 && !self.residual_skipped(k1) {
            let s = self.sigma.at(self.fine.node(i1 - 1));
            cov += (s * self.residual_sd(h)).powi(2);
        }
        Ok(cov)
    }
}

/// Weight of a driver cell whose left end lies `m` cells before the output
/// time (lag in `[(m-1)δ, mδ]`).
fn lag_weight(
    family: &KernelFamily,
    m: usize,
    h: f64,
    delta: f64,
    weights: WeightRule,
    singular: SingularCell,
    rule: &GaussRule,
) -> f64 {
    let left_point = if m == 1 {
        singular == SingularCell::LeftPoint
    } else {
        weights == WeightRule::LeftPoint
    };
    if left_point {
        family.profile(m as f64 * delta, h)
    } else {
        cell_average(family, m, h, delta, rule)
    }
}

/// Anchor weight of the cell `[-mδ, -(m-1)δ]`.
fn anchor_weight(family: &KernelFamily, m: usize, h: f64, delta: f64, weights: WeightRule, rule: &GaussRule) -> f64 {
    if !family.has_anchor() {
        return 0.0;
    }
    match weights {
        WeightRule::LeftPoint => family.anchor(m as f64 * delta, h),
        WeightRule::CellAverage => cell_average(family, m, h, delta, rule),
    }
}

fn cell_average(family: &KernelFamily, m: usize, h: f64, delta: f64, rule: &GaussRule) -> f64 {
    if *family == KernelFamily::ItoMbm {
        // δ^{h-1/2} [m^p - (m-1)^p] / p without cancellation
        let p = h + 0.5;
        let mf = m as f64;
        let diff = if m == 1 { 1.0 } else { -mf.powf(p) * (p * (-1.0 / mf).ln_1p()).exp_m1() };
        return delta.powf(h - 0.5) * diff / p;
    }
    family.integral((m - 1) as f64 * delta, m as f64 * delta, h, rule) / delta
}

/// Geometric blocks on `[-horizon, -m_near]` and the rank-one tail beyond.
fn build_far(family: &KernelFamily, m_near: f64, horizon: f64, h_nodes: &[f64], t_points: &[f64]) -> FarField {
    let mut edges = vec![m_near];
    while *edges.last().expect("non-empty") < horizon * (1.0 - 1e-12) {
        let next = (edges.last().expect("non-empty") * FAR_RATIO).min(horizon);
        edges.push(next);
    }
    if edges.len() == 1 {
        edges.clear();
    }
    let block_rule = GaussRule::new(6);
    let tail_start = horizon.max(m_near);
    let tail_rule = GaussRule::new(16);
    let mut weights = Vec::with_capacity(h_nodes.len());
    let mut tail = Vec::with_capacity(h_nodes.len());
    for &h in h_nodes {
        let mut wp = Vec::with_capacity(t_points.len());
        let mut tp = Vec::with_capacity(t_points.len());
        for &t in t_points {
            let w: Vec<f64> = edges
                .windows(2)
                .map(|e| block_rule.integrate(e[0], e[1], |v| family.far_difference(t, v, h)) / (e[1] - e[0]))
                .collect();
            wp.push(w);
            tp.push(tail_amplitude(family, t, h, tail_start, &tail_rule));
        }
        weights.push(wp);
        tail.push(tp);
    }
    FarField { edges, weights, tail }
}

/// Signed `sqrt(∫_{start}^∞ g(t, v)² dv)` using `v = start·e^x`.
fn tail_amplitude(family: &KernelFamily, t: f64, h: f64, start: f64, rule: &GaussRule) -> f64 {
    if let KernelFamily::Truncated { cutoff } = *family {
        if start >= cutoff + t {
            return 0.0;
        }
    }
    let integrand = |x: f64| {
        let v = start * x.exp();
        let g = family.far_difference(t, v, h);
        g * g * v
    };
    let mut total = rule.integrate(0.0, 0.5, integrand);
    let mut a: f64 = 0.5;
    while a < 600.0 {
        let b = (2.0 * a).min(600.0);
        total += rule.integrate(a, b, integrand);
        a = b;
    }
    let sign = family.far_difference(t.max(1.0), 2.0 * start, h).signum();
    sign * total.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hurst::{generate_hurst, HurstSpec};
    use crate::noise::cumulate;

    fn cfg(n: usize, sub: usize) -> SimConfig {
        let mut c = SimConfig::new(UniformGrid::new(0.0, 1.0, n).unwrap());
        c.substeps = sub;
        c
    }

    #[test]
    fn brownian_case_reproduces_driver() {
        let plan = SimPlan::new(&KernelSpec::ito_mbm(), 0.5, 0.5, &cfg(16, 4)).unwrap();
        let h = HurstPath::constant(plan.hurst_grid(), 0.5).unwrap();
        let draw = plan.draw(3, 0);
        let x = plan.ito(&draw, &h).unwrap();
        let w = cumulate(draw.noise());
        let w0 = w.value_at_or_before(0.0);
        for (k, t) in plan.output_grid().nodes().enumerate() {
            let want = w.values()[w.grid().index_of(t).unwrap()] - w0;
            assert!((x.values()[k] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_matches_direct_sum() {
        let mut c = cfg(8, 4);
        c.horizon = HorizonRule::Fixed(50.0);
        let spec = HurstSpec::TanhOfFbm { center: 0.5, amplitude: 0.2, driver_hurst: 0.3, driver_seed: None };
        let plan = SimPlan::new(&KernelSpec::ito_mbm(), 0.3, 0.7, &c).unwrap();
        let h = generate_hurst(&spec, plan.hurst_grid(), 9, 1).unwrap();
        let draw = plan.draw(9, 1);
        let fast = plan.ito(&draw, &h).unwrap();
        let slow = plan.ito_reference(&draw, &h, WeightRule::CellAverage).unwrap();
        for (a, b) in fast.values().iter().zip(slow.values()) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn field_equals_ito_for_constant_exponent() {
        let plan = SimPlan::new(&KernelSpec::ito_mbm(), 0.3, 0.3, &cfg(32, 2)).unwrap();
        let h = HurstPath::constant(plan.hurst_grid(), 0.3).unwrap();
        let draw = plan.draw(1, 2);
        let x = plan.ito(&draw, &h).unwrap();
        let b = plan.field(&draw, &h).unwrap();
        assert_eq!(x.values(), b.values());
        assert_eq!(x.values()[0], 0.0);
    }

    #[test]
    fn chebyshev_order_grows_with_width() {
        let c = cfg(16, 2);
        let narrow = SimPlan::new(&KernelSpec::ito_mbm(), 0.85, 0.95, &c).unwrap();
        let wide = SimPlan::new(&KernelSpec::ito_mbm(), 0.3, 0.7, &c).unwrap();
        assert!(narrow.hurst_nodes() < wide.hurst_nodes());
        assert_eq!(SimPlan::new(&KernelSpec::ito_mbm(), 0.4, 0.4, &c).unwrap().hurst_nodes(), 1);
    }

    #[test]
    fn cell_average_closed_form_matches_quadrature() {
        let rule = GaussRule::new(24);
        for m in [1usize, 2, 7, 1000] {
            for h in [0.2, 0.8] {
                let got = cell_average(&KernelFamily::ItoMbm, m, h, 0.01, &rule);
                let want = KernelFamily::ItoMbm.integral((m - 1) as f64 * 0.01, m as f64 * 0.01, h, &rule) / 0.01;
                assert!((got - want).abs() < 1e-10 * want.abs());
            }
        }
    }
}
