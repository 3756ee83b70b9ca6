use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{check_hurst, norm_const_a_unchecked, Normalization};
use crate::error::{Error, Result};
use crate::grid::{SampledPath, UniformGrid};
use crate::rng::{self, Domain};

/// Autocovariance of fractional Gaussian noise with unit step at lag `k`.
pub fn fgn_autocov(k: usize, h: f64) -> f64 {
    let k = k as f64;
    let e = 2.0 * h;
    let m = if k >= 1.0 { (k - 1.0).powf(e) } else { 1.0 };
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + m)
}

enum Method {
    /// Square roots of the circulant eigenvalues, scaled by `1/sqrt(2n)`.
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    /// Durbin-Levinson recursion on the Toeplitz covariance.
    Hosking { autocov: Vec<f64> },
}

/// Exact sampler for fBm on a fixed grid starting at 0. The embedding is
/// computed once and reused for every stream.
pub struct FbmSampler {
    h: f64,
    grid: UniformGrid,
    scale: f64,
    method: Method,
}

impl FbmSampler {
    pub fn new(h: f64, grid: UniformGrid, normalization: Normalization) -> Result<Self> {
        check_hurst(h)?;
        if grid.t_min() != 0.0 {
            return Err(Error::GridMismatch("exact fBm requires a grid starting at 0".into()));
        }
        let n = grid.n_cells();
        let var_scale = match normalization {
            Normalization::Standard => 1.0,
            Normalization::Paper => norm_const_a_unchecked(h),
        };
        let scale = (var_scale * grid.step().powf(2.0 * h)).sqrt();
        let method = circulant(h, n).unwrap_or_else(|| Method::Hosking {
            autocov: (0..n).map(|k| fgn_autocov(k, h)).collect(),
        });
        Ok(Self { h, grid, scale, method })
    }

    /// Forces the Durbin-Levinson path (used to cross-check the embedding).
    pub fn new_hosking(h: f64, grid: UniformGrid, normalization: Normalization) -> Result<Self> {
        let mut sampler = Self::new(h, grid, normalization)?;
        let n = grid.n_cells();
        sampler.method = Method::Hosking { autocov: (0..n).map(|k| fgn_autocov(k, h)).collect() };
        Ok(sampler)
    }

    pub fn uses_circulant(&self) -> bool {
        matches!(self.method, Method::Circulant { .. })
    }

    pub fn hurst(&self) -> f64 {
        self.h
    }

    /// Unit-step fGn scaled to the grid, drawn from `rng`.
    pub fn sample_increments<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.grid.n_cells();
        let mut inc = match &self.method {
            Method::Circulant { sqrt_eig, fft } => {
                let m = sqrt_eig.len();
                let mut buf: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|&l| {
                        let re = rng::standard_normal(rng);
                        let im = rng::standard_normal(rng);
                        Complex64::new(l * re, l * im)
                    })
                    .collect();
                debug_assert_eq!(m, 2 * n);
                fft.process(&mut buf);
                buf.iter().take(n).map(|z| z.re).collect::<Vec<f64>>()
            }
            Method::Hosking { autocov } => hosking_fgn(autocov, rng),
        };
        inc.iter_mut().for_each(|x| *x *= self.scale);
        inc
    }

    pub fn sample(&self, seed: u64, stream_id: u64, domain: Domain) -> SampledPath {
        let mut rng = rng::stream(seed, stream_id, domain);
        let inc = self.sample_increments(&mut rng);
        let mut values = Vec::with_capacity(inc.len() + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for x in inc {
            acc += x;
            values.push(acc);
        }
        SampledPath::new(self.grid, values, format!("fBm(H={})", self.h))
            .expect("fBm samples are finite")
    }
}

fn circulant(h: f64, n: usize) -> Option<Method> {
    let m = 2 * n;
    let mut row: Vec<Complex64> = Vec::with_capacity(m);
    for k in 0..=n {
        row.push(Complex64::new(fgn_autocov(k, h), 0.0));
    }
    for k in (1..n).rev() {
        row.push(Complex64::new(fgn_autocov(k, h), 0.0));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    let max = row.iter().map(|z| z.re).fold(0.0, f64::max);
    let mut sqrt_eig = Vec::with_capacity(m);
    for z in &row {
        if z.re < -1e-10 * max {
            return None;
        }
        sqrt_eig.push((z.re.max(0.0) / m as f64).sqrt());
    }
    Some(Method::Circulant { sqrt_eig, fft })
}

/// Sequential Cholesky (Durbin-Levinson) sampling of a stationary sequence
/// with autocovariance `autocov[0..n]`.
pub fn hosking_fgn<R: rand::Rng>(autocov: &[f64], rng: &mut R) -> Vec<f64> {
    let n = autocov.len();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut prev: Vec<f64> = Vec::with_capacity(n);
    let mut v = autocov[0];
    out.push(v.sqrt() * rng::standard_normal(rng));
    for k in 1..n {
        // reflection coefficient
        let mut num = autocov[k];
        for j in 0..k - 1 {
            num -= phi[j] * autocov[k - 1 - j];
        }
        let kappa = num / v;
        prev.clear();
        prev.extend_from_slice(&phi);
        phi.clear();
        for j in 0..k - 1 {
            phi.push(prev[j] - kappa * prev[k - 2 - j]);
        }
        phi.push(kappa);
        v *= 1.0 - kappa * kappa;
        let mean: f64 = (0..k).map(|j| phi[j] * out[k - 1 - j]).sum();
        out.push(mean + v.max(0.0).sqrt() * rng::standard_normal(rng));
    }
    out
}

/// Exact fBm on `grid` (which must start at 0).
pub fn exact_fbm(
    h: f64,
    grid: UniformGrid,
    seed: u64,
    stream_id: u64,
    normalization: Normalization,
) -> Result<SampledPath> {
    let sampler = FbmSampler::new(h, grid, normalization)?;
    Ok(sampler.sample(seed, stream_id, Domain::ExactFbm))
}
