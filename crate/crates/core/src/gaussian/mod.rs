//! Closed-form covariances of fBm, the mBm field and stationary Itô-mBm,
//! plus the exact fBm sampler used as an oracle elsewhere.

mod fbm;

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

pub use fbm::{exact_fbm, fgn_autocov, hosking_fgn, FbmSampler};

/// Below this distance of the mean exponent from 1/2 the mBm covariance is
/// evaluated through its limit.
pub const MBM_SINGULAR_TOL: f64 = 1e-6;
/// Symmetric offset used by the limit evaluation.
pub const MBM_LIMIT_OFFSET: f64 = 1e-4;

/// Variance convention of an fBm sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `Var B_1 = 1`.
    Standard,
    /// `Var B_1 = A(H)`, the variance of the moving-average representation.
    Paper,
}

fn check_hurst(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("Hurst exponent {h} outside (0, 1)")))
    }
}

/// `A(H) = Γ(H+1/2)² / (2H sin(πH) Γ(2H))`, the variance at `t = 1` of the
/// moving-average fBm.
pub fn norm_const_a(h: f64) -> Result<f64> {
    check_hurst(h)?;
    Ok(norm_const_a_unchecked(h))
}

pub(crate) fn norm_const_a_unchecked(h: f64) -> f64 {
    let log_ratio = 2.0 * ln_gamma(h + 0.5) - ln_gamma(2.0 * h);
    log_ratio.exp() / (2.0 * h * (PI * h).sin())
}

fn pow_abs(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(e)
    }
}

fn fbm_shape(t: f64, s: f64, h: f64) -> f64 {
    pow_abs(t, 2.0 * h) + pow_abs(s, 2.0 * h) - pow_abs(t - s, 2.0 * h)
}

/// Covariance of the moving-average fBm: `A(H)/2 (|t|^2H + |s|^2H - |t-s|^2H)`.
pub fn fbm_cov(t: f64, s: f64, h: f64) -> Result<f64> {
    check_hurst(h)?;
    Ok(0.5 * norm_const_a_unchecked(h) * fbm_shape(t, s, h))
}

/// Covariance under an explicit normalization.
pub fn fbm_cov_normalized(t: f64, s: f64, h: f64, norm: Normalization) -> Result<f64> {
    check_hurst(h)?;
    let shape = 0.5 * fbm_shape(t, s, h);
    Ok(match norm {
        Normalization::Standard => shape,
        Normalization::Paper => norm_const_a_unchecked(h) * shape,
    })
}

/// The ingredients of the mBm covariance for a pair of exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MbmCovarianceTerms {
    /// `(H_s + H_t) / 2`.
    pub h_mean: f64,
    /// `(H_s - H_t) / 2`.
    pub h_half_diff: f64,
    /// `Γ(H_t+1/2) Γ(H_s+1/2) Γ(2-2H̄) / (2π H̄ (1-2H̄))`.
    pub d_factor: f64,
}

impl MbmCovarianceTerms {
    pub fn new(h_t: f64, h_s: f64) -> Result<Self> {
        check_hurst(h_t)?;
        check_hurst(h_s)?;
        let h_mean = 0.5 * (h_s + h_t);
        let h_half_diff = 0.5 * (h_s - h_t);
        let log_num = ln_gamma(h_t + 0.5) + ln_gamma(h_s + 0.5) + ln_gamma(2.0 - 2.0 * h_mean);
        let d_factor = log_num.exp() / (2.0 * PI * h_mean * (1.0 - 2.0 * h_mean));
        Ok(Self { h_mean, h_half_diff, d_factor })
    }

    fn covariance(&self, t: f64, s: f64) -> f64 {
        let hm = self.h_mean;
        let hd = self.h_half_diff;
        let term = |x: f64, phase: f64| pow_abs(x, 2.0 * hm) * (PI * phase).cos();
        self.d_factor
            * (term(t, hd - signum0(t) * hm) + term(s, hd + signum0(s) * hm)
                - term(t - s, hd - signum0(t - s) * hm))
    }
}

fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// How [`mbm_cov`] treats the removable singularity at mean exponent 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MbmEvaluation {
    /// Report [`Error::RemovableSingularity`] near the singular set.
    Strict,
    /// Average the formula at mean exponent shifted by `±MBM_LIMIT_OFFSET`.
    #[default]
    Limit,
}

/// `E[B(t, H_t) B(s, H_s)]` for the moving-average mBm field.
pub fn mbm_cov(t: f64, s: f64, h_t: f64, h_s: f64, eval: MbmEvaluation) -> Result<f64> {
    let terms = MbmCovarianceTerms::new(h_t, h_s)?;
    let singular = (terms.h_mean - 0.5).abs() < MBM_SINGULAR_TOL;
    if h_t == h_s && (!singular || eval == MbmEvaluation::Limit) {
        return fbm_cov(t, s, h_t);
    }
    if !singular {
        return Ok(terms.covariance(t, s));
    }
    match eval {
        MbmEvaluation::Strict => Err(Error::RemovableSingularity {
            h_mean: terms.h_mean,
            tol: MBM_SINGULAR_TOL,
        }),
        MbmEvaluation::Limit => {
            let d = MBM_LIMIT_OFFSET;
            let up = MbmCovarianceTerms::new(h_t + d, h_s + d)?.covariance(t, s);
            let down = MbmCovarianceTerms::new(h_t - d, h_s - d)?.covariance(t, s);
            Ok(0.5 * (up + down))
        }
    }
}

/// Law of a scalar random quantity (a Hurst level or a scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Law {
    Point { value: f64 },
    /// Finite mixture of point masses; weights are normalized on use.
    Mixture { values: Vec<f64>, weights: Vec<f64> },
    /// Empirical law of i.i.d. draws.
    Samples { values: Vec<f64> },
}

/// An expectation together with its Monte Carlo standard error (0 when the
/// expectation is an exact finite sum).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub value: f64,
    pub stderr: f64,
}

impl Law {
    pub fn point(value: f64) -> Self {
        Law::Point { value }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Law::Point { value } if value.is_finite() => Ok(()),
            Law::Point { .. } => Err(Error::param("non-finite point mass")),
            Law::Mixture { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return Err(Error::param("mixture needs matching non-empty values and weights"));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::param("mixture weights must be nonnegative with positive sum"));
                }
                Ok(())
            }
            Law::Samples { values } if values.is_empty() => Err(Error::Empty("law samples".into())),
            Law::Samples { .. } => Ok(()),
        }
    }

    pub fn support(&self) -> Vec<f64> {
        match self {
            Law::Point { value } => vec![*value],
            Law::Mixture { values, .. } | Law::Samples { values } => values.clone(),
        }
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> Expectation {
        match self {
            Law::Point { value } => Expectation { value: f(*value), stderr: 0.0 },
            Law::Mixture { values, weights } => {
                let total: f64 = weights.iter().sum();
                let value = values.iter().zip(weights).map(|(v, w)| w * f(*v)).sum::<f64>() / total;
                Expectation { value, stderr: 0.0 }
            }
            Law::Samples { values } => {
                let n = values.len() as f64;
                let ys: Vec<f64> = values.iter().map(|&v| f(v)).collect();
                let mean = ys.iter().sum::<f64>() / n;
                let var = if values.len() > 1 {
                    ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                Expectation { value: mean, stderr: (var / n).sqrt() }
            }
        }
    }
}

fn check_laws(h_law: &Law, sigma_law: &Law) -> Result<()> {
    h_law.validate()?;
    sigma_law.validate()?;
    if let Some(h) = h_law.support().into_iter().find(|h| !(*h > 0.0 && *h < 1.0)) {
        return Err(Error::param(format!("Hurst law charges {h} outside (0, 1)")));
    }
    Ok(())
}

fn scaled_expectation(h_law: &Law, sigma_law: &Law, f: impl Fn(f64) -> f64) -> Result<Expectation> {
    check_laws(h_law, sigma_law)?;
    let hpart = h_law.expect(|h| 0.5 * norm_const_a_unchecked(h) * f(h));
    let spart = sigma_law.expect(|s| s * s);
    let value = hpart.value * spart.value;
    let stderr = ((spart.value * hpart.stderr).powi(2) + (hpart.value * spart.stderr).powi(2)).sqrt();
    if !value.is_finite() {
        return Err(Error::param("expectation is not finite"));
    }
    Ok(Expectation { value, stderr })
}

/// Covariance of stationary Itô-mBm with `H` and `σ` drawn independently
/// from the given laws.
pub fn stationary_cov(t: f64, s: f64, h_law: &Law, sigma_law: &Law) -> Result<Expectation> {
    scaled_expectation(h_law, sigma_law, |h| fbm_shape(t, s, h))
}

/// Autocovariance of the unit-lag increments at lag `delta`.
pub fn increment_autocov(delta: u64, h_law: &Law, sigma_law: &Law) -> Result<Expectation> {
    let d = delta as f64;
    scaled_expectation(h_law, sigma_law, |h| {
        pow_abs(d + 1.0, 2.0 * h) - 2.0 * pow_abs(d, 2.0 * h) + pow_abs(d - 1.0, 2.0 * h)
    })
}

/// Limit of the covariance of the rescaled increments `h^{-H_t}(X_{t+hr} - X_t)`.
pub fn local_cov_limit(r: f64, v: f64, h_law: &Law, sigma_law: &Law) -> Result<Expectation> {
    scaled_expectation(h_law, sigma_law, |h| fbm_shape(r, v, h))
}

/// Tabulated covariance evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTable {
    pub queries: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    pub model: String,
}

impl CovarianceTable {
    pub fn evaluate(
        model: impl Into<String>,
        queries: Vec<(f64, f64)>,
        f: impl Fn(f64, f64) -> Result<f64>,
    ) -> Result<Self> {
        let values = queries.iter().map(|&(t, s)| f(t, s)).collect::<Result<Vec<_>>>()?;
        Ok(Self { queries, values, model: model.into() })
    }

    /// CSV with header `t,s,value,model`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,s,value,model")?;
        for ((t, s), v) in self.queries.iter().zip(&self.values) {
            writeln!(out, "{t},{s},{v:.17e},{}", self.model)?;
        }
        Ok(())
    }
}
