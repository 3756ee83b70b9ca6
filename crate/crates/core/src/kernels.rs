//! Moving-average kernel families `g_s(t)`, their local power-law
//! decomposition, and the truncation horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SampledPath;
use crate::special::GaussRule;

/// Horizons beyond this are refused by [`truncation_horizon`].
pub const MAX_HORIZON: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelFamily {
    /// `σ_s [(t-s)_+^{H_s-1/2} - (-s)_+^{H_s-1/2}]`
    ItoMbm,
    /// `σ_s (t-s)_+^{H_s-1/2} e^{-λ(t-s)}`
    Matern { lambda: f64 },
    /// `σ_s ([(t-s)_+ log(t-s)_+]^{H_s-1/2} - [(-s)_+ log(-s)_+]^{H_s-1/2})`,
    /// each bracket taken as 0 where its base is not positive.
    LogModified,
    /// `σ_s (t-s)_+^{H_s-1/2} φ(t-s)` with `φ = 1` on `[0, cutoff/2]` and a
    /// cubic taper to 0 at `cutoff`.
    Truncated { cutoff: f64 },
}

/// Volatility factor `σ_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma {
    Constant(f64),
    /// Evaluated at the last node `<= s`; earlier times take the first value.
    Path(SampledPath),
}

impl Default for Sigma {
    fn default() -> Self {
        Sigma::Constant(1.0)
    }
}

impl Sigma {
    pub fn at(&self, s: f64) -> f64 {
        match self {
            Sigma::Constant(c) => *c,
            Sigma::Path(p) => p.value_at_or_before(s),
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            Sigma::Constant(c) => c.abs(),
            Sigma::Path(p) => p.max().abs().max(p.min().abs()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Sigma::Constant(_))
    }
}

/// Bounds `(L̄, R̲, ρ)` on the kernel constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionABounds {
    pub l_bar: f64,
    pub r_lower: f64,
    pub rho: f64,
}

impl ConditionABounds {
    pub fn new(l_bar: f64, r_lower: f64, rho: f64) -> Result<Self> {
        let b = Self { l_bar, r_lower, rho };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_bar > 0.0 && self.l_bar.is_finite()) {
            return Err(Error::param(format!("l_bar must be positive, got {}", self.l_bar)));
        }
        if !(self.r_lower > 0.5 && self.r_lower.is_finite()) {
            return Err(Error::param(format!("r_lower must exceed 1/2, got {}", self.r_lower)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::param(format!("rho must be positive, got {}", self.rho)));
        }
        Ok(())
    }

    /// Bounds that hold for the family with `|σ| <= 1` and `H <= 0.95`.
    pub fn default_for(family: &KernelFamily) -> Self {
        match *family {
            KernelFamily::ItoMbm | KernelFamily::LogModified => Self { l_bar: 1.0, r_lower: 0.55, rho: 1.0 },
            KernelFamily::Matern { lambda } => Self { l_bar: 1.0 + lambda + 1.0 / lambda, r_lower: 1.0, rho: 1.0 },
            KernelFamily::Truncated { cutoff } => Self {
                l_bar: (1.0 + 3.0 / cutoff) * cutoff.max(1.0).powf(1.5),
                r_lower: 1.0,
                rho: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(default)]
    pub sigma: Sigma,
    pub bounds: ConditionABounds,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, sigma: Sigma, bounds: Option<ConditionABounds>) -> Result<Self> {
        let bounds = bounds.unwrap_or_else(|| ConditionABounds::default_for(&family));
        let spec = Self { family, sigma, bounds };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ito_mbm() -> Self {
        Self::new(KernelFamily::ItoMbm, Sigma::default(), None).expect("default bounds are valid")
    }

    pub fn matern(lambda: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern { lambda }, Sigma::default(), None)
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            KernelFamily::Matern { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                return Err(Error::param(format!("matern lambda must be positive, got {lambda}")));
            }
            KernelFamily::Truncated { cutoff } if !(cutoff > 0.0 && cutoff.is_finite()) => {
                return Err(Error::param(format!("cutoff must be positive, got {cutoff}")));
            }
            _ => {}
        }
        self.bounds.validate()?;
        if let Sigma::Path(p) = &self.sigma {
            if p.values().is_empty() {
                return Err(Error::Empty("sigma path".into()));
            }
        }
        let sup = self.sigma.sup_abs();
        if !(sup.is_finite() && sup <= self.bounds.l_bar) {
            return Err(Error::param(format!("|sigma| = {sup} exceeds l_bar = {}", self.bounds.l_bar)));
        }
        Ok(())
    }
}

fn smooth_taper(x: f64, cutoff: f64) -> f64 {
    let half = 0.5 * cutoff;
    if x <= half {
        1.0
    } else if x >= cutoff {
        0.0
    } else {
        let u = (x - half) / half;
        1.0 - u * u * (3.0 - 2.0 * u)
    }
}

impl KernelFamily {
    /// Whether the kernel carries the `(-s)_+` anchor term.
    pub(crate) fn has_anchor(&self) -> bool {
        matches!(self, KernelFamily::ItoMbm | KernelFamily::LogModified)
    }

    /// The lag profile is `(u - u0)^{h-1/2} ψ(u)` for `u > u0` and 0 below.
    pub(crate) fn offset(&self) -> f64 {
        match self {
            KernelFamily::LogModified => 1.0,
            _ => 0.0,
        }
    }

    /// Smooth factor `ψ(u)`, for `u > u0`.
    pub(crate) fn smooth(&self, u: f64, h: f64) -> f64 {
        match *self {
            KernelFamily::ItoMbm => 1.0,
            KernelFamily::Matern { lambda } => (-lambda * u).exp(),
            KernelFamily::Truncated { cutoff } => smooth_taper(u, cutoff),
            KernelFamily::LogModified => {
                // (u log u / (u - 1))^{h-1/2}, finite at u = 1
                let x = u - 1.0;
                let ratio = if x == 0.0 { 1.0 } else { x.ln_1p() / x };
                (u * ratio).powf(h - 0.5)
            }
        }
    }

    /// Lag profile `κ(u, h)`: the kernel at lag `u = t - s` without σ or
    /// anchor. Zero for `u <= u0`.
    pub(crate) fn profile(&self, u: f64, h: f64) -> f64 {
        let x = u - self.offset();
        if x <= 0.0 {
            return 0.0;
        }
        x.powf(h - 0.5) * self.smooth(u, h)
    }

    /// Anchor term `α(v, h)` at `v = -s`.
    pub(crate) fn anchor(&self, v: f64, h: f64) -> f64 {
        if self.has_anchor() {
            self.profile(v, h)
        } else {
            0.0
        }
    }

    /// `∫_a^b κ(u, h) du`, via `w = (u - u0)^{h+1/2}` which removes the
    /// endpoint singularity.
    pub(crate) fn integral(&self, a: f64, b: f64, h: f64, rule: &GaussRule) -> f64 {
        let u0 = self.offset();
        let a = a.max(u0);
        if b <= a {
            return 0.0;
        }
        let p = h + 0.5;
        if matches!(self, KernelFamily::ItoMbm) {
            return ((b - u0).powf(p) - (a - u0).powf(p)) / p;
        }
        let (wa, wb) = ((a - u0).powf(p), (b - u0).powf(p));
        rule.integrate(wa, wb, |w| self.smooth(u0 + w.powf(1.0 / p), h)) / p
    }

    /// `∫_a^b κ(u, h)² du`, via `w = (u - u0)^{2h}`.
    pub(crate) fn integral_sq(&self, a: f64, b: f64, h: f64, rule: &GaussRule) -> f64 {
        let u0 = self.offset();
        let a = a.max(u0);
        if b <= a {
            return 0.0;
        }
        let q = 2.0 * h;
        if matches!(self, KernelFamily::ItoMbm) {
            return ((b - u0).powf(q) - (a - u0).powf(q)) / q;
        }
        let (wa, wb) = ((a - u0).powf(q), (b - u0).powf(q));
        rule.integrate(wa, wb, |w| {
            let s = self.smooth(u0 + w.powf(1.0 / q), h);
            s * s
        }) / q
    }

    /// `κ(t + v, h) - α(v, h)` for `v >= 1`, evaluated without cancellation
    /// when `t << v`.
    pub(crate) fn far_difference(&self, t: f64, v: f64, h: f64) -> f64 {
        let a = h - 0.5;
        match self {
            KernelFamily::ItoMbm => v.powf(a) * (a * (t / v).ln_1p()).exp_m1(),
            KernelFamily::LogModified => {
                if v <= 1.0 {
                    return self.profile(t + v, h) - self.anchor(v, h);
                }
                let lv = v.ln();
                let l1 = (t / v).ln_1p();
                // log of the ratio of the two bases
                let log_ratio = l1 + (l1 / lv).ln_1p();
                (v * lv).powf(a) * (a * log_ratio).exp_m1()
            }
            _ => self.profile(t + v, h),
        }
    }
}

fn check_inputs(s: f64, t: f64, h: f64) -> Result<()> {
    if !(s.is_finite() && t.is_finite() && h.is_finite()) {
        return Err(Error::param("kernel arguments must be finite"));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::param(format!("Hurst value {h} outside (0, 1)")));
    }
    Ok(())
}

/// Evaluates `g_s(t)` with the exponent `h_at_s` taken at the left time `s`.
/// The convention `x_+^a = 0` for `x <= 0` applies to every power term.
pub fn eval_kernel(spec: &KernelSpec, s: f64, t: f64, h_at_s: f64) -> Result<f64> {
    check_inputs(s, t, h_at_s)?;
    if s > t {
        return Ok(0.0);
    }
    let f = &spec.family;
    Ok(spec.sigma.at(s) * (f.profile(t - s, h_at_s) - f.anchor(-s, h_at_s)))
}

/// Smallest horizon `M >= 1` with `h_step² L̄² M^{1-2R̲} / (2R̲-1) <= tol²`.
pub fn truncation_horizon(bounds: &ConditionABounds, h_step: f64, tol: f64) -> Result<f64> {
    bounds.validate()?;
    if !(h_step > 0.0 && h_step.is_finite()) {
        return Err(Error::param(format!("h_step must be positive, got {h_step}")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::param(format!("tol must be positive, got {tol}")));
    }
    let e = 2.0 * bounds.r_lower - 1.0;
    let ratio = (h_step * bounds.l_bar / tol).powi(2) / e;
    let m = ratio.powf(1.0 / e).max(1.0);
    if m > MAX_HORIZON {
        return Err(Error::HorizonTooLarge { horizon: m, cap: MAX_HORIZON });
    }
    Ok(m)
}

/// `g_s(t) - σ_s (t-s)^{h-1/2}`, the remainder after removing the local
/// power law.
pub fn astar_remainder(spec: &KernelSpec, s: f64, t: f64, h_at_s: f64) -> Result<f64> {
    check_inputs(s, t, h_at_s)?;
    if !(s < t) {
        return Err(Error::Range(format!("remainder needs s < t, got s = {s}, t = {t}")));
    }
    let g = eval_kernel(spec, s, t, h_at_s)?;
    Ok(g - spec.sigma.at(s) * (t - s).powf(h_at_s - 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn ito_at_half_is_indicator() {
        let k = KernelSpec::ito_mbm();
        assert_eq!(eval_kernel(&k, 0.3, 1.0, 0.5).unwrap(), 1.0);
        assert_eq!(eval_kernel(&k, -0.3, 1.0, 0.5).unwrap(), 0.0);
        assert_eq!(eval_kernel(&k, 1.3, 1.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn matern_closed_form() {
        let k = KernelSpec::matern(4.0).unwrap();
        let v = eval_kernel(&k, 0.0, 1.0, 0.3).unwrap();
        assert!(close(v, (-4f64).exp(), 1e-15));
        assert!(close(v, 0.0183156, 1e-5));
    }

    #[test]
    fn horizon_examples() {
        let b = |r| ConditionABounds::new(1.0, r, 1.0).unwrap();
        assert!(close(truncation_horizon(&b(1.0), 0.01, 1e-3).unwrap(), 100.0, 1e-12));
        assert!(close(truncation_horizon(&b(1.5), 0.01, 1e-3).unwrap(), 50f64.sqrt(), 1e-12));
        assert_eq!(truncation_horizon(&b(1.0), 0.01, 1e3).unwrap(), 1.0);
        assert!(matches!(
            truncation_horizon(&b(0.55), 0.01, 1e-9),
            Err(Error::HorizonTooLarge { .. })
        ));
    }

    #[test]
    fn remainder_examples() {
        let k = KernelSpec::ito_mbm();
        assert_eq!(astar_remainder(&k, 0.2, 0.7, 0.3).unwrap(), 0.0);
        assert_eq!(astar_remainder(&k, 0.2, 0.7, 0.5).unwrap(), 0.0);
        let m = KernelSpec::matern(4.0).unwrap();
        for i in 1..200 {
            let x = i as f64 / 200.0;
            let r = astar_remainder(&m, 0.0, x, 0.3).unwrap();
            let want = x.powf(-0.2) * ((-4.0 * x).exp() - 1.0);
            assert!(close(r, want, 1e-12));
            assert!(r.abs() <= 4.0 * x.powf(0.8) + 1e-15);
        }
    }

    #[test]
    fn log_modified_branch() {
        let k = KernelSpec::new(KernelFamily::LogModified, Sigma::default(), None).unwrap();
        // base (t-s) log(t-s) is negative for lags below 1
        assert_eq!(eval_kernel(&k, 0.5, 1.0, 0.3).unwrap(), 0.0);
        let v = eval_kernel(&k, 0.0, 3.0, 0.3).unwrap();
        assert!(close(v, (3.0 * 3f64.ln()).powf(-0.2), 1e-14));
        let w = eval_kernel(&k, -2.0, 1.0, 0.7).unwrap();
        let want = (3.0 * 3f64.ln()).powf(0.2) - (2.0 * 2f64.ln()).powf(0.2);
        assert!(close(w, want, 1e-14));
    }

    #[test]
    fn far_difference_is_stable() {
        for fam in [KernelFamily::ItoMbm, KernelFamily::LogModified] {
            for h in [0.2, 0.7] {
                for v in [2.0, 10.0, 1e3] {
                    let direct = fam.profile(0.5 + v, h) - fam.anchor(v, h);
                    let stable = fam.far_difference(0.5, v, h);
                    assert!(close(stable, direct, 1e-9), "{fam:?} h={h} v={v}");
                }
            }
        }
        let tiny = KernelFamily::ItoMbm.far_difference(1.0, 1e12, 0.7);
        let want = 0.2 * 1e-12 * (1e12f64).powf(0.2);
        assert!(close(tiny, want, 1e-6));
    }

    #[test]
    fn integrals_match_quadrature() {
        let rule = GaussRule::new(24);
        let fine = GaussRule::new(64);
        for fam in [KernelFamily::Matern { lambda: 4.0 }, KernelFamily::LogModified, KernelFamily::Truncated { cutoff: 3.0 }] {
            for h in [0.3, 0.8] {
                let (a, b) = (1.7, 1.9);
                let want = fine.integrate(a, b, |u| fam.profile(u, h));
                assert!(close(fam.integral(a, b, h, &rule), want, 1e-10), "{fam:?}");
                let want_sq = fine.integrate(a, b, |u| fam.profile(u, h).powi(2));
                assert!(close(fam.integral_sq(a, b, h, &rule), want_sq, 1e-10), "{fam:?}");
            }
        }
        // singular endpoint handled by the substitution
        let m = KernelFamily::Matern { lambda: 4.0 };
        let v = m.integral(0.0, 1e-3, 0.3, &rule);
        let series = 1e-3f64.powf(0.8) / 0.8 - 4.0 * 1e-3f64.powf(1.8) / 1.8;
        assert!(close(v, series, 1e-5));
    }

    #[test]
    fn sigma_must_respect_l_bar() {
        assert!(KernelSpec::new(KernelFamily::ItoMbm, Sigma::Constant(2.0), None).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern { lambda: 0.0 }, Sigma::default(), None).is_err());
    }
}
