//! Far-field decay of `w(r) = r² v(r)`.
//!
//! For the logarithmic profile (`m = 0`) `w(r) → 2(n-2)/(α-2β)`. The
//! approach is algebraic: linearizing the `w`-equation about its limit and
//! keeping the dominant large-`r` terms gives `β e'/r + ρ1 e/r² ≈ 0`, hence
//! `e ~ c r^{-ρ1/β}` (which is `c/r` for `ρ1 = β`). The tail is extrapolated
//! with that model and the model is flagged when the measured tail slope
//! disagrees with it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::ProfileSolution;

/// Largest tolerated gap between the measured tail slope and `-ρ1/β`.
pub const SLOPE_MODEL_TOL: f64 = 0.3;

/// Geometric radius ladder `r_min, ..., r_max` with `count` points.
pub fn radius_ladder(r_min: f64, r_max: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![r_max];
    }
    let ratio = (r_max / r_min).ln() / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i + 1 == count {
                r_max
            } else {
                r_min * (ratio * i as f64).exp()
            }
        })
        .collect()
}

/// `{10, 10^1.5, 10^2, 10^2.5, 10^3}`.
pub fn default_ladder() -> Vec<f64> {
    radius_ladder(10.0, 1000.0, 5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FarFieldMode {
    /// `m = 0`: the limit is known and the caller may assert on it.
    Assertion,
    /// `m > 0`: reported only.
    Diagnostic,
}

/// Candidate subsequential limits of `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitBranch {
    Zero,
    WInf,
    W1,
}

#[derive(Debug, Clone, Serialize)]
pub struct FarFieldReport {
    pub mode: FarFieldMode,
    /// `(r, r² v(r))`.
    pub samples: Vec<(f64, f64)>,
    pub raw_limit: f64,
    pub extrapolated_limit: f64,
    pub target: f64,
    pub rel_error_raw: f64,
    pub rel_error_extrapolated: f64,
    /// Exponent `p` of the `c r^{-p}` correction model.
    pub correction_exponent: f64,
    /// Least-squares slope of `ln|w - target|` against `ln r` over the tail.
    pub tail_slope: f64,
    pub model_reliable: bool,
    pub nearest_branch: LimitBranch,
    pub w_min: f64,
    pub w_max: f64,
}

impl FarFieldReport {
    /// `|w - target|` shrinks along the whole ladder.
    pub fn monotone_approach(&self) -> bool {
        self.samples
            .windows(2)
            .all(|p| (p[1].1 - self.target).abs() < (p[0].1 - self.target).abs())
    }
}

/// Least-squares fit of `w = L + c r^{-p}` to the samples; returns `L`.
pub fn extrapolate_limit(samples: &[(f64, f64)], exponent: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::DegenerateFit("need at least two samples".into()));
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(r, w)| (r.powf(-exponent), w))
        .collect();
    let (intercept, _) = linear_fit(&pts)?;
    Ok(intercept)
}

/// Least-squares line `y = a + b x`; returns `(a, b)`.
pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

/// Sample `w = r² v` on `r_values`, compare against the logarithmic limit and
/// extrapolate the last three samples.
pub fn farfield_limit(s: &ProfileSolution, r_values: &[f64]) -> Result<FarFieldReport> {
    if r_values.len() < 3 {
        return Err(Error::Config("far-field ladder needs at least three radii".into()));
    }
    if r_values.windows(2).any(|p| !(p[1] > p[0])) || !(r_values[0] > 0.0) {
        return Err(Error::Config("far-field radii must be positive and increasing".into()));
    }
    let requested = *r_values.last().unwrap();
    let reached = s.r_max();
    if requested > reached * (1.0 + 1e-12) {
        return Err(Error::InsufficientRange { requested, reached });
    }

    let samples = r_values
        .iter()
        .map(|&r| Ok((r, r * r * s.eval_v(r)?)))
        .collect::<Result<Vec<_>>>()?;
    let target = s.consts.w_inf;
    let exponent = s.params.rho1 / s.params.beta;
    let tail = &samples[samples.len() - 3..];
    let raw_limit = samples.last().unwrap().1;
    let extrapolated_limit = extrapolate_limit(tail, exponent)?;

    let log_pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|(_, w)| *w != target)
        .map(|&(r, w)| (r.ln(), (w - target).abs().ln()))
        .collect();
    let tail_slope = linear_fit(&log_pts).map(|(_, b)| b).unwrap_or(f64::NAN);
    let model_reliable = (tail_slope + exponent).abs() <= SLOPE_MODEL_TOL;

    let mut branches = vec![(LimitBranch::Zero, 0.0), (LimitBranch::WInf, target)];
    if let Some(w1) = s.consts.w1 {
        branches.push((LimitBranch::W1, w1));
    }
    let nearest_branch = branches
        .iter()
        .min_by(|a, b| {
            (a.1 - extrapolated_limit)
                .abs()
                .total_cmp(&(b.1 - extrapolated_limit).abs())
        })
        .unwrap()
        .0;

    let w_min = samples.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let w_max = samples.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);

    Ok(FarFieldReport {
        mode: if s.params.m == 0.0 {
            FarFieldMode::Assertion
        } else {
            FarFieldMode::Diagnostic
        },
        rel_error_raw: (raw_limit / target - 1.0).abs(),
        rel_error_extrapolated: (extrapolated_limit / target - 1.0).abs(),
        samples,
        raw_limit,
        extrapolated_limit,
        target,
        correction_exponent: exponent,
        tail_slope,
        model_reliable,
        nearest_branch,
        w_min,
        w_max,
    })
}

/// Residual of
/// `(w'/w)' + (n-1)/r · w'/w + β w'/r + ((α-2β) w - 2(n-2))/r² = 0`
/// for an arbitrary `w`, by central differences of `ln w` with step `h`.
pub fn w_equation_residual<F>(w: F, n: u32, rho1: f64, beta: f64, r: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(h > 0.0 && r - h > 0.0) {
        return Err(Error::Stencil(format!("r = {r}, h = {h}")));
    }
    let (wm, w0, wp) = (w(r - h)?, w(r)?, w(r + h)?);
    let (lm, l0, lp) = (wm.ln(), w0.ln(), wp.ln());
    let dlog = (lp - lm) / (2.0 * h);
    let d2log = (lp - 2.0 * l0 + lm) / (h * h);
    let n = n as f64;
    // α - 2β = ρ1.
    Ok(d2log + (n - 1.0) / r * dlog + beta * w0 * dlog / r
        + (rho1 * w0 - 2.0 * (n - 2.0)) / (r * r))
}

/// [`w_equation_residual`] applied to `w = r² v` of a logarithmic profile.
pub fn w_ode_residual(s: &ProfileSolution, r: f64, h: f64) -> Result<f64> {
    if s.params.m != 0.0 {
        return Err(Error::Domain(
            "the w-equation holds for the logarithmic profile only (m = 0)".into(),
        ));
    }
    if r + h > s.r_max() {
        return Err(Error::OutOfRange {
            r: r + h,
            lo: 0.0,
            hi: s.r_max(),
        });
    }
    w_equation_residual(
        |x| Ok(x * x * s.eval_v(x)?),
        s.params.n,
        s.params.rho1,
        s.params.beta,
        r,
        h,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;
    use crate::profile::{integrate_profile, ProfileOptions};

    #[test]
    fn ladder_endpoints() {
        let l = default_ladder();
        assert_eq!(l.len(), 5);
        assert_eq!(l[0], 10.0);
        assert_eq!(l[4], 1000.0);
        assert!((l[1] - 10f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn exact_inverse_r_model_extrapolates_exactly() {
        let s: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&r| (r, 2.0 - 1.0 / r)).collect();
        assert!((extrapolate_limit(&s, 1.0).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn targets() {
        assert_eq!(Params::default().derive().unwrap().w_inf, 2.0);
        let p = Params {
            n: 5,
            rho1: 2.0,
            ..Params::default()
        };
        assert_eq!(p.derive().unwrap().w_inf, 3.0);
    }

    #[test]
    fn constant_w_has_zero_residual() {
        let r = w_equation_residual(|_| Ok(2.0), 3, 1.0, 1.0, 7.0, 0.1).unwrap();
        assert_eq!(r, 0.0);
        let r = w_equation_residual(|_| Ok(3.0), 5, 2.0, 1.0, 7.0, 0.1).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn insufficient_range() {
        let s = integrate_profile(&Params::default(), &ProfileOptions::default().with_rho_max(100.0))
            .unwrap();
        assert!(matches!(
            farfield_limit(&s, &default_ladder()),
            Err(Error::InsufficientRange { .. })
        ));
    }

    #[test]
    fn residual_requires_log_profile() {
        let p = Params::default().with_m(0.1);
        let s = integrate_profile(&p, &ProfileOptions::default()).unwrap();
        assert!(matches!(w_ode_residual(&s, 5.0, 0.1), Err(Error::Domain(_))));
    }
}
