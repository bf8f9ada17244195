//! Exact solutions of `u_t = Δφ_m(u)` used as oracles: Barenblatt solutions
//! vanishing at time `T`, and self-similar lifts of integrated profiles.
//!
//! `φ_m` is the shifted family `(u^m - 1)/m`, which tends to `log u` as
//! `m → 0`; the shift leaves the Laplacian unchanged.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::farfield::linear_fit;
use crate::params::Params;
use crate::profile::ProfileSolution;

/// `(u^m - 1)/m`, and `log u` at `m = 0`.
#[inline]
pub fn phi(m: f64, u: f64) -> f64 {
    let l = u.ln();
    if m == 0.0 {
        l
    } else {
        (m * l).exp_m1() / m
    }
}

/// `φ_m'(u) = u^{m-1}` for every `m`.
#[inline]
pub fn phi_prime(m: f64, u: f64) -> f64 {
    u.powf(m - 1.0)
}

/// A radial space-time field `u(r, t)`.
pub trait SpaceTimeField: Sync {
    fn value(&self, r: f64, t: f64) -> Result<f64>;
}

impl<F> SpaceTimeField for F
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    fn value(&self, r: f64, t: f64) -> Result<f64> {
        self(r, t)
    }
}

fn check_time(t: f64, horizon: f64) -> Result<()> {
    if !(0.0..horizon).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {horizon})")));
    }
    Ok(())
}

/// `B_k(r,t) = (C* / (k + (T-t)^{2/(n-2-nm)} r²))^{1/(1-m)} (T-t)^{n/(n-2-nm)}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BarenblattSolution {
    pub n: u32,
    pub m: f64,
    pub k: f64,
    #[serde(rename = "T")]
    pub t_horizon: f64,
    pub c_star: f64,
}

impl BarenblattSolution {
    /// Uses `n`, `m` and `T` from `p`; `lambda`, `beta` and `rho1` play no role.
    pub fn new(p: &Params, k: f64) -> Result<Self> {
        let n = p.n as f64;
        if p.n < 3 || p.m < 0.0 || p.m >= p.critical_m() {
            return Err(Error::InvalidParams(format!(
                "Barenblatt needs n >= 3 and 0 <= m < (n-2)/n, got n = {}, m = {}",
                p.n, p.m
            )));
        }
        if !(k > 0.0 && p.t_horizon > 0.0) {
            return Err(Error::InvalidParams(format!(
                "k = {k} and T = {} must be positive",
                p.t_horizon
            )));
        }
        Ok(Self {
            n: p.n,
            m: p.m,
            k,
            t_horizon: p.t_horizon,
            c_star: 2.0 * (n - 2.0 - p.m * n) / (1.0 - p.m),
        })
    }

    /// Defined for `0 <= t < T`; regular at `r = 0`.
    pub fn value(&self, r: f64, t: f64) -> Result<f64> {
        check_time(t, self.t_horizon)?;
        let n = self.n as f64;
        let d = n - 2.0 - n * self.m;
        let tau = self.t_horizon - t;
        let base = self.c_star / (self.k + tau.powf(2.0 / d) * r * r);
        Ok(base.powf(1.0 / (1.0 - self.m)) * tau.powf(n / d))
    }
}

impl SpaceTimeField for BarenblattSolution {
    fn value(&self, r: f64, t: f64) -> Result<f64> {
        BarenblattSolution::value(self, r, t)
    }
}

/// `V(r,t) = (T-t)^{α_m} v((T-t)^β r)` for an integrated profile `v`.
#[derive(Debug, Clone)]
pub struct SelfSimilarSolution {
    pub profile: ProfileSolution,
    pub t_horizon: f64,
    pub alpha_m: f64,
    pub beta: f64,
}

impl SelfSimilarSolution {
    /// The lift solves the parabolic equation only when `ρ1 = 1`.
    pub fn new(profile: ProfileSolution) -> Result<Self> {
        if profile.params.rho1 != 1.0 {
            return Err(Error::Domain(format!(
                "self-similar lift requires rho1 = 1, got {}",
                profile.params.rho1
            )));
        }
        Ok(Self {
            t_horizon: profile.params.t_horizon,
            alpha_m: profile.consts.alpha_m,
            beta: profile.params.beta,
            profile,
        })
    }

    pub fn value(&self, r: f64, t: f64) -> Result<f64> {
        check_time(t, self.t_horizon)?;
        let tau = self.t_horizon - t;
        Ok(tau.powf(self.alpha_m) * self.profile.eval_v(tau.powf(self.beta) * r)?)
    }

    /// Largest radius covered at time `t`.
    pub fn r_max_at(&self, t: f64) -> f64 {
        self.profile.r_max() / (self.t_horizon - t).powf(self.beta)
    }
}

impl SpaceTimeField for SelfSimilarSolution {
    fn value(&self, r: f64, t: f64) -> Result<f64> {
        SelfSimilarSolution::value(self, r, t)
    }
}

/// Central-difference residual `u_t - [φ_rr + (n-1)/r φ_r]` of a radial field.
pub fn pde_residual<F: SpaceTimeField + ?Sized>(
    field: &F,
    p: &Params,
    r: f64,
    t: f64,
    h_r: f64,
    h_t: f64,
) -> Result<f64> {
    if !(h_r > 0.0 && h_t > 0.0 && r - 2.0 * h_r > 0.0 && t - h_t >= 0.0) {
        return Err(Error::Stencil(format!(
            "r = {r}, t = {t}, h_r = {h_r}, h_t = {h_t}"
        )));
    }
    let m = p.m;
    let n = p.n as f64;
    let u_t = (field.value(r, t + h_t)? - field.value(r, t - h_t)?) / (2.0 * h_t);
    let fm = phi(m, field.value(r - h_r, t)?);
    let f0 = phi(m, field.value(r, t)?);
    let fp = phi(m, field.value(r + h_r, t)?);
    let lap = (fp - 2.0 * f0 + fm) / (h_r * h_r) + (n - 1.0) / r * (fp - fm) / (2.0 * h_r);
    Ok(u_t - lap)
}

/// One row of a residual refinement study.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RefinementRow {
    pub h: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementStudy {
    pub label: String,
    pub rows: Vec<RefinementRow>,
    /// Least-squares slope of `log max_residual` against `log h`.
    pub fitted_order: f64,
}

/// Step sizes `{1e-2, 10^-2.5, 1e-3}` used for residual refinement.
pub fn default_residual_steps() -> Vec<f64> {
    vec![1e-2, 10f64.powf(-2.5), 1e-3]
}

/// Max residual over `points` for each `h` (with `h_r = h_t = h`) and the
/// fitted order.
pub fn residual_refinement<F: SpaceTimeField + ?Sized>(
    label: &str,
    field: &F,
    p: &Params,
    points: &[(f64, f64)],
    steps: &[f64],
) -> Result<RefinementStudy> {
    let rows = steps
        .iter()
        .map(|&h| {
            let mut worst: f64 = 0.0;
            for &(r, t) in points {
                worst = worst.max(pde_residual(field, p, r, t, h, h)?.abs());
            }
            Ok(RefinementRow {
                h,
                max_residual: worst,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fitted_order = fit_order(rows.iter().map(|r| (r.h, r.max_residual)))?;
    Ok(RefinementStudy {
        label: label.to_string(),
        rows,
        fitted_order,
    })
}

/// Slope of `log e` against `log h`.
pub fn fit_order<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Result<f64> {
    let pts: Vec<(f64, f64)> = pairs
        .into_iter()
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::DegenerateFit("zero or non-finite error".into()));
    }
    Ok(linear_fit(&pts)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{integrate_profile, ProfileOptions};

    fn n3(m: f64) -> Params {
        Params::default().with_m(m)
    }

    #[test]
    fn phi_family_is_continuous_at_zero() {
        for u in [0.01, 0.5, 3.0, 700.0] {
            assert_eq!(phi(0.0, u), u.ln());
            assert!((phi(1e-9, u) - u.ln()).abs() < 1e-7);
        }
        assert!((phi(0.5, 4.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn barenblatt_values() {
        let b = BarenblattSolution::new(&n3(0.0), 1.0).unwrap();
        assert_eq!(b.c_star, 2.0);
        assert!((b.value(1.0, 1e-12).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(b.value(1.0, 0.0).unwrap(), 1.0);

        let p = Params {
            n: 5,
            m: 0.2,
            t_horizon: 2.0,
            ..Params::default()
        };
        let b = BarenblattSolution::new(&p, 0.7).unwrap();
        let d = 5.0 - 2.0 - 1.0;
        let want = (b.c_star / 0.7).powf(1.0 / 0.8) * 1.5f64.powf(5.0 / d);
        assert!((b.value(0.0, 0.5).unwrap() / want - 1.0).abs() < 1e-14);

        assert!(b.value(1.0, 2.0).is_err());
        assert!(b.value(1.0, -0.1).is_err());
    }

    #[test]
    fn barenblatt_vanishes_at_extinction() {
        let b = BarenblattSolution::new(&n3(0.1), 1.0).unwrap();
        let sup = |t: f64| {
            (0..100)
                .map(|i| b.value(i as f64 * 0.1, t).unwrap())
                .fold(0.0, f64::max)
        };
        assert!(sup(0.999) < 1e-6 * sup(0.0));
        assert!(sup(1.0 - 1e-6) < sup(0.999));
    }

    #[test]
    fn barenblatt_residual_small() {
        let p = n3(0.0);
        let b = BarenblattSolution::new(&p, 1.0).unwrap();
        let res = pde_residual(&b, &p, 1.0, 0.5, 1e-3, 1e-3).unwrap();
        assert!(res.abs() <= 1e-4, "{res}");
    }

    #[test]
    fn constants_solve_the_equation() {
        let p = n3(0.2);
        let c = |_: f64, _: f64| Ok(3.5);
        assert_eq!(pde_residual(&c, &p, 1.0, 0.5, 1e-2, 1e-2).unwrap(), 0.0);
    }

    #[test]
    fn stencil_must_stay_inside() {
        let p = n3(0.0);
        let b = BarenblattSolution::new(&p, 1.0).unwrap();
        assert!(matches!(
            pde_residual(&b, &p, 0.01, 0.5, 0.01, 1e-3),
            Err(Error::Stencil(_))
        ));
    }

    #[test]
    fn lift_at_unit_distance_from_extinction_is_the_profile() {
        let p = Params {
            t_horizon: 2.0,
            ..Params::default()
        };
        let prof = integrate_profile(&p, &ProfileOptions::default()).unwrap();
        let lift = SelfSimilarSolution::new(prof.clone()).unwrap();
        for r in [0.2, 1.0, 4.0] {
            assert_eq!(lift.value(r, 1.0).unwrap(), prof.eval_v(r).unwrap());
            let tau: f64 = 2.0 - 0.3;
            let direct = tau.powf(3.0) * prof.eval_v(tau * r).unwrap();
            assert_eq!(lift.value(r, 0.3).unwrap(), direct);
        }
    }

    #[test]
    fn lift_requires_unit_rho1() {
        let p = Params {
            rho1: 2.0,
            ..Params::default()
        };
        let prof = integrate_profile(&p, &ProfileOptions::default()).unwrap();
        assert!(SelfSimilarSolution::new(prof).is_err());
    }

    #[test]
    fn larger_lambda_gives_smaller_lift() {
        let opts = ProfileOptions::default().with_rho_max(20.0);
        let lo = integrate_profile(&Params::default().with_lambda(2.0), &opts).unwrap();
        let hi = integrate_profile(&Params::default(), &opts).unwrap();
        let (lo, hi) = (
            SelfSimilarSolution::new(lo).unwrap(),
            SelfSimilarSolution::new(hi).unwrap(),
        );
        for t in [0.0, 0.3, 0.8] {
            for r in [0.05, 0.5, 3.0, 15.0] {
                assert!(lo.value(r, t).unwrap() <= hi.value(r, t).unwrap());
            }
        }
    }

    #[test]
    fn fit_order_of_exact_powers() {
        let o = fit_order([(0.1, 0.02), (0.05, 0.005), (0.025, 0.00125)]).unwrap();
        assert!((o - 2.0).abs() < 1e-12);
    }
}
