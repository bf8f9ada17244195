//! Singular radial profiles of `Δφ_m(v) + α_m v + β x·∇v = 0`.
//!
//! The profile blows up like `r^{-α_m/β}` at the origin. Writing
//! `w̄(ρ) = r^{α_m/β} v(r)` with `ρ = r^{ρ1/β}` removes the singularity:
//! `w̄` is `C²` up to `ρ = 0` with known value, slope and curvature there,
//! and satisfies
//!
//! ```text
//! y_ρ + m y² + a1 y/ρ + a2 w̄^{1-m} y/ρ² = a3/ρ²,    y = w̄_ρ / w̄.
//! ```
//!
//! The integrator starts from the quadratic expansion at a small `ρ0` and
//! marches outward in `s = ln ρ` on the state `(ln w̄, z)` with `z = ρ y`:
//!
//! ```text
//! (ln w̄)_s = z
//! z_s      = a3 + (1 - a1) z - m z² - a2 w̄^{1-m} z / ρ
//! ```
//!
//! The last term is stiff near the origin (rate `a2 w̄^{1-m}/ρ`); the
//! error-controlled explicit pair settles at its stability limit there,
//! which costs `O(a2/ρ0)` steps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::hermite5;
use crate::ode::{self, StepControl};
use crate::params::{envelope_admissible, DerivedConstants, Params};

/// Largest initialization abscissa used when none is configured.
pub const RHO0_CAP: f64 = 1e-4;

/// Relative slack tolerated by [`ProfileSolution::check_envelope`].
pub const ENVELOPE_TOL: f64 = 1e-8;

/// `w̄(0)`, `w̄_ρ(0)` and `w̄_ρρ(0)` for a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OriginExpansion {
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
}

impl OriginExpansion {
    pub fn new(p: &Params, c: &DerivedConstants) -> Self {
        let m = p.m;
        let e = p.rho1 / ((1.0 - m) * p.beta);
        Self {
            w0: p.lambda.powf(-e),
            w1: c.big_a1 * p.lambda.powf(-m * e),
            w2: c.big_a2 * p.lambda.powf(-(2.0 * m - 1.0) * e),
        }
    }

    /// Quadratic Taylor value and slope at `rho`.
    pub fn taylor(&self, rho: f64) -> (f64, f64) {
        (
            self.w0 + rho * (self.w1 + 0.5 * self.w2 * rho),
            self.w1 + self.w2 * rho,
        )
    }
}

/// Second-order Taylor value `(w̄, w̄_ρ)` of the desingularized profile at `rho`.
pub fn taylor_init(p: &Params, c: &DerivedConstants, rho: f64) -> (f64, f64) {
    OriginExpansion::new(p, c).taylor(rho)
}

/// `ρ0 = min(1e-4, (tol / |w̄_ρρ(0)|)^{1/3})`.
pub fn default_rho0(tol: f64, expansion: &OriginExpansion) -> f64 {
    if expansion.w2 == 0.0 {
        RHO0_CAP
    } else {
        RHO0_CAP.min((tol / expansion.w2.abs()).cbrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub rho_max: f64,
    /// Relative and absolute integrator tolerance.
    pub tol: f64,
    /// Overrides [`default_rho0`].
    pub rho0: Option<f64>,
    /// Upper bound on the step in `ln ρ`; also bounds the interpolation mesh.
    pub max_log_step: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            rho_max: 10.0,
            tol: 1e-10,
            rho0: None,
            max_log_step: 0.02,
        }
    }
}

impl ProfileOptions {
    pub fn with_rho_max(self, rho_max: f64) -> Self {
        Self { rho_max, ..self }
    }

    pub fn with_tol(self, tol: f64) -> Self {
        Self { tol, ..self }
    }

    pub fn with_rho0(self, rho0: f64) -> Self {
        Self {
            rho0: Some(rho0),
            ..self
        }
    }
}

/// `w̄` and its first two `ρ`-derivatives at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WbarPoint {
    pub wbar: f64,
    pub wbar_rho: f64,
    pub wbar_rhorho: f64,
}

/// Integrated profile on the accepted-step grid.
#[derive(Debug, Clone)]
pub struct ProfileSolution {
    pub params: Params,
    pub consts: DerivedConstants,
    pub expansion: OriginExpansion,
    pub rho_grid: Vec<f64>,
    pub wbar: Vec<f64>,
    pub wbar_rho: Vec<f64>,
    pub rho0: f64,
    /// `(rtol, atol)`.
    pub integrator_tol: (f64, f64),
    pub stats: ode::Stats,
    log_rho: Vec<f64>,
    log_w: Vec<f64>,
    z: Vec<f64>,
    dz: Vec<f64>,
}

/// Integrate the profile outward from the origin expansion to `opts.rho_max`.
pub fn integrate_profile(p: &Params, opts: &ProfileOptions) -> Result<ProfileSolution> {
    p.validate(true).into_result()?;
    if !(opts.tol > 0.0 && opts.max_log_step > 0.0) {
        return Err(Error::Config(format!(
            "tolerance {} and step cap {} must be positive",
            opts.tol, opts.max_log_step
        )));
    }
    let c = p.derive()?;
    let expansion = OriginExpansion::new(p, &c);
    let rho0 = opts.rho0.unwrap_or_else(|| default_rho0(opts.tol, &expansion));
    if !(rho0 > 0.0 && opts.rho_max > rho0) {
        return Err(Error::Config(format!(
            "need 0 < rho0 < rho_max, got rho0 = {rho0:e}, rho_max = {:e}",
            opts.rho_max
        )));
    }

    let m = p.m;
    let (a1, a2, a3) = (c.a1, c.a2, c.a3);
    let rhs = move |s: f64, y: &[f64; 2]| {
        let z = y[1];
        let stiff = a2 * ((1.0 - m) * y[0] - s).exp();
        [z, a3 + (1.0 - a1) * z - m * z * z - stiff * z]
    };

    let (w_init, wr_init) = expansion.taylor(rho0);
    let state0 = [w_init.ln(), rho0 * wr_init / w_init];
    let stiffness0 = a2 * w_init.powf(1.0 - m) / rho0;
    let ctrl = StepControl {
        rtol: opts.tol,
        atol: opts.tol,
        h_init: (0.5 / stiffness0).min(opts.max_log_step),
        h_max: opts.max_log_step,
        ..StepControl::default()
    };

    let mut log_rho = Vec::new();
    let mut log_w = Vec::new();
    let mut z = Vec::new();
    let mut dz = Vec::new();
    let stats = ode::integrate(
        rhs,
        rho0.ln(),
        state0,
        opts.rho_max.ln(),
        &ctrl,
        |s, y, dy| {
            if !(y[1] > 0.0) {
                let rho = s.exp();
                return Err(Error::MonotonicityViolation {
                    rho,
                    wbar_rho: y[0].exp() * y[1] / rho,
                });
            }
            log_rho.push(s);
            log_w.push(y[0]);
            z.push(y[1]);
            dz.push(dy[1]);
            Ok(())
        },
    )
    .map_err(|e| match e {
        Error::IntegrationFailure { rho, reason } => Error::IntegrationFailure {
            rho: rho.exp(),
            reason,
        },
        other => other,
    })?;

    let mut rho_grid: Vec<f64> = log_rho.iter().map(|s| s.exp()).collect();
    *rho_grid.last_mut().expect("initial point recorded") = opts.rho_max;
    let wbar: Vec<f64> = log_w.iter().map(|l| l.exp()).collect();
    let wbar_rho = wbar
        .iter()
        .zip(&z)
        .zip(&rho_grid)
        .map(|((w, z), rho)| w * z / rho)
        .collect();

    Ok(ProfileSolution {
        params: *p,
        consts: c,
        expansion,
        rho_grid,
        wbar,
        wbar_rho,
        rho0,
        integrator_tol: (opts.tol, opts.tol),
        stats,
        log_rho,
        log_w,
        z,
        dz,
    })
}

impl ProfileSolution {
    pub fn rho_max(&self) -> f64 {
        *self.rho_grid.last().expect("non-empty grid")
    }

    /// Radius exponent `ρ1/β` of the change of variables `ρ = r^{ρ1/β}`.
    fn rho_exponent(&self) -> f64 {
        self.params.rho1 / self.params.beta
    }

    pub fn rho_of_r(&self, r: f64) -> f64 {
        r.powf(self.rho_exponent())
    }

    pub fn r_of_rho(&self, rho: f64) -> f64 {
        rho.powf(1.0 / self.rho_exponent())
    }

    /// Largest radius the profile covers.
    pub fn r_max(&self) -> f64 {
        self.r_of_rho(self.rho_max())
    }

    pub fn len(&self) -> usize {
        self.rho_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_grid.is_empty()
    }

    /// Nodal values of `z = ρ w̄_ρ / w̄`.
    pub fn z_nodes(&self) -> &[f64] {
        &self.z
    }

    /// Evaluate `w̄` and two derivatives. Below `ρ0` the quadratic expansion
    /// is used; inside the grid a quintic Hermite interpolant of `ln w̄` in
    /// `ln ρ`, which keeps `w̄` positive and `C²`.
    pub fn wbar_at(&self, rho: f64) -> Result<WbarPoint> {
        let hi = self.rho_max();
        if !(rho >= 0.0) || rho > hi * (1.0 + 1e-12) {
            return Err(Error::OutOfRange {
                r: rho,
                lo: 0.0,
                hi,
            });
        }
        if rho < self.rho0 {
            let (w, wr) = self.expansion.taylor(rho);
            return Ok(WbarPoint {
                wbar: w,
                wbar_rho: wr,
                wbar_rhorho: self.expansion.w2,
            });
        }
        let s = rho.ln().min(*self.log_rho.last().unwrap());
        let idx = match self.log_rho.partition_point(|&x| x <= s) {
            0 => 0,
            k if k >= self.log_rho.len() => self.log_rho.len() - 2,
            k => k - 1,
        };
        let node = |i: usize| [self.log_w[i], self.z[i], self.dz[i]];
        let [l, z, dz] = hermite5(
            self.log_rho[idx],
            self.log_rho[idx + 1],
            node(idx),
            node(idx + 1),
            s,
        );
        let w = l.exp();
        Ok(WbarPoint {
            wbar: w,
            wbar_rho: w * z / rho,
            wbar_rhorho: w * (z * z + dz - z) / (rho * rho),
        })
    }

    fn check_radius(&self, r: f64) -> Result<f64> {
        let r_max = self.r_max();
        if !(r > 0.0) || r > r_max * (1.0 + 1e-12) {
            return Err(Error::OutOfRange {
                r,
                lo: 0.0,
                hi: r_max,
            });
        }
        Ok(self.rho_of_r(r))
    }

    /// `r^{α_m/β} v(r) = w̄(r^{ρ1/β})`; finite at `r = 0`.
    pub fn scaled_v(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(self.expansion.w0);
        }
        let rho = self.check_radius(r)?;
        Ok(self.wbar_at(rho)?.wbar)
    }

    /// `r^{α_m/β + 1} v'(r) = (ρ1/β) ρ w̄_ρ - (α_m/β) w̄`; finite at `r = 0`.
    pub fn scaled_v_prime(&self, r: f64) -> Result<f64> {
        let k = self.consts.alpha_m / self.params.beta;
        if r == 0.0 {
            return Ok(-k * self.expansion.w0);
        }
        let rho = self.check_radius(r)?;
        let pt = self.wbar_at(rho)?;
        Ok(self.rho_exponent() * rho * pt.wbar_rho - k * pt.wbar)
    }

    pub fn eval_v(&self, r: f64) -> Result<f64> {
        let rho = self.check_radius(r)?;
        let k = self.consts.alpha_m / self.params.beta;
        Ok(r.powf(-k) * self.wbar_at(rho)?.wbar)
    }

    pub fn eval_v_prime(&self, r: f64) -> Result<f64> {
        let scaled = self.scaled_v_prime(r)?;
        let k = self.consts.alpha_m / self.params.beta;
        Ok(r.powf(-k - 1.0) * scaled)
    }

    /// `v''` from the radial equation itself:
    /// `v'' = (1-m) v'^2/v - α_m v^{2-m} - β r v^{1-m} v' - (n-1) v'/r`.
    pub fn eval_v_second(&self, r: f64) -> Result<f64> {
        let v = self.eval_v(r)?;
        let vp = self.eval_v_prime(r)?;
        let m = self.params.m;
        let n = self.params.n as f64;
        Ok((1.0 - m) * vp * vp / v
            - self.consts.alpha_m * v.powf(2.0 - m)
            - self.params.beta * r * v.powf(1.0 - m) * vp
            - (n - 1.0) * vp / r)
    }

    /// `|w̄(ρ) - quadratic Taylor(ρ)| / ρ²`.
    pub fn expansion_residual(&self, rho: f64) -> Result<f64> {
        let w = self.wbar_at(rho)?.wbar;
        let (taylor, _) = self.expansion.taylor(rho);
        Ok((w - taylor).abs() / (rho * rho))
    }

    /// Slope at the origin from a least-squares quadratic fit of the grid
    /// values on `[ρ0, factor·ρ0]`.
    pub fn origin_slope_fit(&self, factor: f64) -> Result<OriginFit> {
        let hi = factor * self.rho0;
        let pts: Vec<(f64, f64)> = self
            .rho_grid
            .iter()
            .zip(&self.wbar)
            .take_while(|(rho, _)| **rho <= hi)
            .map(|(rho, w)| (rho / self.rho0, w - self.wbar[0]))
            .collect();
        if pts.len() < 3 {
            return Err(Error::DegenerateFit(format!(
                "only {} grid nodes in [rho0, {factor} rho0]",
                pts.len()
            )));
        }
        let quad = least_squares_poly::<3>(&pts);
        let lin = least_squares_poly::<2>(&pts);
        Ok(OriginFit {
            slope_quadratic: quad[1] / self.rho0,
            slope_linear: lin[1] / self.rho0,
            expected: self.expansion.w1,
            nodes: pts.len(),
        })
    }

    /// Substitute the nodal `(w̄, w̄_ρ)` into the `y`-form of the radial
    /// equation with a three-point derivative of `y`, scaled by `ρ²`.
    pub fn grid_residuals(&self) -> Vec<GridResidual> {
        let m = self.params.m;
        let c = &self.consts;
        let y: Vec<f64> = self
            .wbar_rho
            .iter()
            .zip(&self.wbar)
            .map(|(wr, w)| wr / w)
            .collect();
        (1..self.len().saturating_sub(1))
            .map(|i| {
                let (r0, r1, r2) = (self.rho_grid[i - 1], self.rho_grid[i], self.rho_grid[i + 1]);
                let (h1, h2) = (r1 - r0, r2 - r1);
                let dy = -h2 / (h1 * (h1 + h2)) * y[i - 1]
                    + (h2 - h1) / (h1 * h2) * y[i]
                    + h1 / (h2 * (h1 + h2)) * y[i + 1];
                let w = self.wbar[i];
                let stiffness = c.a2 * w.powf(1.0 - m) / r1;
                let residual = r1 * r1 * dy + m * (r1 * y[i]).powi(2) + c.a1 * r1 * y[i]
                    - c.a3
                    + stiffness * r1 * y[i];
                let spacing = (r2 / r1).ln().max((r1 / r0).ln());
                GridResidual {
                    rho: r1,
                    residual,
                    stiffness,
                    log_spacing: spacing,
                }
            })
            .collect()
    }

    /// Slack of every grid node against the two-sided envelope
    /// `w̄(0) ≤ w̄(ρ) ≤ w̄(0) exp(C_m λ^{ρ1/β} ρ)`.
    pub fn check_envelope(&self) -> EnvelopeReport {
        let w0 = self.expansion.w0;
        let rate = self.consts.c_m * self.params.lambda.powf(self.rho_exponent());
        let nodes: Vec<EnvelopeSlack> = self
            .rho_grid
            .iter()
            .zip(&self.log_w)
            .map(|(&rho, &l)| EnvelopeSlack {
                rho,
                lower: (l - w0.ln()).exp_m1(),
                upper: -(l - w0.ln() - rate * rho).exp_m1(),
            })
            .collect();
        let min_lower = nodes.iter().map(|s| s.lower).fold(f64::INFINITY, f64::min);
        let min_upper = nodes.iter().map(|s| s.upper).fold(f64::INFINITY, f64::min);
        let violations = nodes
            .iter()
            .filter(|s| s.lower < -ENVELOPE_TOL || s.upper < -ENVELOPE_TOL)
            .count();
        EnvelopeReport {
            admissible: envelope_admissible(&self.params, &self.consts),
            tolerance: ENVELOPE_TOL,
            min_lower,
            min_upper,
            violations,
            nodes,
        }
    }
}

/// Least-squares polynomial coefficients (lowest degree first).
pub(crate) fn least_squares_poly<const K: usize>(pts: &[(f64, f64)]) -> [f64; K] {
    let mut a = [[0.0; K]; K];
    let mut b = [0.0; K];
    for &(x, y) in pts {
        let mut pow = [1.0; K];
        for k in 1..K {
            pow[k] = pow[k - 1] * x;
        }
        for i in 0..K {
            b[i] += pow[i] * y;
            for j in 0..K {
                a[i][j] += pow[i] * pow[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..K {
        let piv = (col..K)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..K {
            let f = a[row][col] / a[col][col];
            for k in col..K {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; K];
    for i in (0..K).rev() {
        let s: f64 = (i + 1..K).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OriginFit {
    pub slope_quadratic: f64,
    pub slope_linear: f64,
    pub expected: f64,
    pub nodes: usize,
}

impl OriginFit {
    pub fn rel_error(&self) -> f64 {
        (self.slope_quadratic / self.expected - 1.0).abs()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridResidual {
    pub rho: f64,
    /// `ρ²` times the residual of the `y`-equation.
    pub residual: f64,
    /// Local stiffness `a2 w̄^{1-m}/ρ`.
    pub stiffness: f64,
    pub log_spacing: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnvelopeSlack {
    pub rho: f64,
    /// `w̄/w̄(0) - 1`.
    pub lower: f64,
    /// `1 - w̄/(w̄(0) exp(C_m λ^{ρ1/β} ρ))`.
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    /// Whether `n - 2 - 2 m α_m/β > 0`, the regime in which the upper
    /// envelope is known to hold.
    pub admissible: bool,
    pub tolerance: f64,
    pub min_lower: f64,
    pub min_upper: f64,
    pub violations: usize,
    #[serde(skip)]
    pub nodes: Vec<EnvelopeSlack>,
}

impl EnvelopeReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_profile(rho_max: f64) -> ProfileSolution {
        integrate_profile(&Params::default(), &ProfileOptions::default().with_rho_max(rho_max))
            .unwrap()
    }

    #[test]
    fn taylor_at_origin() {
        let p = Params::default();
        let c = p.derive().unwrap();
        assert_eq!(taylor_init(&p, &c, 0.0), (1.0, 3.0));
        let (w, _) = taylor_init(&p, &c, 0.01);
        assert_relative_eq!(w, 1.0297, max_relative = 1e-14);
    }

    #[test]
    fn taylor_origin_value_matches_normalization() {
        let p = Params {
            n: 5,
            m: 0.1,
            rho1: 1.5,
            beta: 0.7,
            lambda: 2.3,
            t_horizon: 1.0,
        };
        let c = p.derive().unwrap();
        let (w, _) = taylor_init(&p, &c, 0.0);
        assert_eq!(w, 2.3f64.powf(-1.5 / (0.9 * 0.7)));
    }

    #[test]
    fn profile_is_monotone_and_above_lower_envelope() {
        let s = default_profile(10.0);
        assert!(s.wbar.windows(2).all(|w| w[1] > w[0]));
        assert!(s.wbar_rho.iter().all(|&d| d > 0.0));
        assert!(s.wbar.iter().all(|&w| w >= 1.0));
        assert_eq!(s.rho_max(), 10.0);
    }

    #[test]
    fn halving_rho0_is_invisible() {
        let p = Params::default();
        let opts = ProfileOptions::default();
        let a = integrate_profile(&p, &opts).unwrap();
        let b = integrate_profile(&p, &opts.with_rho0(a.rho0 / 2.0)).unwrap();
        for i in 0..=50 {
            let r = 0.1 * 100f64.powf(i as f64 / 50.0);
            let (va, vb) = (a.eval_v(r).unwrap(), b.eval_v(r).unwrap());
            assert!((va / vb - 1.0).abs() <= 10.0 * opts.tol, "r = {r}");
        }
    }

    #[test]
    fn scaled_limits_at_origin() {
        let p = Params::default().with_lambda(2.0);
        let s = integrate_profile(&p, &ProfileOptions::default()).unwrap();
        assert_eq!(s.scaled_v(0.0).unwrap(), 0.5);
        assert!((s.scaled_v(1e-6).unwrap() - 0.5).abs() < 1e-5);
        assert!(s.eval_v(0.0).is_err());

        let s = default_profile(10.0);
        assert_eq!(s.scaled_v_prime(0.0).unwrap(), -3.0);
        assert!((s.scaled_v_prime(1e-7).unwrap() + 3.0).abs() < 1e-5);
    }

    #[test]
    fn v_decreasing_and_identity_at_nodes() {
        let s = default_profile(10.0);
        let step = (s.len() / 200).max(1);
        let mut prev = f64::INFINITY;
        for i in (0..s.len()).step_by(step) {
            let r = s.r_of_rho(s.rho_grid[i]);
            let v = s.eval_v(r).unwrap();
            assert!(v < prev);
            prev = v;
            let vp = s.eval_v_prime(r).unwrap();
            assert!(vp < 0.0);
            // Chain-rule identity with nodal data.
            let k = s.consts.alpha_m / s.params.beta;
            let rho = s.rho_grid[i];
            let lhs = r.powf(k + 1.0) * vp;
            let rhs = s.params.rho1 / s.params.beta * rho * s.wbar_rho[i] - k * s.wbar[i];
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0), "{lhs} {rhs}");
        }
    }

    #[test]
    fn out_of_range_queries() {
        let s = default_profile(10.0);
        assert!(matches!(s.eval_v(10.5), Err(Error::OutOfRange { .. })));
        assert!(s.eval_v(-1.0).is_err());
        assert!(s.eval_v(10.0).is_ok());
    }

    #[test]
    fn second_derivative_identity_matches_interpolant() {
        // v'' from the ODE against the interpolant's own second derivative.
        let s = default_profile(10.0);
        for r in [0.3, 1.0, 2.5] {
            let via_ode = s.eval_v_second(r).unwrap();
            let h = 1e-4 * r;
            let fd = (s.eval_v_prime(r + h).unwrap() - s.eval_v_prime(r - h).unwrap()) / (2.0 * h);
            assert!((via_ode / fd - 1.0).abs() < 1e-6, "{r}: {via_ode} {fd}");
        }
    }

    #[test]
    fn envelope_holds_default() {
        let s = default_profile(10.0);
        let report = s.check_envelope();
        assert!(report.admissible);
        assert!(report.holds(), "{report:?}");
        assert!(report.nodes[0].lower < 1e-3);
    }

    #[test]
    fn envelope_holds_n5_m02() {
        let p = Params {
            n: 5,
            m: 0.2,
            ..Params::default()
        };
        let s = integrate_profile(&p, &ProfileOptions::default()).unwrap();
        let report = s.check_envelope();
        assert!(report.admissible);
        assert!(report.holds(), "{report:?}");
    }

    #[test]
    fn origin_slope_fit_recovers_expansion() {
        let s = default_profile(1.0);
        let fit = s.origin_slope_fit(10.0).unwrap();
        assert!(fit.rel_error() < 1e-3, "{fit:?}");
    }

    #[test]
    fn expansion_residual_shrinks_towards_origin() {
        let s = integrate_profile(
            &Params::default(),
            &ProfileOptions::default().with_tol(1e-12),
        )
        .unwrap();
        let r: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&rho| s.expansion_residual(rho).unwrap())
            .collect();
        assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
    }

    #[test]
    fn rejects_non_strict_params() {
        let p = Params {
            n: 5,
            m: 0.2,
            beta: 0.1,
            ..Params::default()
        };
        assert!(matches!(
            integrate_profile(&p, &ProfileOptions::default()),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn least_squares_recovers_polynomial() {
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let x = 1.0 + i as f64 * 0.5;
                (x, 2.0 - 3.0 * x + 0.25 * x * x)
            })
            .collect();
        let c = least_squares_poly::<3>(&pts);
        assert_relative_eq!(c[0], 2.0, epsilon = 1e-9);
        assert_relative_eq!(c[1], -3.0, epsilon = 1e-9);
        assert_relative_eq!(c[2], 0.25, epsilon = 1e-9);
    }
}
