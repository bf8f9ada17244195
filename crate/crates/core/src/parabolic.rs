//! Radial `u_t = Δφ_m(u)` on an annulus with time-dependent Dirichlet data.
//!
//! Backward Euler in time, conservative flux form on a grid uniform in
//! `s = ln r`:
//!
//! `Δφ ≈ r_i^{-n} [r_{i+½}^{n-2}(φ_{i+1}-φ_i) - r_{i-½}^{n-2}(φ_i-φ_{i-1})] / h²`
//!
//! Each step is a Newton solve with a tridiagonal Jacobian. The Jacobian is
//! an M-matrix because `φ_m' > 0`, which gives the discrete comparison
//! principle; positivity is kept by damping the Newton update.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::profile::{integrate_profile, ProfileOptions};
use crate::reference::{fit_order, phi, phi_prime, SelfSimilarSolution, SpaceTimeField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusGrid {
    pub r_in: f64,
    pub r_out: f64,
    pub nr: usize,
    pub t_end: f64,
    pub nt: usize,
}

impl AnnulusGrid {
    pub fn new(r_in: f64, r_out: f64, nr: usize, t_end: f64, nt: usize) -> Result<Self> {
        let g = Self {
            r_in,
            r_out,
            nr,
            t_end,
            nt,
        };
        g.check()?;
        Ok(g)
    }

    /// `[0.05 T^{-β}, 20]` with 201 nodes and 200 steps up to `t_end = T/2`.
    pub fn default_for(p: &Params) -> Self {
        Self {
            r_in: 0.05 * p.t_horizon.powf(-p.beta),
            r_out: 20.0,
            nr: 201,
            t_end: 0.5 * p.t_horizon,
            nt: 200,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.r_in > 0.0 && self.r_out > self.r_in) {
            return Err(Error::InvalidParams(format!(
                "annulus needs 0 < r_in < r_out, got [{}, {}]",
                self.r_in, self.r_out
            )));
        }
        if self.nr < 3 || self.nt < 1 || !(self.t_end > 0.0) {
            return Err(Error::InvalidParams(format!(
                "need nr >= 3, nt >= 1, t_end > 0; got nr = {}, nt = {}, t_end = {}",
                self.nr, self.nt, self.t_end
            )));
        }
        Ok(())
    }

    pub fn with_nr(self, nr: usize) -> Self {
        Self { nr, ..self }
    }

    pub fn with_nt(self, nt: usize) -> Self {
        Self { nt, ..self }
    }

    pub fn with_r_in(self, r_in: f64) -> Self {
        Self { r_in, ..self }
    }

    /// Spacing in `ln r`.
    pub fn log_step(&self) -> f64 {
        (self.r_out / self.r_in).ln() / (self.nr - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.nt as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.log_step();
        let s0 = self.r_in.ln();
        (0..self.nr)
            .map(|i| match i {
                0 => self.r_in,
                i if i + 1 == self.nr => self.r_out,
                i => (s0 + h * i as f64).exp(),
            })
            .collect()
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.nt)
            .map(|k| if k == self.nt { self.t_end } else { dt * k as f64 })
            .collect()
    }
}

/// Where the Dirichlet data came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BoundarySource {
    Barenblatt { k: f64 },
    SelfSimilar { lambda: f64 },
    GeometricMean { lambda1: f64, lambda2: f64 },
    Custom { label: String },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverOptions {
    /// Newton stops once every update is below this fraction of `u`.
    pub newton_rtol: f64,
    pub max_newton: usize,
    /// The first step is taken as this many equal substeps.
    pub first_step_substeps: usize,
    /// How often a step may be halved after Newton fails.
    pub max_halvings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            newton_rtol: 1e-11,
            max_newton: 40,
            first_step_substeps: 4,
            max_halvings: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct SchemeStats {
    pub steps: usize,
    pub newton_iterations: usize,
    pub max_newton_per_step: usize,
    pub step_halvings: usize,
    /// Largest final Newton residual, relative to `u`.
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicSolution {
    pub grid: AnnulusGrid,
    pub n: u32,
    pub m: f64,
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    /// `u[k][i]` at time `t[k]`, radius `r[i]`.
    pub u: Vec<Vec<f64>>,
    pub boundary_source: BoundarySource,
    pub scheme_stats: SchemeStats,
}

impl ParabolicSolution {
    pub fn min_value(&self) -> f64 {
        self.u.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest `|u - exact| / exact` over all nodes and times.
    pub fn max_rel_error<F: SpaceTimeField + ?Sized>(&self, exact: &F) -> Result<f64> {
        self.max_error(exact, true)
    }

    /// Largest `|u - exact|` over all nodes and times.
    pub fn max_abs_error<F: SpaceTimeField + ?Sized>(&self, exact: &F) -> Result<f64> {
        self.max_error(exact, false)
    }

    fn max_error<F: SpaceTimeField + ?Sized>(&self, exact: &F, relative: bool) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (k, row) in self.u.iter().enumerate() {
            for (i, &u) in row.iter().enumerate() {
                let e = exact.value(self.r[i], self.t[k])?;
                let d = (u - e).abs();
                worst = worst.max(if relative { d / e } else { d });
            }
        }
        Ok(worst)
    }
}

/// Solve `A x = d` for tridiagonal `A`; `lower[0]` and `upper[last]` are ignored.
pub(crate) fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Geometry of the flux stencil, fixed for a grid.
struct Stencil {
    /// `r_i^{-n} r_{i-½}^{n-2} / h²` and `r_i^{-n} r_{i+½}^{n-2} / h²`.
    west: Vec<f64>,
    east: Vec<f64>,
}

impl Stencil {
    fn new(grid: &AnnulusGrid, n: u32) -> Self {
        let h = grid.log_step();
        let s0 = grid.r_in.ln();
        let n = n as f64;
        let (mut west, mut east) = (vec![0.0; grid.nr], vec![0.0; grid.nr]);
        for i in 1..grid.nr - 1 {
            let s = s0 + h * i as f64;
            let scale = (-n * s).exp() / (h * h);
            west[i] = scale * ((n - 2.0) * (s - 0.5 * h)).exp();
            east[i] = scale * ((n - 2.0) * (s + 0.5 * h)).exp();
        }
        Self { west, east }
    }

    fn residual(&self, m: f64, u: &[f64], prev: &[f64], dt: f64, out: &mut [f64]) {
        let nr = u.len();
        let f: Vec<f64> = u.iter().map(|&x| phi(m, x)).collect();
        for i in 1..nr - 1 {
            let lap = self.east[i] * (f[i + 1] - f[i]) - self.west[i] * (f[i] - f[i - 1]);
            out[i] = u[i] - prev[i] - dt * lap;
        }
    }
}

fn merit(res: &[f64], u: &[f64]) -> f64 {
    let k = u.len();
    (1..k - 1)
        .map(|i| (res[i] / u[i]).abs())
        .fold(0.0, f64::max)
}

struct Stepper<'a> {
    m: f64,
    stencil: Stencil,
    opts: &'a SolverOptions,
    stats: SchemeStats,
}

impl Stepper<'_> {
    /// One backward-Euler step of size `dt` ending at `t_new`.
    fn step(&mut self, prev: &[f64], dt: f64, bounds: (f64, f64), t_new: f64) -> Result<Vec<f64>> {
        let nr = prev.len();
        let mut u = prev.to_vec();
        u[0] = bounds.0;
        u[nr - 1] = bounds.1;
        let mut res = vec![0.0; nr];
        let mut trial_res = vec![0.0; nr];
        self.stencil.residual(self.m, &u, prev, dt, &mut res);
        let mut merit_u = merit(&res, &u);

        let (mut lo, mut di, mut up) = (vec![0.0; nr - 2], vec![0.0; nr - 2], vec![0.0; nr - 2]);
        for iter in 1..=self.opts.max_newton {
            let dphi: Vec<f64> = u.iter().map(|&x| phi_prime(self.m, x)).collect();
            let mut delta: Vec<f64> = (1..nr - 1).map(|i| -res[i]).collect();
            for i in 1..nr - 1 {
                let (w, e) = (self.stencil.west[i], self.stencil.east[i]);
                di[i - 1] = 1.0 + dt * (w + e) * dphi[i];
                lo[i - 1] = -dt * w * dphi[i - 1];
                up[i - 1] = -dt * e * dphi[i + 1];
            }
            thomas(&lo, &di, &up, &mut delta);

            let step_size = (1..nr - 1)
                .map(|i| (delta[i - 1] / u[i]).abs())
                .fold(0.0, f64::max);

            let mut theta = 1.0;
            let mut trial = u.clone();
            loop {
                for i in 1..nr - 1 {
                    trial[i] = u[i] + theta * delta[i - 1];
                }
                if trial.iter().all(|&x| x > 0.0) {
                    self.stencil.residual(self.m, &trial, prev, dt, &mut trial_res);
                    let mt = merit(&trial_res, &trial);
                    if mt.is_finite() && (mt < merit_u || step_size * theta <= self.opts.newton_rtol)
                    {
                        merit_u = mt;
                        break;
                    }
                }
                theta *= 0.5;
                if theta < 1e-10 {
                    return Err(Error::NewtonDivergence { t: t_new, dt });
                }
            }
            std::mem::swap(&mut u, &mut trial);
            std::mem::swap(&mut res, &mut trial_res);

            if theta == 1.0 && step_size <= self.opts.newton_rtol {
                self.stats.newton_iterations += iter;
                self.stats.max_newton_per_step = self.stats.max_newton_per_step.max(iter);
                self.stats.max_residual = self.stats.max_residual.max(merit_u);
                return Ok(u);
            }
        }
        Err(Error::NewtonDivergence { t: t_new, dt })
    }

    /// Advance from `t0` by `dt`, halving on Newton failure.
    fn advance<B: SpaceTimeField + ?Sized>(
        &mut self,
        prev: &[f64],
        t0: f64,
        dt: f64,
        bc: &B,
        r_out: (f64, f64),
        depth: usize,
    ) -> Result<Vec<f64>> {
        let t1 = t0 + dt;
        let bounds = (bc.value(r_out.0, t1)?, bc.value(r_out.1, t1)?);
        match self.step(prev, dt, bounds, t1) {
            Ok(u) => {
                self.stats.steps += 1;
                Ok(u)
            }
            Err(Error::NewtonDivergence { .. }) if depth < self.opts.max_halvings => {
                self.stats.step_halvings += 1;
                let half = 0.5 * dt;
                let mid = self.advance(prev, t0, half, bc, r_out, depth + 1)?;
                self.advance(&mid, t0 + half, half, bc, r_out, depth + 1)
            }
            Err(e) => Err(e),
        }
    }
}

/// Solve with initial node values `u0` and Dirichlet data from `bc`.
pub fn solve<B: SpaceTimeField + ?Sized>(
    p: &Params,
    grid: &AnnulusGrid,
    u0: &[f64],
    bc: &B,
    source: BoundarySource,
    opts: &SolverOptions,
) -> Result<ParabolicSolution> {
    grid.check()?;
    if !(p.n >= 3 && p.m >= 0.0 && p.m < p.critical_m()) {
        return Err(Error::InvalidParams(format!(
            "need n >= 3 and 0 <= m < (n-2)/n, got n = {}, m = {}",
            p.n, p.m
        )));
    }
    if u0.len() != grid.nr {
        return Err(Error::GridMismatch(format!(
            "initial data has {} values for {} nodes",
            u0.len(),
            grid.nr
        )));
    }
    if let Some(i) = u0.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::PositivityLoss { t: 0.0, node: i });
    }

    let r = grid.nodes();
    let t = grid.times();
    let ends = (r[0], r[grid.nr - 1]);
    let mut stepper = Stepper {
        m: p.m,
        stencil: Stencil::new(grid, p.n),
        opts,
        stats: SchemeStats::default(),
    };
    let mut rows = Vec::with_capacity(grid.nt + 1);
    rows.push(u0.to_vec());
    for k in 0..grid.nt {
        let (t0, t1) = (t[k], t[k + 1]);
        let prev = &rows[k];
        let next = if k == 0 && opts.first_step_substeps > 1 {
            let sub = (t1 - t0) / opts.first_step_substeps as f64;
            let mut cur = prev.clone();
            for j in 0..opts.first_step_substeps {
                cur = stepper.advance(&cur, t0 + sub * j as f64, sub, bc, ends, 0)?;
            }
            cur
        } else {
            stepper.advance(prev, t0, t1 - t0, bc, ends, 0)?
        };
        if let Some(i) = next.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::PositivityLoss { t: t1, node: i });
        }
        rows.push(next);
    }

    Ok(ParabolicSolution {
        grid: *grid,
        n: p.n,
        m: p.m,
        r,
        t,
        u: rows,
        boundary_source: source,
        scheme_stats: stepper.stats,
    })
}

/// Sample a field at `t` on the grid nodes.
pub fn sample<F: SpaceTimeField + ?Sized>(field: &F, grid: &AnnulusGrid, t: f64) -> Result<Vec<f64>> {
    grid.nodes().into_iter().map(|r| field.value(r, t)).collect()
}

/// Solve with initial and boundary data both taken from `field`.
pub fn solve_from<F: SpaceTimeField + ?Sized>(
    p: &Params,
    grid: &AnnulusGrid,
    field: &F,
    source: BoundarySource,
    opts: &SolverOptions,
) -> Result<ParabolicSolution> {
    let u0 = sample(field, grid, 0.0)?;
    solve(p, grid, &u0, field, source, opts)
}

/// Self-similar solutions `V_{λ1} <= V_{λ2}` with `λ1 > λ2`.
#[derive(Debug, Clone)]
pub struct EnvelopePair {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lower: SelfSimilarSolution,
    pub upper: SelfSimilarSolution,
}

impl EnvelopePair {
    /// Profiles reach far enough for every `r <= r_out` and `t < T`.
    pub fn new(p: &Params, lambda1: f64, lambda2: f64, r_out: f64, tol: f64) -> Result<Self> {
        if !(lambda1 >= lambda2 && lambda2 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "need lambda1 >= lambda2 > 0, got {lambda1}, {lambda2}"
            )));
        }
        let r_need = r_out * p.t_horizon.powf(p.beta);
        let opts = ProfileOptions::default()
            .with_rho_max(1.01 * r_need.powf(p.rho1 / p.beta))
            .with_tol(tol);
        let lift = |lambda: f64| {
            SelfSimilarSolution::new(integrate_profile(&p.with_lambda(lambda), &opts)?)
        };
        Ok(Self {
            lambda1,
            lambda2,
            lower: lift(lambda1)?,
            upper: lift(lambda2)?,
        })
    }

    pub fn geometric_mean(&self) -> GeometricMean<'_> {
        GeometricMean(self)
    }

    pub fn source(&self) -> BoundarySource {
        BoundarySource::GeometricMean {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
        }
    }
}

/// `sqrt(V_{λ1} V_{λ2})`.
#[derive(Debug, Clone, Copy)]
pub struct GeometricMean<'a>(&'a EnvelopePair);

impl SpaceTimeField for GeometricMean<'_> {
    fn value(&self, r: f64, t: f64) -> Result<f64> {
        Ok((self.0.lower.value(r, t)? * self.0.upper.value(r, t)?).sqrt())
    }
}

/// A field scaled by a constant factor.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<'a, F: ?Sized>(pub f64, pub &'a F);

impl<F: SpaceTimeField + ?Sized> SpaceTimeField for Scaled<'_, F> {
    fn value(&self, r: f64, t: f64) -> Result<f64> {
        Ok(self.0 * self.1.value(r, t)?)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SliceSlack {
    pub t: f64,
    /// `min (u - lower)/lower` over the slice.
    pub lower: f64,
    /// `min (upper - u)/upper` over the slice.
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub slices: Vec<SliceSlack>,
    pub min_lower: f64,
    pub min_upper: f64,
    pub tolerance: f64,
    /// Nodes with a slack below `-tolerance`.
    pub violations: usize,
    /// Nodes where `lower > upper`, so that no value fits in between.
    pub envelope_crossings: usize,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Relative slack of `sol` against `lower <= u <= upper` at every node.
pub fn check_sandwich<L, U>(
    sol: &ParabolicSolution,
    lower: &L,
    upper: &U,
    tolerance: f64,
) -> Result<SandwichReport>
where
    L: SpaceTimeField + ?Sized,
    U: SpaceTimeField + ?Sized,
{
    let mut slices = Vec::with_capacity(sol.t.len());
    let mut violations = 0;
    let mut envelope_crossings = 0;
    for (k, row) in sol.u.iter().enumerate() {
        let t = sol.t[k];
        let mut s = SliceSlack {
            t,
            lower: f64::INFINITY,
            upper: f64::INFINITY,
        };
        for (i, &u) in row.iter().enumerate() {
            let lo = lower.value(sol.r[i], t)?;
            let hi = upper.value(sol.r[i], t)?;
            let (a, b) = ((u - lo) / lo, (hi - u) / hi);
            if a < -tolerance || b < -tolerance {
                violations += 1;
            }
            if lo > hi {
                envelope_crossings += 1;
            }
            s.lower = s.lower.min(a);
            s.upper = s.upper.min(b);
        }
        slices.push(s);
    }
    Ok(SandwichReport {
        min_lower: slices.iter().map(|s| s.lower).fold(f64::INFINITY, f64::min),
        min_upper: slices.iter().map(|s| s.upper).fold(f64::INFINITY, f64::min),
        slices,
        tolerance,
        violations,
        envelope_crossings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// `min (u_B - u_A)/u_B` over all nodes and times.
    pub min_difference: f64,
    pub min_abs_difference: f64,
    /// Per time slice.
    pub slice_min: Vec<f64>,
}

impl ComparisonReport {
    pub fn ordered(&self, tolerance: f64) -> bool {
        self.min_difference >= -tolerance
    }
}

pub fn check_comparison(a: &ParabolicSolution, b: &ParabolicSolution) -> Result<ComparisonReport> {
    if a.grid != b.grid || a.n != b.n || a.m != b.m {
        return Err(Error::GridMismatch(format!(
            "{:?} (n = {}, m = {}) vs {:?} (n = {}, m = {})",
            a.grid, a.n, a.m, b.grid, b.n, b.m
        )));
    }
    let mut slice_min = Vec::with_capacity(a.u.len());
    let mut min_abs = f64::INFINITY;
    for (ra, rb) in a.u.iter().zip(&b.u) {
        let mut lo = f64::INFINITY;
        for (&x, &y) in ra.iter().zip(rb) {
            lo = lo.min((y - x) / y);
            min_abs = min_abs.min(y - x);
        }
        slice_min.push(lo);
    }
    Ok(ComparisonReport {
        min_difference: slice_min.iter().copied().fold(f64::INFINITY, f64::min),
        min_abs_difference: min_abs,
        slice_min,
    })
}

/// Largest relative error of a solve started from and bounded by `exact`.
pub fn discretization_error<F: SpaceTimeField + ?Sized>(
    p: &Params,
    grid: &AnnulusGrid,
    exact: &F,
    opts: &SolverOptions,
) -> Result<f64> {
    let sol = solve_from(
        p,
        grid,
        exact,
        BoundarySource::Custom {
            label: "exact".into(),
        },
        opts,
    )?;
    sol.max_rel_error(exact)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncationReport {
    pub r_in: f64,
    /// Inner radius of the enlarged annulus, the grid node closest to `r_in/2`.
    pub r_in_enlarged: f64,
    pub window: (f64, f64),
    /// Largest relative change of `u` on the window over all times.
    pub max_rel_change: f64,
}

/// Re-solve with the inner radius moved to about `r_in/2`, keeping the log
/// spacing so that nodes coincide, and compare on `window`.
pub fn truncation_sensitivity<F: SpaceTimeField + ?Sized>(
    p: &Params,
    grid: &AnnulusGrid,
    data: &F,
    window: (f64, f64),
    opts: &SolverOptions,
) -> Result<TruncationReport> {
    let h = grid.log_step();
    let extra = (std::f64::consts::LN_2 / h).round().max(1.0) as usize;
    let wide = AnnulusGrid {
        r_in: (grid.r_in.ln() - h * extra as f64).exp(),
        nr: grid.nr + extra,
        ..*grid
    };
    let src = BoundarySource::Custom {
        label: "truncation".into(),
    };
    let (a, b) = rayon::join(
        || solve_from(p, grid, data, src.clone(), opts),
        || solve_from(p, &wide, data, src.clone(), opts),
    );
    let (a, b) = (a?, b?);
    let mut worst: f64 = 0.0;
    for (ra, rb) in a.u.iter().zip(&b.u) {
        for (i, &r) in a.r.iter().enumerate() {
            if r >= window.0 && r <= window.1 {
                let (x, y) = (ra[i], rb[i + extra]);
                worst = worst.max((x - y).abs() / y);
            }
        }
    }
    Ok(TruncationReport {
        r_in: grid.r_in,
        r_in_enlarged: wide.r_in,
        window,
        max_rel_change: worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    Space,
    Time,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OrderRow {
    pub nr: usize,
    pub nt: usize,
    /// `Δ(ln r)` for space studies, `Δt` for time studies.
    pub step: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderStudy {
    pub label: String,
    pub kind: Refinement,
    pub rows: Vec<OrderRow>,
    pub fitted_order: f64,
}

/// Refine `nr` (space) or `nt` (time) over `levels` and fit the order of the
/// L∞ error against `exact`.
///
/// Each level pairs the solve with a second one refined in the other
/// direction and Richardson-extrapolates that direction away, so the
/// measured error isolates the one being refined: `2u(2nt) - u(nt)` for
/// space studies, `(4u(2nr-1) - u(nr))/3` on the shared nodes for time
/// studies. Levels run concurrently.
pub fn order_study<F: SpaceTimeField + ?Sized>(
    label: &str,
    p: &Params,
    base: &AnnulusGrid,
    exact: &F,
    kind: Refinement,
    levels: &[usize],
    opts: &SolverOptions,
) -> Result<OrderStudy> {
    let src = BoundarySource::Custom {
        label: label.into(),
    };
    let rows = levels
        .par_iter()
        .map(|&lvl| {
            let g = match kind {
                Refinement::Space => base.with_nr(lvl),
                Refinement::Time => base.with_nt(lvl),
            };
            let coarse = solve_from(p, &g, exact, src.clone(), opts)?;
            let (fine_grid, stride_t, stride_r, weight) = match kind {
                Refinement::Space => (g.with_nt(2 * g.nt), 2, 1, 1.0),
                Refinement::Time => (g.with_nr(2 * g.nr - 1), 1, 2, 1.0 / 3.0),
            };
            let fine = solve_from(p, &fine_grid, exact, src.clone(), opts)?;
            let mut worst: f64 = 0.0;
            for (k, row) in coarse.u.iter().enumerate() {
                for (i, &u) in row.iter().enumerate() {
                    let f = fine.u[k * stride_t][i * stride_r];
                    let extrapolated = f + weight * (f - u);
                    let e = exact.value(coarse.r[i], coarse.t[k])?;
                    worst = worst.max((extrapolated - e).abs());
                }
            }
            Ok(OrderRow {
                nr: g.nr,
                nt: g.nt,
                step: match kind {
                    Refinement::Space => g.log_step(),
                    Refinement::Time => g.dt(),
                },
                max_abs_error: worst,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fitted_order = fit_order(rows.iter().map(|r| (r.step, r.max_abs_error)))?;
    Ok(OrderStudy {
        label: label.into(),
        kind,
        rows,
        fitted_order,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTrial {
    pub trial: usize,
    /// Constant factor applied to B's boundary data to get A's.
    pub boundary_factor: f64,
    pub report: ComparisonReport,
}

/// Randomized ordered data pairs around `base`: B's initial data is `base`
/// with multiplicative noise, A's lies below it node by node, and A's
/// boundary data is a constant fraction of B's. Trial `i` is seeded with
/// `seed + i`, so results do not depend on scheduling.
pub fn randomized_comparison_trials<F: SpaceTimeField + ?Sized>(
    p: &Params,
    grid: &AnnulusGrid,
    base: &F,
    trials: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Vec<ComparisonTrial>> {
    let base0 = sample(base, grid, 0.0)?;
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
            let u0_b: Vec<f64> = base0
                .iter()
                .map(|&b| b * (0.3 * rng.gen_range(-1.0..1.0f64)).exp())
                .collect();
            let u0_a: Vec<f64> = u0_b
                .iter()
                .map(|&b| b * (-0.5 * rng.gen::<f64>()).exp())
                .collect();
            let factor = rng.gen_range(0.6..1.0);
            let label = |s: &str| BoundarySource::Custom {
                label: format!("trial {trial} {s}"),
            };
            let mut a_u0 = u0_a;
            let mut b_u0 = u0_b;
            // Boundary nodes follow the boundary data.
            let last = grid.nr - 1;
            let (lo, hi) = (base0[0], base0[last]);
            b_u0[0] = lo;
            b_u0[last] = hi;
            a_u0[0] = factor * lo;
            a_u0[last] = factor * hi;
            let sol_b = solve(p, grid, &b_u0, base, label("B"), opts)?;
            let sol_a = solve(p, grid, &a_u0, &Scaled(factor, base), label("A"), opts)?;
            Ok(ComparisonTrial {
                trial,
                boundary_factor: factor,
                report: check_comparison(&sol_a, &sol_b)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::BarenblattSolution;

    #[test]
    fn thomas_solves_small_system() {
        let lo = [0.0, -1.0, -1.0];
        let di = [2.0, 2.0, 2.0];
        let up = [-1.0, -1.0, 0.0];
        let mut rhs = [1.0, 0.0, 1.0];
        thomas(&lo, &di, &up, &mut rhs);
        for x in rhs {
            assert!((x - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_nodes() {
        let g = AnnulusGrid::new(0.1, 10.0, 5, 0.5, 10).unwrap();
        let r = g.nodes();
        assert_eq!(r[0], 0.1);
        assert_eq!(r[4], 10.0);
        assert!((r[2] - 1.0).abs() < 1e-14);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*g.times().last().unwrap(), 0.5);
        assert!(AnnulusGrid::new(0.0, 1.0, 5, 0.5, 10).is_err());
        assert!(AnnulusGrid::new(1.0, 1.0, 5, 0.5, 10).is_err());
    }

    #[test]
    fn constants_stay_constant() {
        for m in [0.0, 0.2] {
            let p = Params::default().with_m(m);
            let g = AnnulusGrid::new(0.1, 5.0, 41, 0.5, 20).unwrap();
            let c = |_: f64, _: f64| Ok(2.5);
            let sol = solve_from(
                &p,
                &g,
                &c,
                BoundarySource::Custom { label: "c".into() },
                &SolverOptions::default(),
            )
            .unwrap();
            for row in &sol.u {
                for &u in row {
                    assert!((u - 2.5).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn barenblatt_is_tracked() {
        let p = Params::default().with_m(0.2);
        let b = BarenblattSolution::new(&p, 1.0).unwrap();
        let g = AnnulusGrid::new(0.1, 5.0, 81, 0.5, 400).unwrap();
        let sol = solve_from(
            &p,
            &g,
            &b,
            BoundarySource::Barenblatt { k: 1.0 },
            &SolverOptions::default(),
        )
        .unwrap();
        let err = sol.max_rel_error(&b).unwrap();
        assert!(err < 1e-2, "{err}");
        assert!(sol.min_value() > 0.0);
        let last = *sol.r.last().unwrap();
        for (k, row) in sol.u.iter().enumerate().skip(1) {
            assert_eq!(row[0], b.value(0.1, sol.t[k]).unwrap());
            assert_eq!(*row.last().unwrap(), b.value(last, sol.t[k]).unwrap());
        }
    }

    #[test]
    fn identical_inputs_compare_equal() {
        let p = Params::default().with_m(0.1);
        let b = BarenblattSolution::new(&p, 1.0).unwrap();
        let g = AnnulusGrid::new(0.1, 5.0, 31, 0.3, 10).unwrap();
        let src = BoundarySource::Barenblatt { k: 1.0 };
        let opts = SolverOptions::default();
        let a = solve_from(&p, &g, &b, src.clone(), &opts).unwrap();
        let c = solve_from(&p, &g, &b, src, &opts).unwrap();
        let rep = check_comparison(&a, &c).unwrap();
        assert_eq!(rep.min_difference, 0.0);
        let other = solve_from(&p, &g.with_nr(33), &b, BoundarySource::Barenblatt { k: 1.0 }, &opts)
            .unwrap();
        assert!(matches!(check_comparison(&a, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn discontinuous_initial_data_is_accepted() {
        let p = Params::default();
        let g = AnnulusGrid::new(0.5, 4.0, 41, 0.2, 10).unwrap();
        let u0: Vec<f64> = g.nodes().iter().map(|&r| if r < 1.5 { 3.0 } else { 0.2 }).collect();
        let bc = |r: f64, _: f64| Ok(if r < 1.5 { 3.0 } else { 0.2 });
        let sol = solve(
            &p,
            &g,
            &u0,
            &bc,
            BoundarySource::Custom { label: "step".into() },
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(sol.min_value() > 0.0);
    }

    #[test]
    fn rejects_bad_initial_data() {
        let p = Params::default();
        let g = AnnulusGrid::new(0.5, 4.0, 5, 0.2, 10).unwrap();
        let bc = |_: f64, _: f64| Ok(1.0);
        let src = BoundarySource::Custom { label: "x".into() };
        let opts = SolverOptions::default();
        assert!(matches!(
            solve(&p, &g, &[1.0, 1.0, -1.0, 1.0, 1.0], &bc, src.clone(), &opts),
            Err(Error::PositivityLoss { node: 2, .. })
        ));
        assert!(matches!(
            solve(&p, &g, &[1.0; 4], &bc, src, &opts),
            Err(Error::GridMismatch(_))
        ));
    }
}
