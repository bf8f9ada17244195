//! The acceptance checks, one function each. Every check returns a
//! [`CriterionResult`] rather than panicking so that the command line and
//! the test suite report the same thing.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::farfield::{default_ladder, farfield_limit};
use crate::parabolic::{
    check_sandwich, discretization_error, order_study, randomized_comparison_trials,
    solve_from, AnnulusGrid, EnvelopePair, Refinement, SolverOptions,
};
use crate::params::{envelope_admissible, Params};
use crate::profile::{integrate_profile, ProfileOptions, ProfileSolution, ENVELOPE_TOL};
use crate::reference::{
    default_residual_steps, residual_refinement, BarenblattSolution, RefinementStudy,
    SelfSimilarSolution,
};
use crate::sweeps::{elliptic_sweep, parabolic_sweep, ParabolicSweepConfig};

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Overrides the profile tolerance of the uniqueness and sweep checks.
    pub tol: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            tol: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub elapsed_s: f64,
    pub budget_s: f64,
    /// Which sub-checks failed, or a one-line summary.
    pub detail: String,
    pub metrics: Value,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {:<28} {:>8.3}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed_s,
            self.detail
        )
    }
}

/// `(id, name, runtime budget in seconds)`.
pub const CRITERIA: [(u8, &str, f64); 10] = [
    (1, "constants identities", 1.0),
    (2, "blow-up expansion", 10.0),
    (3, "monotonicity", 10.0),
    (4, "envelope bound", 10.0),
    (5, "far-field limit", 30.0),
    (6, "uniqueness surrogate", 30.0),
    (7, "exact-solution oracles", 120.0),
    (8, "sandwich and comparison", 120.0),
    (9, "elliptic singular limit", 60.0),
    (10, "parabolic singular limit", 300.0),
];

/// Collects named sub-checks.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failed.push(what.into());
        }
    }
}

fn finish(
    id: u8,
    start: Instant,
    outcome: Result<(Checks, Value)>,
    summary: &str,
) -> CriterionResult {
    let (_, name, budget_s) = CRITERIA[id as usize - 1];
    let elapsed_s = start.elapsed().as_secs_f64();
    let (mut checks, metrics) = match outcome {
        Ok(x) => x,
        Err(e) => {
            let mut c = Checks::default();
            c.check(false, format!("error: {e}"));
            (c, Value::Null)
        }
    };
    checks.check(
        elapsed_s <= budget_s,
        format!("runtime {elapsed_s:.2}s over budget {budget_s}s"),
    );
    let passed = checks.failed.is_empty();
    CriterionResult {
        id,
        name,
        passed,
        elapsed_s,
        budget_s,
        detail: if passed {
            summary.to_string()
        } else {
            checks.failed.join("; ")
        },
        metrics,
    }
}

fn same_digits(a: f64, b: f64, digits: i32) -> bool {
    a == b || (a - b).abs() <= 0.5 * 10f64.powi(1 - digits) * b.abs()
}

/// Draw a parameter set satisfying the strict constraints.
pub fn random_strict_params(rng: &mut impl Rng) -> Params {
    loop {
        let n: u32 = rng.gen_range(3..=10);
        let crit = (n as f64 - 2.0) / n as f64;
        let m = if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(0.0..0.95 * crit)
        };
        let rho1 = rng.gen_range(0.2..4.0);
        let mut p = Params {
            n,
            m,
            rho1,
            beta: 1.0,
            lambda: rng.gen_range(0.1..10.0),
            t_horizon: rng.gen_range(0.1..10.0),
        };
        let beta0 = p.beta0().unwrap_or(0.0);
        p.beta = beta0 + rng.gen_range(1e-3..3.0);
        if p.validate(true).is_valid() {
            return p;
        }
    }
}

pub fn criterion_1(opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let out = (|| {
        let mut c = Checks::default();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut worst_ulps: f64 = 0.0;
        for i in 0..50 {
            let p = random_strict_params(&mut rng);
            let d = p.derive()?;
            let lhs = d.alpha_m * (1.0 - p.m);
            let rhs = 2.0 * p.beta + p.rho1;
            let ulps = (lhs - rhs).abs() / (f64::EPSILON * rhs);
            worst_ulps = worst_ulps.max(ulps);
            c.check(ulps <= 4.0, format!("sample {i}: alpha_m(1-m) off by {ulps:.1} ulp"));
            c.check(d.a3 > 0.0, format!("sample {i}: a3 = {} not positive", d.a3));
        }
        let rows = [
            (
                Params::default(),
                [3.0, 2.0, 1.0, 3.0, 3.0, -6.0],
            ),
            (
                Params {
                    n: 5,
                    m: 0.2,
                    ..Params::default()
                },
                [3.75, 2.5, 1.0, 8.4375, 8.4375, -6.85546875],
            ),
        ];
        for (p, want) in rows {
            let d = p.derive()?;
            let got = [d.alpha_m, d.a1, d.a2, d.a3, d.big_a1, d.big_a2];
            for (g, w) in got.iter().zip(want) {
                c.check(
                    same_digits(*g, w, 12),
                    format!("n = {}, m = {}: {g} vs {w}", p.n, p.m),
                );
            }
        }
        Ok((c, json!({ "samples": 50, "worst_ulps": worst_ulps })))
    })();
    finish(1, start, out, "50 random parameter sets and both reference rows agree")
}

/// `(n, rho1, beta, lambda)` configurations of the expansion checks.
pub const EXPANSION_CONFIGS: [(u32, f64, f64, f64); 3] =
    [(3, 1.0, 1.0, 1.0), (5, 1.0, 1.0, 2.0), (4, 2.0, 0.5, 1.0)];
pub const EXPANSION_MS: [f64; 2] = [0.0, 0.1];

pub fn expansion_params() -> Vec<Params> {
    let mut out = Vec::new();
    for (n, rho1, beta, lambda) in EXPANSION_CONFIGS {
        for m in EXPANSION_MS {
            out.push(Params {
                n,
                m,
                rho1,
                beta,
                lambda,
                t_horizon: 1.0,
            });
        }
    }
    out
}

fn expansion_profiles(tol: f64) -> Result<Vec<ProfileSolution>> {
    expansion_params()
        .par_iter()
        .map(|p| integrate_profile(p, &ProfileOptions::default().with_tol(tol)))
        .collect()
}

fn label(p: &Params) -> String {
    format!(
        "(n={}, rho1={}, beta={}, lambda={}, m={})",
        p.n, p.rho1, p.beta, p.lambda, p.m
    )
}

pub fn criterion_2(_opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let out = (|| {
        let mut c = Checks::default();
        let mut rows = Vec::new();
        for s in expansion_profiles(1e-12)? {
            let fit = s.origin_slope_fit(10.0)?;
            let res: Vec<f64> = [1e-2, 1e-3, 1e-4]
                .iter()
                .map(|&rho| s.expansion_residual(rho))
                .collect::<Result<_>>()?;
            c.check(
                fit.rel_error() <= 1e-3,
                format!("{}: slope off by {:.2e}", label(&s.params), fit.rel_error()),
            );
            c.check(
                res[1] < res[0] && res[2] < res[1],
                format!("{}: expansion residuals {res:?} not decreasing", label(&s.params)),
            );
            rows.push(json!({
                "params": s.params,
                "slope_fit": fit.slope_quadratic,
                "expected": fit.expected,
                "rel_error": fit.rel_error(),
                "residual_over_rho2": res,
            }));
        }
        Ok((c, json!(rows)))
    })();
    finish(2, start, out, "origin slope within 0.1% and residuals shrink in all 6 profiles")
}

pub fn criterion_3(_opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let out = (|| {
        let mut c = Checks::default();
        let mut nodes = 0usize;
        for s in expansion_profiles(1e-12)? {
            let mut bad_w = 0usize;
            let mut bad_v = 0usize;
            for (i, &rho) in s.rho_grid.iter().enumerate() {
                if !(s.wbar_rho[i] > 0.0) {
                    bad_w += 1;
                }
                if !(s.eval_v_prime(s.r_of_rho(rho))? < 0.0) {
                    bad_v += 1;
                }
            }
            nodes += s.len();
            c.check(
                bad_w == 0 && bad_v == 0,
                format!("{}: {bad_w} nodes with wbar_rho <= 0, {bad_v} with v' >= 0", label(&s.params)),
            );
        }
        Ok((c, json!({ "nodes_checked": nodes })))
    })();
    finish(3, start, out, "wbar_rho > 0 and v' < 0 at every node of all 6 profiles")
}

pub fn criterion_4(_opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let out = (|| {
        let mut c = Checks::default();
        let mut rows = Vec::new();
        for s in expansion_profiles(1e-12)? {
            let admissible = envelope_admissible(&s.params, &s.consts);
            let rep = s.check_envelope();
            if admissible {
                c.check(
                    rep.holds(),
                    format!(
                        "{}: {} envelope violations (min slack {:.2e}, {:.2e})",
                        label(&s.params),
                        rep.violations,
                        rep.min_lower,
                        rep.min_upper
                    ),
                );
            }
            rows.push(json!({
                "params": s.params,
                "admissible": admissible,
                "min_lower": rep.min_lower,
                "min_upper": rep.min_upper,
                "violations": rep.violations,
                "tolerance": ENVELOPE_TOL,
            }));
        }
        Ok((c, json!(rows)))
    })();
    finish(4, start, out, "two-sided bound holds at every node of every admissible profile")
}

pub fn criterion_5(_opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let out = (|| {
        let mut c = Checks::default();
        let s = integrate_profile(&Params::default(), &ProfileOptions::default().with_rho_max(1000.0))?;
        let rep = farfield_limit(&s, &default_ladder())?;
        c.check(
            rep.rel_error_raw <= 0.05,
            format!("raw error {:.2e} above 5%", rep.rel_error_raw),
        );
        c.check(
            rep.rel_error_extrapolated <= 0.01,
            format!("extrapolated error {:.2e} above 1%", rep.rel_error_extrapolated),
        );
        c.check(
            (-1.3..=-0.7).contains(&rep.tail_slope),
            format!("tail slope {:.3} outside [-1.3, -0.7]", rep.tail_slope),
        );
        Ok((c, serde_json::to_value(&rep)?))
    })();
    finish(5, start, out, "r^2 v -> 2 with a 1/r tail")
}

pub fn criterion_6(opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let tol = opts.tol.unwrap_or(1e-10);
    let out = (|| {
        let mut c = Checks::default();
        let rows = expansion_params()
            .par_iter()
            .map(|p| {
                let rho_max = 1.01 * 10f64.powf(p.rho1 / p.beta);
                let o = ProfileOptions::default().with_rho_max(rho_max).with_tol(tol);
                let a = integrate_profile(p, &o)?;
                let b = integrate_profile(p, &o.with_rho0(0.5 * a.rho0))?;
                let mut worst: f64 = 0.0;
                for i in 0..=200 {
                    let r = 0.1 * 100f64.powf(i as f64 / 200.0);
                    worst = worst.max((a.eval_v(r)? / b.eval_v(r)? - 1.0).abs());
                }
                Ok((*p, worst))
            })
            .collect::<Result<Vec<_>>>()?;
        for (p, worst) in &rows {
            c.check(
                *worst <= 10.0 * tol,
                format!("{}: change {worst:.2e} above 10 tol", label(p)),
            );
        }
        let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        Ok((c, json!({ "tol": tol, "worst_rel_change": worst, "ratio": worst / tol })))
    })();
    finish(6, start, out, "halving rho0 is invisible at 10x tolerance")
}

/// Parameters of the exact-solution oracles.
pub fn oracle_params() -> Params {
    Params::default().with_m(0.2)
}

pub fn oracle_grid() -> AnnulusGrid {
    AnnulusGrid {
        r_in: 0.1,
        r_out: 5.0,
        nr: 41,
        t_end: 0.5,
        nt: 400,
    }
}

pub const SPACE_LEVELS: [usize; 3] = [21, 41, 81];
pub const TIME_LEVELS: [usize; 4] = [25, 50, 100, 200];
/// `nr` of the time-refinement studies.
pub const TIME_STUDY_NR: usize = 201;

/// Residual refinement of the Barenblatt solution and of the self-similar
/// lift for `m ∈ {0, 0.2}` at `r ∈ {0.5, 1, 2}`, `t ∈ {0.25, 0.5}`.
pub fn exact_residual_studies() -> Result<Vec<RefinementStudy>> {
    let points: Vec<(f64, f64)> = [0.5, 1.0, 2.0]
        .iter()
        .flat_map(|&r| [0.25, 0.5].map(|t| (r, t)))
        .collect();
    let steps = default_residual_steps();
    let mut out = Vec::new();
    for m in [0.0, 0.2] {
        let p = Params::default().with_m(m);
        let b = BarenblattSolution::new(&p, 1.0)?;
        out.push(residual_refinement(&format!("barenblatt m={m}"), &b, &p, &points, &steps)?);
        let prof = integrate_profile(&p, &ProfileOptions::default().with_tol(1e-12))?;
        let lift = SelfSimilarSolution::new(prof)?;
        out.push(residual_refinement(&format!("self-similar m={m}"), &lift, &p, &points, &steps)?);
    }
    Ok(out)
}

pub fn criterion_7(_opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let out = (|| {
        let mut c = Checks::default();
        let residual_studies = exact_residual_studies()?;
        for s in &residual_studies {
            c.check(
                (s.fitted_order - 2.0).abs() <= 0.3,
                format!("{} residual order {:.3}", s.label, s.fitted_order),
            );
        }

        let p = oracle_params();
        let grid = oracle_grid();
        let so = SolverOptions::default();
        let b = BarenblattSolution::new(&p, 1.0)?;
        let prof = integrate_profile(
            &p,
            &ProfileOptions::default().with_rho_max(1.01 * grid.r_out * p.t_horizon.powf(p.beta)),
        )?;
        let lift = SelfSimilarSolution::new(prof)?;
        let time_grid = grid.with_nr(TIME_STUDY_NR);
        let studies = [
            order_study("barenblatt", &p, &grid, &b, Refinement::Space, &SPACE_LEVELS, &so)?,
            order_study("barenblatt", &p, &time_grid, &b, Refinement::Time, &TIME_LEVELS, &so)?,
            order_study("self-similar", &p, &grid, &lift, Refinement::Space, &SPACE_LEVELS, &so)?,
            order_study("self-similar", &p, &time_grid, &lift, Refinement::Time, &TIME_LEVELS, &so)?,
        ];
        for s in &studies {
            let (want, band) = match s.kind {
                Refinement::Space => (2.0, 0.3),
                Refinement::Time => (1.0, 0.2),
            };
            c.check(
                (s.fitted_order - want).abs() <= band,
                format!("{} {:?} order {:.3}", s.label, s.kind, s.fitted_order),
            );
        }
        Ok((
            c,
            json!({ "residual_studies": residual_studies, "solver_studies": studies }),
        ))
    })();
    finish(7, start, out, "residual order 2, solver orders 2 in space and 1 in time")
}

pub const SANDWICH_LAMBDAS: (f64, f64) = (2.0, 1.0);
pub const SLACK_FACTOR: f64 = 5.0;
pub const COMPARISON_TRIALS: usize = 20;

pub fn criterion_8(opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let out = (|| {
        let mut c = Checks::default();
        let p = Params::default();
        let grid = AnnulusGrid::default_for(&p);
        let so = SolverOptions::default();
        let env = EnvelopePair::new(&p, SANDWICH_LAMBDAS.0, SANDWICH_LAMBDAS.1, grid.r_out, 1e-10)?;
        let disc = discretization_error(&p, &grid, &env.upper, &so)?;
        let tol = SLACK_FACTOR * disc;
        let gm = env.geometric_mean();
        let sol = solve_from(&p, &grid, &gm, env.source(), &so)?;
        let sandwich = check_sandwich(&sol, &env.lower, &env.upper, tol)?;
        c.check(
            sandwich.holds(),
            format!(
                "{} sandwich violations (min slack {:.2e}, {:.2e}; tolerance {tol:.2e})",
                sandwich.violations, sandwich.min_lower, sandwich.min_upper
            ),
        );
        let trials = randomized_comparison_trials(&p, &grid, &gm, COMPARISON_TRIALS, opts.seed, &so)?;
        let worst = trials
            .iter()
            .map(|t| t.report.min_difference)
            .fold(f64::INFINITY, f64::min);
        for t in &trials {
            c.check(
                t.report.ordered(tol),
                format!("trial {} ordering lost: {:.2e}", t.trial, t.report.min_difference),
            );
        }
        Ok((
            c,
            json!({
                "discretization_error": disc,
                "tolerance": tol,
                "min_lower_slack": sandwich.min_lower,
                "min_upper_slack": sandwich.min_upper,
                "trials": trials.len(),
                "worst_trial_difference": worst,
            }),
        ))
    })();
    finish(8, start, out, "geometric-mean data stays sandwiched; 20 ordered pairs stay ordered")
}

pub const ELLIPTIC_SWEEP_MS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
pub const ELLIPTIC_ANNULUS: (f64, f64) = (0.5, 2.0);

pub fn criterion_9(opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let out = (|| {
        let mut c = Checks::default();
        let tol = opts.tol.unwrap_or(1e-10);
        let rep = elliptic_sweep(&Params::default(), &ELLIPTIC_SWEEP_MS, ELLIPTIC_ANNULUS, tol)?;
        let norms = |f: fn(&crate::sweeps::NormRow) -> Option<f64>| -> Vec<f64> {
            rep.rows.iter().map(|r| f(r).unwrap_or(f64::NAN)).collect()
        };
        let c0 = norms(|r| Some(r.c0_norm));
        c.check(
            rep.strictly_decreasing(|r| Some(r.c0_norm)),
            format!("C0 norms {c0:.4?} not strictly decreasing"),
        );
        c.check(
            rep.strictly_decreasing(|r| r.c1_norm),
            format!("C1 norms {:.4?} not strictly decreasing", norms(|r| r.c1_norm)),
        );
        c.check(
            rep.strictly_decreasing(|r| r.c2_norm),
            format!("C2 norms {:.4?} not strictly decreasing", norms(|r| r.c2_norm)),
        );
        let first = rep.row(0.2).map(|r| r.c0_norm).unwrap_or(f64::NAN);
        let last = rep.row(0.025).map(|r| r.c0_norm).unwrap_or(f64::NAN);
        c.check(
            last < 0.25 * first,
            format!("C0 ratio m=0.025 / m=0.2 is {:.3}, not below 0.25", last / first),
        );
        Ok((c, serde_json::to_value(&rep)?))
    })();
    finish(9, start, out, "C0, C1, C2 distances shrink with m")
}

pub const PARABOLIC_SWEEP_MS: [f64; 3] = [0.2, 0.1, 0.05];

pub fn criterion_10(_opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let out = (|| {
        let mut c = Checks::default();
        let p = Params::default();
        let grid = AnnulusGrid::default_for(&p);
        let rep = parabolic_sweep(
            &p,
            &PARABOLIC_SWEEP_MS,
            &grid,
            &ParabolicSweepConfig::default(),
            &SolverOptions::default(),
        )?;
        let norms: Vec<f64> = rep.rows.iter().map(|r| r.c0_norm).collect();
        c.check(
            rep.strictly_decreasing(|r| Some(r.c0_norm)),
            format!("sup norms {norms:.4?} not strictly decreasing"),
        );
        for s in rep.sandwiches.iter().filter(|s| s.m > 0.0) {
            c.check(
                s.report.holds(),
                format!(
                    "m={}: {} sandwich violations, {} nodes where the envelopes cross",
                    s.m, s.report.violations, s.report.envelope_crossings
                ),
            );
        }
        Ok((c, serde_json::to_value(&rep)?))
    })();
    finish(10, start, out, "sup distances shrink with m and every run stays sandwiched")
}

pub fn run_criterion(id: u8, opts: &VerifyOptions) -> Option<CriterionResult> {
    Some(match id {
        1 => criterion_1(opts),
        2 => criterion_2(opts),
        3 => criterion_3(opts),
        4 => criterion_4(opts),
        5 => criterion_5(opts),
        6 => criterion_6(opts),
        7 => criterion_7(opts),
        8 => criterion_8(opts),
        9 => criterion_9(opts),
        10 => criterion_10(opts),
        _ => return None,
    })
}

/// Run the selected criteria in order. Each runs alone so that its runtime
/// is measured without competition from the others.
pub fn run_all(ids: &[u8], opts: &VerifyOptions) -> Vec<CriterionResult> {
    ids.iter().filter_map(|&id| run_criterion(id, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digits() {
        assert!(same_digits(1.0 + 1e-13, 1.0, 12));
        assert!(!same_digits(1.0 + 1e-10, 1.0, 12));
    }

    #[test]
    fn random_params_are_strict() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert!(random_strict_params(&mut rng).validate(true).is_valid());
        }
    }

    #[test]
    fn unknown_criterion() {
        assert!(run_criterion(11, &VerifyOptions::default()).is_none());
    }
}
