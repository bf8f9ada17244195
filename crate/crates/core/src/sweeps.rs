//! `m → 0⁺` sweeps: sup-norm distance of the `m`-problem to the logarithmic
//! one, for profiles (with first and second derivatives) and for parabolic
//! solutions started between self-similar envelopes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farfield::linear_fit;
use crate::parabolic::{
    check_sandwich, discretization_error, sample, solve, AnnulusGrid, EnvelopePair,
    ParabolicSolution, SandwichReport, SolverOptions,
};
use crate::params::Params;
use crate::profile::{integrate_profile, ProfileOptions, ProfileSolution};
use crate::reference::SpaceTimeField;

/// Norms at or below this are treated as solver noise by [`fit_rate`].
pub const NORM_NOISE_FLOOR: f64 = 1e-12;

/// Points of the fixed log-uniform mesh on the elliptic annulus.
pub const ELLIPTIC_MESH_POINTS: usize = 200;

/// Parabolic norms are taken over `t ∈ [0.1, 0.9]·t_end`.
pub const PARABOLIC_WINDOW: (f64, f64) = (0.1, 0.9);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Elliptic,
    Parabolic,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormRow {
    pub m: f64,
    /// Sup-norm difference of the function.
    pub c0_norm: f64,
    /// First and second radial derivatives; elliptic sweeps only.
    pub c1_norm: Option<f64>,
    pub c2_norm: Option<f64>,
    /// Failure for this `m`, if any; its norms are NaN.
    pub failure: Option<String>,
}

impl NormRow {
    fn failed(m: f64, e: Error) -> Self {
        Self {
            m,
            c0_norm: f64::NAN,
            c1_norm: None,
            c2_norm: None,
            failure: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Sandwich check of one parabolic run against its own envelopes.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSandwich {
    pub m: f64,
    pub discretization_error: f64,
    pub report: SandwichReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub m_values: Vec<f64>,
    pub annulus: (f64, f64),
    pub rows: Vec<NormRow>,
    pub fitted_rate: Option<RateFit>,
    /// Parabolic sweeps only; includes the `m = 0` reference.
    pub sandwiches: Vec<SweepSandwich>,
}

impl SweepReport {
    /// Rows with `m > 0`, ordered by decreasing `m`.
    fn positive_rows(&self) -> Vec<&NormRow> {
        let mut rows: Vec<&NormRow> = self.rows.iter().filter(|r| r.m > 0.0).collect();
        rows.sort_by(|a, b| b.m.total_cmp(&a.m));
        rows
    }

    /// Every norm selected by `pick` strictly decreases as `m` decreases.
    pub fn strictly_decreasing(&self, pick: impl Fn(&NormRow) -> Option<f64>) -> bool {
        let vals: Vec<Option<f64>> = self.positive_rows().iter().map(|r| pick(r)).collect();
        vals.len() >= 2
            && vals.iter().all(|v| v.is_some_and(f64::is_finite))
            && vals.windows(2).all(|w| w[1].unwrap() < w[0].unwrap())
    }

    pub fn row(&self, m: f64) -> Option<&NormRow> {
        self.rows.iter().find(|r| r.m == m)
    }
}

fn log_mesh(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                lo * (step * i as f64).exp()
            }
        })
        .collect()
}

fn check_m_values(base: &Params, m_values: &[f64]) -> Result<()> {
    if m_values.is_empty() {
        return Err(Error::Config("m_values is empty".into()));
    }
    for &m in m_values {
        base.with_m(m).validate(true).into_result()?;
    }
    Ok(())
}

/// Samples of `(v, v', v'')` on a mesh.
struct Jet {
    v: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

fn jet(s: &ProfileSolution, mesh: &[f64]) -> Result<Jet> {
    let mut j = Jet {
        v: Vec::with_capacity(mesh.len()),
        d1: Vec::with_capacity(mesh.len()),
        d2: Vec::with_capacity(mesh.len()),
    };
    for &r in mesh {
        j.v.push(s.eval_v(r)?);
        j.d1.push(s.eval_v_prime(r)?);
        j.d2.push(s.eval_v_second(r)?);
    }
    Ok(j)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// C⁰, C¹ and C² distances of `v^(m)` to `v^(0)` on `annulus`. `base.m` is
/// ignored. Per-`m` failures are recorded in the row.
pub fn elliptic_sweep(
    base: &Params,
    m_values: &[f64],
    annulus: (f64, f64),
    tol: f64,
) -> Result<SweepReport> {
    check_m_values(base, m_values)?;
    if !(annulus.0 > 0.0 && annulus.1 > annulus.0) {
        return Err(Error::Config(format!("bad annulus {annulus:?}")));
    }
    let rho_max = (1.01 * annulus.1).powf(base.rho1 / base.beta).max(10.0);
    let opts = ProfileOptions::default().with_rho_max(rho_max).with_tol(tol);
    let mesh = log_mesh(annulus.0, annulus.1, ELLIPTIC_MESH_POINTS);

    let reference = integrate_profile(&base.with_m(0.0), &opts)?;
    let ref_jet = jet(&reference, &mesh)?;

    let rows = m_values
        .par_iter()
        .map(|&m| {
            let out = integrate_profile(&base.with_m(m), &opts).and_then(|s| jet(&s, &mesh));
            match out {
                Ok(j) => NormRow {
                    m,
                    c0_norm: sup_diff(&j.v, &ref_jet.v),
                    c1_norm: Some(sup_diff(&j.d1, &ref_jet.d1)),
                    c2_norm: Some(sup_diff(&j.d2, &ref_jet.d2)),
                    failure: None,
                },
                Err(e) => NormRow::failed(m, e),
            }
        })
        .collect();

    let mut report = SweepReport {
        kind: SweepKind::Elliptic,
        m_values: m_values.to_vec(),
        annulus,
        rows,
        fitted_rate: None,
        sandwiches: Vec::new(),
    };
    report.fitted_rate = fit_rate(&report).ok();
    Ok(report)
}

/// Initial data between the envelopes `V_{λ1} <= V_{λ2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeInit {
    Lower,
    Upper,
    GeometricMean,
}

impl EnvelopeInit {
    pub fn field<'a>(&self, env: &'a EnvelopePair) -> EnvelopeField<'a> {
        EnvelopeField(*self, env)
    }
}

/// The field an [`EnvelopeInit`] selects from a pair.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeField<'a>(EnvelopeInit, &'a EnvelopePair);

impl SpaceTimeField for EnvelopeField<'_> {
    fn value(&self, r: f64, t: f64) -> Result<f64> {
        match self.0 {
            EnvelopeInit::Lower => self.1.lower.value(r, t),
            EnvelopeInit::Upper => self.1.upper.value(r, t),
            EnvelopeInit::GeometricMean => self.1.geometric_mean().value(r, t),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParabolicSweepConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub init: EnvelopeInit,
    /// Profile tolerance for the envelopes.
    pub tol: f64,
    /// Sandwich slack tolerance, in units of the measured discretization error.
    pub slack_factor: f64,
}

impl Default for ParabolicSweepConfig {
    fn default() -> Self {
        Self {
            lambda1: 2.0,
            lambda2: 1.0,
            init: EnvelopeInit::GeometricMean,
            tol: 1e-10,
            slack_factor: 5.0,
        }
    }
}

struct ParabolicRun {
    sol: ParabolicSolution,
    sandwich: SweepSandwich,
}

fn parabolic_run(
    p: &Params,
    grid: &AnnulusGrid,
    cfg: &ParabolicSweepConfig,
    opts: &SolverOptions,
) -> Result<ParabolicRun> {
    let env = EnvelopePair::new(p, cfg.lambda1, cfg.lambda2, grid.r_out, cfg.tol)?;
    let data = cfg.init.field(&env);
    let u0 = sample(&data, grid, 0.0)?;
    let (sol, disc) = rayon::join(
        || solve(p, grid, &u0, &data, env.source(), opts),
        || discretization_error(p, grid, &env.upper, opts),
    );
    let (sol, disc) = (sol?, disc?);
    let report = check_sandwich(&sol, &env.lower, &env.upper, cfg.slack_factor * disc)?;
    Ok(ParabolicRun {
        sol,
        sandwich: SweepSandwich {
            m: p.m,
            discretization_error: disc,
            report,
        },
    })
}

/// Sup-norm distance of `u^(m)` to `u^(0)` over interior nodes and the time
/// window, each run started from `cfg.init` built on its own envelopes.
pub fn parabolic_sweep(
    base: &Params,
    m_values: &[f64],
    grid: &AnnulusGrid,
    cfg: &ParabolicSweepConfig,
    opts: &SolverOptions,
) -> Result<SweepReport> {
    check_m_values(base, m_values)?;
    grid.check()?;
    if grid.t_end >= base.t_horizon {
        return Err(Error::Config(format!(
            "t_end = {} must stay below T = {}",
            grid.t_end, base.t_horizon
        )));
    }
    let reference = parabolic_run(&base.with_m(0.0), grid, cfg, opts)?;
    let (k_lo, k_hi) = (
        (PARABOLIC_WINDOW.0 * grid.nt as f64).ceil() as usize,
        (PARABOLIC_WINDOW.1 * grid.nt as f64).floor() as usize,
    );

    let runs: Vec<(f64, Result<ParabolicRun>)> = m_values
        .par_iter()
        .map(|&m| (m, parabolic_run(&base.with_m(m), grid, cfg, opts)))
        .collect();

    let mut rows = Vec::with_capacity(runs.len());
    let mut sandwiches = vec![reference.sandwich.clone()];
    for (m, run) in runs {
        match run {
            Ok(run) => {
                let mut sup: f64 = 0.0;
                for k in k_lo..=k_hi {
                    let (a, b) = (&run.sol.u[k], &reference.sol.u[k]);
                    sup = sup.max(sup_diff(&a[1..grid.nr - 1], &b[1..grid.nr - 1]));
                }
                rows.push(NormRow {
                    m,
                    c0_norm: sup,
                    c1_norm: None,
                    c2_norm: None,
                    failure: None,
                });
                if m != 0.0 {
                    sandwiches.push(run.sandwich);
                }
            }
            Err(e) => rows.push(NormRow::failed(m, e)),
        }
    }

    let mut report = SweepReport {
        kind: SweepKind::Parabolic,
        m_values: m_values.to_vec(),
        annulus: (grid.r_in, grid.r_out),
        rows,
        fitted_rate: None,
        sandwiches,
    };
    report.fitted_rate = fit_rate(&report).ok();
    Ok(report)
}

/// Least-squares slope of `log c0_norm` against `log m` over rows with
/// `m > 0`, with its coefficient of determination.
pub fn fit_rate(report: &SweepReport) -> Result<RateFit> {
    fit_rate_pairs(
        report
            .rows
            .iter()
            .filter(|r| r.m > 0.0 && r.failure.is_none())
            .map(|r| (r.m, r.c0_norm)),
    )
}

pub fn fit_rate_pairs<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Result<RateFit> {
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
    if pairs.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least three m values, got {}",
            pairs.len()
        )));
    }
    if let Some(&(m, v)) = pairs.iter().find(|p| !(p.1 > NORM_NOISE_FLOOR)) {
        return Err(Error::DegenerateFit(format!(
            "norm {v:e} at m = {m} is below the noise floor"
        )));
    }
    let pts: Vec<(f64, f64)> = pairs.iter().map(|&(m, v)| (m.ln(), v.ln())).collect();
    let (a, b) = linear_fit(&pts)?;
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum();
    Ok(RateFit {
        rate: b,
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_rates() {
        let ms = [0.2, 0.1, 0.05, 0.025];
        let one = fit_rate_pairs(ms.iter().map(|&m| (m, 3.0 * m))).unwrap();
        assert!((one.rate - 1.0).abs() < 1e-12);
        assert!((one.r_squared - 1.0).abs() < 1e-12);
        let two = fit_rate_pairs(ms.iter().map(|&m| (m, m * m))).unwrap();
        assert!((two.rate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_rates() {
        assert!(matches!(
            fit_rate_pairs([(0.2, 1.0), (0.1, 0.5)]),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_rate_pairs([(0.2, 1.0), (0.1, 0.5), (0.05, 0.0)]),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn elliptic_self_comparison_is_zero() {
        let rep = elliptic_sweep(&Params::default(), &[0.1, 0.0], (0.5, 2.0), 1e-10).unwrap();
        let zero = rep.row(0.0).unwrap();
        assert_eq!(zero.c0_norm, 0.0);
        assert_eq!(zero.c1_norm, Some(0.0));
        assert_eq!(zero.c2_norm, Some(0.0));
        assert!(rep.row(0.1).unwrap().c0_norm > 0.0);
    }

    #[test]
    fn supercritical_m_is_rejected() {
        assert!(elliptic_sweep(&Params::default(), &[0.4], (0.5, 2.0), 1e-10).is_err());
    }

    #[test]
    fn mesh_is_fixed() {
        let mesh = log_mesh(0.5, 2.0, ELLIPTIC_MESH_POINTS);
        assert_eq!(mesh.len(), 200);
        assert_eq!(mesh[0], 0.5);
        assert_eq!(mesh[199], 2.0);
    }
}
