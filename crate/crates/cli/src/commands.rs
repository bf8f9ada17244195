use std::io::Write as _;
use std::path::Path;

use fdlimit::farfield::{farfield_limit, radius_ladder};
use fdlimit::parabolic::{
    check_sandwich, sample, solve, AnnulusGrid, BoundarySource, EnvelopePair, ParabolicSolution,
    SolverOptions,
};
use fdlimit::params::{c0, envelope_admissible};
use fdlimit::reference::BarenblattSolution;
use fdlimit::sweeps::{elliptic_sweep, parabolic_sweep, EnvelopeInit, ParabolicSweepConfig};
use fdlimit::verify::{exact_residual_studies, run_criterion, VerifyOptions};
use fdlimit::{integrate_profile, Params, ProfileOptions};
use serde_json::{json, Value};

use crate::config::{InitKind, RunConfig};
use crate::output::{Csv, Sink};
use crate::{Cli, CliError, Command, GridArgs, ParamArgs, VerifyCommand};

const DEFAULT_TOL: f64 = 1e-10;

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.tol.is_some() {
        cfg.tol = cli.tol;
    }
    if let Some(tol) = cfg.tol {
        if !(tol > 0.0 && tol < 1e-2) {
            return Err(CliError::Config(format!("tol = {tol} must lie in (0, 1e-2)")));
        }
    }

    match cli.command {
        Command::Constants { params } => {
            apply_params(&mut cfg.params, &params);
            constants(&cfg)
        }
        Command::Profile {
            params,
            rho_max,
            rho0,
        } => {
            apply_params(&mut cfg.params, &params);
            set(&mut cfg.profile.rho_max, rho_max);
            if rho0.is_some() {
                cfg.profile.rho0 = rho0;
            }
            profile(&cfg)
        }
        Command::Farfield {
            params,
            r_min,
            r_max,
            samples,
        } => {
            apply_params(&mut cfg.params, &params);
            set(&mut cfg.farfield.r_min, r_min);
            set(&mut cfg.farfield.r_max, r_max);
            set(&mut cfg.farfield.samples, samples);
            farfield(&cfg)
        }
        Command::Parabolic {
            params,
            grid,
            lambda1,
            lambda2,
            init,
            init_file,
            k,
        } => {
            apply_params(&mut cfg.params, &params);
            let g = resolve_grid(&cfg, &grid)?;
            cfg.parabolic.grid = Some(g);
            set(&mut cfg.parabolic.lambda1, lambda1);
            set(&mut cfg.parabolic.lambda2, lambda2);
            set(&mut cfg.parabolic.init, init);
            set(&mut cfg.parabolic.k, k);
            if init_file.is_some() {
                cfg.parabolic.init_file = init_file;
            }
            parabolic(&cfg)
        }
        Command::SweepElliptic {
            params,
            m_values,
            r_lo,
            r_hi,
        } => {
            apply_params(&mut cfg.params, &params);
            set(&mut cfg.sweeps.elliptic_m, m_values);
            set(&mut cfg.sweeps.annulus.0, r_lo);
            set(&mut cfg.sweeps.annulus.1, r_hi);
            sweep_elliptic(&cfg)
        }
        Command::SweepParabolic {
            params,
            grid,
            m_values,
            lambda1,
            lambda2,
            init,
        } => {
            apply_params(&mut cfg.params, &params);
            let g = resolve_grid(&cfg, &grid)?;
            cfg.parabolic.grid = Some(g);
            set(&mut cfg.sweeps.parabolic_m, m_values);
            set(&mut cfg.parabolic.lambda1, lambda1);
            set(&mut cfg.parabolic.lambda2, lambda2);
            set(&mut cfg.parabolic.init, init);
            sweep_parabolic(&cfg)
        }
        Command::Verify { which } => match which {
            VerifyCommand::Exact => verify_exact(&cfg),
            VerifyCommand::All { only, skip } => {
                if only.is_some() {
                    cfg.verify.only = only;
                }
                set(&mut cfg.verify.skip, skip);
                verify_all(&cfg)
            }
        },
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_params(p: &mut Params, a: &ParamArgs) {
    set(&mut p.n, a.n);
    set(&mut p.m, a.m);
    set(&mut p.rho1, a.rho1);
    set(&mut p.beta, a.beta);
    set(&mut p.lambda, a.lambda);
    set(&mut p.t_horizon, a.t_horizon);
}

fn resolve_grid(cfg: &RunConfig, a: &GridArgs) -> Result<AnnulusGrid, CliError> {
    let mut g = cfg
        .parabolic
        .grid
        .unwrap_or_else(|| AnnulusGrid::default_for(&cfg.params));
    set(&mut g.r_in, a.r_in);
    set(&mut g.r_out, a.r_out);
    set(&mut g.nr, a.nr);
    set(&mut g.t_end, a.t_end);
    set(&mut g.nt, a.nt);
    g.check()?;
    Ok(g)
}

fn require_valid(p: &Params, strict: bool) -> Result<(), CliError> {
    let report = p.validate(strict);
    if report.is_valid() {
        return Ok(());
    }
    let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
    Err(CliError::Config(msgs.join("; ")))
}

fn tol(cfg: &RunConfig) -> f64 {
    cfg.tol.unwrap_or(DEFAULT_TOL)
}

fn constants(cfg: &RunConfig) -> Result<(), CliError> {
    let p = &cfg.params;
    require_valid(p, false)?;
    let d = p.derive()?;
    let mut flat = match serde_json::to_value(&d)? {
        Value::Object(map) => map,
        _ => unreachable!("derived constants serialize to an object"),
    };
    flat.insert("C0".into(), json!(c0(p)));
    flat.insert("strict".into(), json!(p.validate(true).is_valid()));
    flat.insert("envelope_admissible".into(), json!(envelope_admissible(p, &d)));
    Sink::new(cfg.out.clone())?.document("constants", &Value::Object(flat))
}

fn profile(cfg: &RunConfig) -> Result<(), CliError> {
    let p = &cfg.params;
    require_valid(p, true)?;
    let mut opts = ProfileOptions::default()
        .with_rho_max(cfg.profile.rho_max)
        .with_tol(tol(cfg));
    if let Some(rho0) = cfg.profile.rho0 {
        opts = opts.with_rho0(rho0);
    }
    let s = integrate_profile(p, &opts)?;
    let mut csv = Csv::new(&["rho", "wbar", "wbar_rho", "r", "v", "v_prime"]);
    for (i, &rho) in s.rho_grid.iter().enumerate() {
        let r = s.r_of_rho(rho);
        csv.row(&[rho, s.wbar[i], s.wbar_rho[i], r, s.eval_v(r)?, s.eval_v_prime(r)?]);
    }
    let fit = s.origin_slope_fit(10.0)?;
    let env = s.check_envelope();
    let sink = Sink::new(cfg.out.clone())?;
    sink.csv("profile", &csv)?;
    sink.summary(
        "profile",
        &json!({
            "params": p,
            "rho0": s.rho0,
            "rho_max": s.rho_max(),
            "r_max": s.r_max(),
            "nodes": s.len(),
            "integrator_tol": s.integrator_tol,
            "steps": { "accepted": s.stats.accepted, "rejected": s.stats.rejected },
            "origin_slope": { "fitted": fit.slope_quadratic, "expected": fit.expected, "rel_error": fit.rel_error() },
            "envelope": { "admissible": env.admissible, "holds": env.holds(), "min_lower": env.min_lower, "min_upper": env.min_upper },
        }),
    )
}

fn farfield(cfg: &RunConfig) -> Result<(), CliError> {
    let p = &cfg.params;
    require_valid(p, true)?;
    let f = &cfg.farfield;
    if !(f.r_min > 0.0 && f.r_max > f.r_min && f.samples >= 3) {
        return Err(CliError::Config(format!(
            "need 0 < r_min < r_max and samples >= 3, got {}, {}, {}",
            f.r_min, f.r_max, f.samples
        )));
    }
    let rho_max = f.r_max.powf(p.rho1 / p.beta) * (1.0 + 1e-9);
    let s = integrate_profile(p, &ProfileOptions::default().with_rho_max(rho_max).with_tol(tol(cfg)))?;
    let rep = farfield_limit(&s, &radius_ladder(f.r_min, f.r_max, f.samples))?;
    let mut csv = Csv::new(&["r", "w", "abs_err", "rel_err"]);
    for &(r, w) in &rep.samples {
        let err = (w - rep.target).abs();
        csv.row(&[r, w, err, err / rep.target]);
    }
    let sink = Sink::new(cfg.out.clone())?;
    sink.csv("farfield", &csv)?;
    sink.summary(
        "farfield",
        &json!({
            "mode": rep.mode,
            "target": rep.target,
            "raw_limit": rep.raw_limit,
            "extrapolated_limit": rep.extrapolated_limit,
            "rel_error_raw": rep.rel_error_raw,
            "rel_error_extrapolated": rep.rel_error_extrapolated,
            "correction_exponent": rep.correction_exponent,
            "tail_slope": rep.tail_slope,
            "model_reliable": rep.model_reliable,
            "nearest_branch": rep.nearest_branch,
            "w_min": rep.w_min,
            "w_max": rep.w_max,
        }),
    )
}

fn read_node_values(path: &Path, nr: usize) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let values = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|e| CliError::Config(format!("{}: bad value {l:?}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != nr {
        return Err(CliError::Config(format!(
            "{} holds {} values for {nr} nodes",
            path.display(),
            values.len()
        )));
    }
    Ok(values)
}

fn envelope_init(kind: InitKind) -> Option<EnvelopeInit> {
    match kind {
        InitKind::Lower => Some(EnvelopeInit::Lower),
        InitKind::Upper => Some(EnvelopeInit::Upper),
        InitKind::Geomean => Some(EnvelopeInit::GeometricMean),
        InitKind::Barenblatt | InitKind::File => None,
    }
}

fn parabolic(cfg: &RunConfig) -> Result<(), CliError> {
    let p = &cfg.params;
    let b = &cfg.parabolic;
    let grid = b.grid.expect("grid resolved");
    let so = SolverOptions::default();
    let mut extra = serde_json::Map::new();

    let sol: ParabolicSolution = match b.init {
        InitKind::Barenblatt => {
            require_valid(p, false)?;
            let exact = BarenblattSolution::new(p, b.k)?;
            let sol = solve(
                p,
                &grid,
                &sample(&exact, &grid, 0.0)?,
                &exact,
                BoundarySource::Barenblatt { k: b.k },
                &so,
            )?;
            extra.insert("max_rel_error".into(), json!(sol.max_rel_error(&exact)?));
            sol
        }
        kind => {
            require_valid(p, true)?;
            let env = EnvelopePair::new(p, b.lambda1, b.lambda2, grid.r_out, tol(cfg))?;
            let gm = env.geometric_mean();
            let sol = match envelope_init(kind) {
                Some(init) => {
                    let field = init.field(&env);
                    solve(p, &grid, &sample(&field, &grid, 0.0)?, &field, env.source(), &so)?
                }
                None => {
                    let path = b.init_file.as_deref().ok_or_else(|| {
                        CliError::Config("init = file needs init_file".into())
                    })?;
                    let u0 = read_node_values(path, grid.nr)?;
                    let source = BoundarySource::Custom {
                        label: format!("file initial data, geometric-mean boundary ({})", path.display()),
                    };
                    solve(p, &grid, &u0, &gm, source, &so)?
                }
            };
            let sw = check_sandwich(&sol, &env.lower, &env.upper, 0.0)?;
            extra.insert(
                "sandwich".into(),
                json!({
                    "min_lower": sw.min_lower,
                    "min_upper": sw.min_upper,
                    "violations": sw.violations,
                    "envelope_crossings": sw.envelope_crossings,
                }),
            );
            sol
        }
    };

    let mut csv = Csv::new(&["t", "r", "u"]);
    for (k, row) in sol.u.iter().enumerate() {
        for (i, &u) in row.iter().enumerate() {
            csv.row(&[sol.t[k], sol.r[i], u]);
        }
    }
    let mut summary = serde_json::Map::new();
    summary.insert("params".into(), json!(p));
    summary.insert("grid".into(), json!(sol.grid));
    summary.insert("boundary_source".into(), json!(sol.boundary_source));
    summary.insert("scheme_stats".into(), json!(sol.scheme_stats));
    summary.insert("min_u".into(), json!(sol.min_value()));
    summary.extend(extra);
    let sink = Sink::new(cfg.out.clone())?;
    sink.csv("parabolic", &csv)?;
    sink.summary("parabolic", &Value::Object(summary))
}

fn sweep_elliptic(cfg: &RunConfig) -> Result<(), CliError> {
    let rep = elliptic_sweep(&cfg.params, &cfg.sweeps.elliptic_m, cfg.sweeps.annulus, tol(cfg))?;
    let mut csv = Csv::new(&["m", "c0_norm", "c1_norm", "c2_norm"]);
    for r in &rep.rows {
        csv.row(&[
            r.m,
            r.c0_norm,
            r.c1_norm.unwrap_or(f64::NAN),
            r.c2_norm.unwrap_or(f64::NAN),
        ]);
    }
    let failures: Vec<_> = rep
        .rows
        .iter()
        .filter_map(|r| r.failure.as_ref().map(|f| json!({ "m": r.m, "failure": f })))
        .collect();
    let sink = Sink::new(cfg.out.clone())?;
    sink.csv("sweep_elliptic", &csv)?;
    sink.summary(
        "sweep_elliptic",
        &json!({
            "kind": rep.kind,
            "annulus": rep.annulus,
            "m_values": rep.m_values,
            "fitted_rate": rep.fitted_rate,
            "c0_decreasing": rep.strictly_decreasing(|r| Some(r.c0_norm)),
            "c1_decreasing": rep.strictly_decreasing(|r| r.c1_norm),
            "c2_decreasing": rep.strictly_decreasing(|r| r.c2_norm),
            "failures": failures,
        }),
    )
}

fn sweep_parabolic(cfg: &RunConfig) -> Result<(), CliError> {
    let b = &cfg.parabolic;
    let init = envelope_init(b.init).ok_or_else(|| {
        CliError::Config("sweep-parabolic needs init lower, upper or geomean".into())
    })?;
    let sweep_cfg = ParabolicSweepConfig {
        lambda1: b.lambda1,
        lambda2: b.lambda2,
        init,
        tol: tol(cfg),
        ..ParabolicSweepConfig::default()
    };
    let grid = b.grid.expect("grid resolved");
    let rep = parabolic_sweep(
        &cfg.params,
        &cfg.sweeps.parabolic_m,
        &grid,
        &sweep_cfg,
        &SolverOptions::default(),
    )?;
    let mut csv = Csv::new(&["m", "sup_norm"]);
    for r in &rep.rows {
        csv.row(&[r.m, r.c0_norm]);
    }
    let sandwiches: Vec<Value> = rep
        .sandwiches
        .iter()
        .map(|s| {
            json!({
                "m": s.m,
                "discretization_error": s.discretization_error,
                "tolerance": s.report.tolerance,
                "min_lower": s.report.min_lower,
                "min_upper": s.report.min_upper,
                "violations": s.report.violations,
                "envelope_crossings": s.report.envelope_crossings,
                "holds": s.report.holds(),
            })
        })
        .collect();
    let sink = Sink::new(cfg.out.clone())?;
    sink.csv("sweep_parabolic", &csv)?;
    sink.summary(
        "sweep_parabolic",
        &json!({
            "kind": rep.kind,
            "annulus": rep.annulus,
            "grid": grid,
            "m_values": rep.m_values,
            "fitted_rate": rep.fitted_rate,
            "decreasing": rep.strictly_decreasing(|r| Some(r.c0_norm)),
            "sandwiches": sandwiches,
        }),
    )
}

fn verify_exact(cfg: &RunConfig) -> Result<(), CliError> {
    let studies = exact_residual_studies()?;
    let failed = studies
        .iter()
        .filter(|s| (s.fitted_order - 2.0).abs() > 0.3)
        .count();
    Sink::new(cfg.out.clone())?.document("verify_exact", &studies)?;
    if failed > 0 {
        return Err(CliError::Failed(failed));
    }
    Ok(())
}

fn verify_all(cfg: &RunConfig) -> Result<(), CliError> {
    let ids = cfg.verify.selected();
    let opts = VerifyOptions {
        seed: cfg.seed,
        tol: cfg.tol,
    };
    let mut results = Vec::new();
    let mut stdout = std::io::stdout();
    for id in ids {
        let r = run_criterion(id, &opts).expect("ids come from 1..=10");
        writeln!(stdout, "{}", r.line())?;
        stdout.flush()?;
        results.push(r);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    writeln!(
        stdout,
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    )?;
    if let Some(dir) = &cfg.out {
        // Timings are left out so that the file only changes with the results.
        let doc: Vec<Value> = results
            .iter()
            .map(|r| {
                json!({
                    "id": r.id,
                    "name": r.name,
                    "passed": r.passed,
                    "budget_s": r.budget_s,
                    "detail": r.detail,
                    "metrics": r.metrics,
                })
            })
            .collect();
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("verify.json"),
            serde_json::to_string_pretty(&doc)? + "\n",
        )?;
    }
    if failed > 0 {
        return Err(CliError::Failed(failed));
    }
    Ok(())
}
