use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fdlimit::farfield::{default_ladder, farfield_limit};
use fdlimit::parabolic::{sample, solve, SolverOptions};
use fdlimit::{integrate_profile, BarenblattSolution, ProfileOptions};
use fdlimit_bench::{bench_grid, bench_params};

fn profile(c: &mut Criterion) {
    let p = bench_params();
    let mut g = c.benchmark_group("profile");
    for tol in [1e-8, 1e-10, 1e-12] {
        g.bench_with_input(BenchmarkId::from_parameter(tol), &tol, |b, &tol| {
            let opts = ProfileOptions::default().with_tol(tol).with_rho_max(100.0);
            b.iter(|| integrate_profile(&p, &opts).unwrap())
        });
    }
    g.finish();
}

fn farfield(c: &mut Criterion) {
    let p = bench_params();
    let rho_max = 1000f64.powf(p.rho1 / p.beta) * 1.01;
    let s = integrate_profile(&p, &ProfileOptions::default().with_rho_max(rho_max)).unwrap();
    let ladder = default_ladder();
    c.bench_function("farfield_limit", |b| b.iter(|| farfield_limit(&s, &ladder).unwrap()));
}

fn parabolic(c: &mut Criterion) {
    let p = bench_params();
    let exact = BarenblattSolution::new(&p, 1.0).unwrap();
    let mut g = c.benchmark_group("parabolic");
    g.sample_size(10);
    for nr in [41, 81, 161] {
        let grid = bench_grid(nr, 100);
        let u0 = sample(&exact, &grid, 0.0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(nr), &grid, |b, grid| {
            b.iter(|| {
                solve(
                    &p,
                    grid,
                    &u0,
                    &exact,
                    fdlimit::parabolic::BoundarySource::Barenblatt { k: 1.0 },
                    &SolverOptions::default(),
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, profile, farfield, parabolic);
criterion_main!(benches);
