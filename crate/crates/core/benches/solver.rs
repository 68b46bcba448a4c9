use criterion::{criterion_group, criterion_main, Criterion};
use dmeshare::analytic::transponder_cumulants;
use dmeshare::solver::{
    max_density_for_power, max_power_no_exclusion, solve_exclusion_radius, solve_ithr,
};
use dmeshare::{AirborneScenario, PowerDbm, TransponderScenario};
use std::hint::black_box;

fn analytic(c: &mut Criterion) {
    let i_thr = PowerDbm(-150.0).to_mw();
    for rho in [0.0, 0.5, 1.0] {
        let s = TransponderScenario {
            rho,
            ..Default::default()
        };
        c.bench_function(&format!("cumulants_4/rho={rho}"), |b| {
            b.iter(|| transponder_cumulants(black_box(&s), i_thr, 4).unwrap())
        });
    }
}

fn searches(c: &mut Criterion) {
    let t = TransponderScenario {
        rho: 0.5,
        ..Default::default()
    };
    c.bench_function("solve_ithr", |b| b.iter(|| solve_ithr(black_box(&t)).unwrap()));
    let adj = TransponderScenario {
        acr_db: 60.0,
        margin_db: 10.0,
        ..Default::default()
    };
    let mut g = c.benchmark_group("nested");
    g.sample_size(10);
    g.bench_function("max_density_for_power", |b| {
        b.iter(|| max_density_for_power(black_box(&adj), 1.0, 0.9, 5.0).unwrap())
    });
    g.finish();
    let a = AirborneScenario {
        acr_db: 40.0,
        margin_db: 10.0,
        ..Default::default()
    };
    c.bench_function("solve_exclusion_radius", |b| {
        b.iter(|| solve_exclusion_radius(black_box(&a)).unwrap())
    });
    c.bench_function("max_power_no_exclusion", |b| {
        b.iter(|| max_power_no_exclusion(black_box(&a), 100.0).unwrap())
    });
}

criterion_group!(benches, analytic, searches);
criterion_main!(benches);
