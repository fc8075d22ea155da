use std::hint::black_box;

use aggar_core::disagg::{estimate, GegenbauerBasis};
use aggar_core::{simulate_aggregate, theta_log_cf, CoefficientDesign, LevyTriplet, MixingLaw, PanelConfig};
use criterion::{criterion_group, criterion_main, Criterion};

fn basis(c: &mut Criterion) {
    let mut g = c.benchmark_group("basis");
    for k in [12, 64] {
        g.bench_function(format!("build_K{k}"), |b| b.iter(|| GegenbauerBasis::new(black_box(0.5), k).unwrap()));
    }
    let basis = GegenbauerBasis::new(0.5, 64).unwrap();
    g.bench_function("eval_all_K64", |b| b.iter(|| basis.eval_all(black_box(0.3))));
    g.finish();
}

fn log_cf(c: &mut Criterion) {
    let law = MixingLaw::beta_edge(0.75).unwrap();
    let mut g = c.benchmark_group("log_cf");
    let cases = [
        ("gaussian", LevyTriplet::gaussian(1.0).unwrap()),
        ("gamma", LevyTriplet::centered_gamma(1.0, 1.0).unwrap()),
        ("truncated_stable", LevyTriplet::truncated_stable(1.8, 1.0, 1.0, 1.0).unwrap()),
    ];
    for (name, t) in cases {
        g.bench_function(name, |b| b.iter(|| theta_log_cf(black_box(1.0), &law, &t, 1e-10).unwrap()));
    }
    g.finish();
}

fn simulate(c: &mut Criterion) {
    let law = MixingLaw::beta_edge(0.75).unwrap();
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    let cases = [
        ("gaussian_200x10000", LevyTriplet::gaussian(1.0).unwrap(), CoefficientDesign::Plain),
        ("gamma_200x10000", LevyTriplet::centered_gamma(1.0, 1.0).unwrap(), CoefficientDesign::Plain),
        (
            "tilted_gaussian_200x10000",
            LevyTriplet::gaussian(1.0).unwrap(),
            CoefficientDesign::EdgeTilted { exponent: -0.5 },
        ),
    ];
    for (name, t, design) in cases {
        let mut cfg = PanelConfig::new(200, 10_000, 1, law.clone(), t);
        cfg.design = design;
        g.bench_function(name, |b| b.iter(|| simulate_aggregate(black_box(&cfg)).unwrap()));
    }
    g.finish();
}

fn disagg(c: &mut Criterion) {
    let law = MixingLaw::beta_edge(0.75).unwrap();
    let series = simulate_aggregate(&PanelConfig::new(200, 10_000, 2, law, LevyTriplet::gaussian(1.0).unwrap()))
        .unwrap()
        .values;
    let basis = GegenbauerBasis::new(0.5, 6).unwrap();
    c.bench_function("estimate_n10000_K6", |b| b.iter(|| estimate(black_box(&series), &basis, None).unwrap()));
}

criterion_group!(benches, basis, log_cf, simulate, disagg);
criterion_main!(benches);
