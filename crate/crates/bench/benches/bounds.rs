use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use qbounds_bench::{holland_burnett_model, magnetometry_model, seeded_random_model};
use qbounds_core::hcrb::{self, HcrbOptions};
use qbounds_core::measurement::{optimize_projective, SearchOptions};
use qbounds_core::{eigendecompose, info};

fn hcrb_interferometer(c: &mut Criterion) {
    let mut g = c.benchmark_group("hcrb/holland_burnett");
    g.sample_size(10);
    for n in [2usize, 4] {
        let model = holland_burnett_model(n, 0.5);
        g.bench_with_input(BenchmarkId::from_parameter(n), &model, |b, m| {
            b.iter(|| hcrb::solve_hcrb(black_box(m), &HcrbOptions::default()).unwrap().value)
        });
    }
    g.finish();
}

fn hcrb_magnetometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("hcrb/magnetometry");
    g.sample_size(10);
    for m in [2usize, 3] {
        let model = magnetometry_model(m, 0.3);
        g.bench_with_input(BenchmarkId::from_parameter(m), &model, |b, mm| {
            b.iter(|| hcrb::solve_hcrb(black_box(mm), &HcrbOptions::default()).unwrap().value)
        });
    }
    g.finish();
}

fn quotient_vs_full(c: &mut Criterion) {
    let model = seeded_random_model(3, 6, 2, 3);
    let mut g = c.benchmark_group("hcrb/rank2_d6");
    g.sample_size(10);
    g.bench_function("quotient", |b| {
        b.iter(|| hcrb::solve_hcrb(black_box(&model), &HcrbOptions::default()).unwrap().value)
    });
    let full = HcrbOptions { full_space: true, ..HcrbOptions::default() };
    g.bench_function("full", |b| b.iter(|| hcrb::solve_hcrb(black_box(&model), &full).unwrap().value));
    g.finish();
}

fn companion_bounds(c: &mut Criterion) {
    let model = holland_burnett_model(4, 0.5);
    c.bench_function("sld_rld/holland_burnett_4", |b| {
        b.iter(|| {
            let sp = eigendecompose(black_box(&model.rho), None).unwrap();
            let slds = info::compute_slds(&model, &sp).unwrap();
            let cs = info::sld_bound(&slds, &model.weight).unwrap();
            let rl = info::compute_rlds(&model, &sp);
            (cs, info::rld_bound(&rl, &model.weight).ok())
        })
    });
}

fn projective_search(c: &mut Criterion) {
    let model = magnetometry_model(2, 0.0);
    let mut g = c.benchmark_group("projective_search");
    g.sample_size(10);
    g.bench_function("magnetometry_2/1_restart", |b| {
        b.iter(|| optimize_projective(black_box(&model), &SearchOptions::new(1, 7)).unwrap().best_value)
    });
    g.finish();
}

criterion_group!(benches, hcrb_interferometer, hcrb_magnetometry, quotient_vs_full, companion_bounds, projective_search);
criterion_main!(benches);
