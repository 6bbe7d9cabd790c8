use criterion::{criterion_group, criterion_main, Criterion};
use episir::models::reference;
use episir::{day_grid, simulate, ExtendedParams, IntegratorConfig, ModelKind, SirParams};
use std::hint::black_box;

fn integrators(c: &mut Criterion) {
    let grid = day_grid(212);
    let y0 = reference::KC_INITIAL;
    let epidemic = ExtendedParams::standard(SirParams::new(2e-5, 0.1));
    let extended = reference::extended();
    let mut group = c.benchmark_group("simulate_212_days");
    for (name, cfg) in [
        ("rk45", IntegratorConfig::default()),
        ("rk4_h0.01", IntegratorConfig::rk4(0.01)),
    ] {
        group.bench_function(format!("standard/{name}"), |b| {
            b.iter(|| simulate(ModelKind::Standard, black_box(&epidemic), &y0, &grid, &cfg).unwrap())
        });
        group.bench_function(format!("extended/{name}"), |b| {
            b.iter(|| simulate(ModelKind::Extended, black_box(&extended), &y0, &grid, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, integrators);
criterion_main!(benches);
