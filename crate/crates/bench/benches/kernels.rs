use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fluidchain::rng::stream;
use fluidchain::{
    delta_mc, integrate_flow, simulate, srwm_step, vec2, ChainConfig, Estimator, FieldKind, Proposal, TargetDensity, VectorField,
};

const DENSITIES: [&str; 4] = ["wedge-super", "gauss-mixture", "wedge-weibull", "weibull-mixture"];

fn step(c: &mut Criterion) {
    let p = Proposal::gaussian(1.0).unwrap();
    let mut group = c.benchmark_group("srwm_step");
    for key in DENSITIES {
        let d = TargetDensity::with_defaults(key).unwrap();
        let x = vec2(30.0, 12.0);
        let mut rng = stream(1, 0);
        group.bench_function(key, |b| b.iter(|| srwm_step(&d, &p, black_box(&x), &mut rng).unwrap()));
    }
    group.finish();
}

fn chain(c: &mut Criterion) {
    let p = Proposal::gaussian(1.0).unwrap();
    c.bench_function("simulate/gauss-mixture/10k", |b| {
        b.iter(|| simulate(&ChainConfig::new(TargetDensity::with_defaults("gauss-mixture").unwrap(), p.clone(), vec2(40.0, 10.0), 3, 10_000)).unwrap())
    });
}

fn drift(c: &mut Criterion) {
    let p = Proposal::gaussian(1.0).unwrap();
    let mut group = c.benchmark_group("delta_mc");
    for n in [1_000usize, 10_000] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| delta_mc(&TargetDensity::WedgeSuper, &p, &vec2(20.0, 15.0), n, 7, Estimator::RejectionIntegrand).unwrap())
        });
    }
    group.finish();
}

fn flow(c: &mut Criterion) {
    let p = Proposal::gaussian(1.0).unwrap();
    let mut group = c.benchmark_group("rk4_flow");
    for key in DENSITIES {
        let field = VectorField::new(TargetDensity::with_defaults(key).unwrap(), p.clone(), FieldKind::H).unwrap();
        group.bench_function(key, |b| b.iter(|| integrate_flow(&field, &vec2(1f64.cos(), 1f64.sin()), 1e-3, 3.0).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, step, chain, drift, flow);
criterion_main!(benches);
