use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ricci_lab_bench::curved_state;
use ricci_lab_core::flow::step_rk4;
use ricci_lab_core::{CurvaturePack, FlowConfig, Gauge};

fn partial(c: &mut Criterion) {
    let mut group = c.benchmark_group("partial");
    for n in [48, 96] {
        let s = curved_state(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &s.phi, |b, phi| b.iter(|| phi.partial(0)));
    }
    group.finish();
}

fn curvature(c: &mut Criterion) {
    let mut group = c.benchmark_group("curvature_pack");
    for n in [48, 96] {
        let s = curved_state(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &s.g, |b, g| b.iter(|| CurvaturePack::new(g).unwrap()));
    }
    group.finish();
}

fn rk4(c: &mut Criterion) {
    let mut group = c.benchmark_group("rk4_step");
    group.sample_size(20);
    let s = curved_state(48);
    for gauge in [Gauge::Plain, Gauge::DeTurck] {
        let config = FlowConfig { a: 0.5, b: 0.3, gauge, ..FlowConfig::default() }.anchored_at(&s);
        group.bench_function(format!("{gauge:?}"), |b| b.iter(|| step_rk4(&s, &config).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, partial, curvature, rk4);
criterion_main!(benches);
