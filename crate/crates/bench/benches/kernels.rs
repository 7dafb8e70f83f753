use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use kdvlab::averaging::TorusQuadrature;
use kdvlab::birkhoff::{BirkhoffBackend, BirkhoffVector, HillBackend, SyntheticBackend, SyntheticMap};
use kdvlab::dynamics::{KdvStepper, NoiseSpec};
use kdvlab::effective::{assemble, integrate, IntegrationConfig};
use kdvlab::field::Nonlinearity;
use kdvlab::FourierField;

fn smooth_field(s_max: usize) -> FourierField {
    let mut u = FourierField::zeros(s_max);
    for s in 1..=s_max as i64 {
        let a = 0.1 * (-0.5 * s as f64).exp();
        u.set(s, a);
        u.set(-s, -0.5 * a);
    }
    u
}

fn nonlinearity(c: &mut Criterion) {
    let mut group = c.benchmark_group("nonlinearity");
    for s_max in [16, 64, 256] {
        let u = smooth_field(s_max);
        let mut nl = Nonlinearity::new(s_max);
        let mut out = vec![0.0; 2 * s_max];
        group.bench_with_input(BenchmarkId::from_parameter(s_max), &s_max, |b, _| {
            b.iter(|| nl.apply(black_box(u.coeffs()), &mut out))
        });
    }
    group.finish();
}

fn kdv_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("kdv_step");
    for s_max in [16, 64] {
        let mut u = smooth_field(s_max).into_coeffs();
        let mut stepper = KdvStepper::new(s_max, 0.1, true);
        group.bench_with_input(BenchmarkId::from_parameter(s_max), &s_max, |b, _| {
            b.iter(|| stepper.deterministic_step(black_box(&mut u), 1e-4))
        });
    }
    group.finish();
}

fn hill_actions(c: &mut Criterion) {
    let u = smooth_field(16);
    let hill = HillBackend::new(4, 4).unwrap();
    c.bench_function("hill_actions_4_gaps", |b| b.iter(|| hill.actions(black_box(&u)).unwrap()));
}

fn effective_path(c: &mut Criterion) {
    let noise = NoiseSpec::new(vec![0.7, 0.5]).unwrap();
    let backend: Arc<dyn BirkhoffBackend> = Arc::new(SyntheticBackend::new(SyntheticMap::new(2, 0.2, 10.0).unwrap()));
    let sys = assemble(backend, &noise, TorusQuadrature::tensor(2, 8).unwrap()).unwrap();
    let v0 = BirkhoffVector::from_pairs(&[(0.6, 0.1), (-0.2, 0.4)]);
    let mut cfg = IntegrationConfig::new(0.1, 1, vec![0.1]);
    cfg.dt = 1e-2;
    c.bench_function("effective_synthetic_10_steps", |b| {
        b.iter(|| integrate(&sys, black_box(&v0), &cfg).unwrap())
    });
}

criterion_group!(benches, nonlinearity, kdv_step, hill_actions, effective_path);
criterion_main!(benches);
