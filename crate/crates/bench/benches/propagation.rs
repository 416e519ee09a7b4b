use criterion::{black_box, criterion_group, criterion_main, Criterion};
use epgauss_core::chain::{build_system, initial_squeezed_cm, jordan_ep3, params_from_epsilon};
use epgauss_core::epmap;
use epgauss_core::gaussian::{matrix_exp, propagate, propagate_jordan, Propagator};
use epgauss_core::metrics::ChainMetrics;
use epgauss_core::sweep::{self, StabilizationSettings};
use epgauss_core::{EpsilonPoint, Frame};

fn propagation(c: &mut Criterion) {
    let ep3 = params_from_epsilon(1e-3, EpsilonPoint::real(1.0, 2.0), Frame::RotatingAtOmega1).unwrap();
    let lab = params_from_epsilon(1e-3, EpsilonPoint::real(1.0, 2.0), Frame::Lab { omega1: 5000.0 }).unwrap();
    let sys = build_system(&ep3);
    let v0 = initial_squeezed_cm(1.0).unwrap();

    c.bench_function("expm rotating t=6", |b| b.iter(|| matrix_exp(black_box(sys.gamma()), 6.0).unwrap()));
    let lab_sys = build_system(&lab);
    c.bench_function("expm lab t=6", |b| b.iter(|| matrix_exp(black_box(lab_sys.gamma()), 6.0).unwrap()));
    c.bench_function("propagate t=6", |b| b.iter(|| propagate(&sys, black_box(&v0), 6.0).unwrap()));

    let jd = jordan_ep3(1e-3, 0.0).unwrap();
    let vss = sys.steady_state().unwrap().clone();
    c.bench_function("propagate_jordan t=6", |b| b.iter(|| propagate_jordan(&jd, black_box(&v0), &vss, 6.0).unwrap()));

    let prop = Propagator::new(&sys).unwrap();
    c.bench_function("sample 2000 steps", |b| b.iter(|| prop.sample(black_box(&v0), 0.01, 2000).unwrap()));

    let v = propagate(&sys, &v0, 2.0).unwrap();
    c.bench_function("chain metrics", |b| b.iter(|| ChainMetrics::from_cm(black_box(&v)).unwrap()));
}

fn analysis(c: &mut Criterion) {
    let h = epmap::effective_hamiltonian_eps(1e-3, EpsilonPoint::real(1.0, 2.0));
    c.bench_function("classify EP-3", |b| b.iter(|| epmap::classify_ep_default(black_box(&h)).unwrap()));

    let s = StabilizationSettings { t_max: 30.0, ..StabilizationSettings::default() };
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    g.bench_function("stabilization point", |b| b.iter(|| sweep::stabilization_point(black_box(6.0), &s).unwrap()));
    g.finish();
}

criterion_group!(benches, propagation, analysis);
criterion_main!(benches);
