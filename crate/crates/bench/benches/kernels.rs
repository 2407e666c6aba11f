use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ths_core::endo::{build_endo, spectral_analysis, SpectralTol};
use ths_core::inverse;
use ths_core::scheme::random_scheme_point;
use ths_core::suite::{run_check, CheckId, SuiteConfig};
use ths_core::symplectic;
use ths_core::{CoeffChartPoint, SampleMode, SchemePoint, SurfaceKind};

fn point(kind: SurfaceKind, d: usize) -> SchemePoint {
    random_scheme_point(kind, d, &mut ChaCha8Rng::seed_from_u64(7), SampleMode::Generic).unwrap()
}

fn coeff(kind: SurfaceKind, d: usize) -> CoeffChartPoint {
    point(kind, d).to_coeff().unwrap()
}

fn spectral(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral_analysis");
    for d in [2, 4, 6] {
        let a = build_endo(&SchemePoint::Coeff(coeff(SurfaceKind::Flat, d))).unwrap().m;
        g.bench_with_input(BenchmarkId::from_parameter(d), &a, |b, a| {
            b.iter(|| spectral_analysis(black_box(a), &SpectralTol::default()).unwrap())
        });
    }
    g.finish();
}

fn omega(c: &mut Criterion) {
    let mut g = c.benchmark_group("omega_coeff");
    for d in [2, 4, 6] {
        let pt = coeff(SurfaceKind::Xy, d);
        g.bench_with_input(BenchmarkId::from_parameter(d), &pt, |b, pt| b.iter(|| symplectic::omega_coeff(black_box(pt)).unwrap()));
    }
    g.finish();
}

fn flows(c: &mut Criterion) {
    let pt = coeff(SurfaceKind::Flat, 3);
    c.bench_function("hamiltonian_flow d=3", |b| {
        b.iter(|| symplectic::hamiltonian_flow(black_box(&pt), symplectic::Hamiltonian::Q(1), 0.05, 5).unwrap())
    });
    let SchemePoint::Ah(a) = point(SurfaceKind::Ah, 3) else { unreachable!() };
    c.bench_function("ah_flow d=3", |b| b.iter(|| symplectic::ah_flow(black_box(&a), 0, 0.05, 5).unwrap()));
}

fn frobenius(c: &mut Criterion) {
    let mut g = c.benchmark_group("frobenius_residual");
    for d in [2, 3] {
        let ip = inverse::incidence_fiber(&coeff(SurfaceKind::Flat, d)).unwrap().swap_remove(0);
        g.bench_with_input(BenchmarkId::from_parameter(d), &ip, |b, ip| {
            b.iter(|| inverse::frobenius_residual(black_box(ip), inverse::FROBENIUS_STEP).unwrap())
        });
    }
    g.finish();
}

fn checks(c: &mut Criterion) {
    let mut g = c.benchmark_group("check");
    g.sample_size(10);
    let cfg = SuiteConfig { samples: 20, ..SuiteConfig::new(SurfaceKind::Flat, 3) };
    for id in [CheckId::SquareProperty, CheckId::Compatibility, CheckId::Integrability] {
        g.bench_function(id.name(), |b| b.iter(|| run_check(black_box(&cfg), id).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, spectral, omega, flows, frobenius, checks);
criterion_main!(benches);
