use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spinmetro_bench::{polarized, thermal};
use spinmetro_core::analytic::thermal_qfi_exact;
use spinmetro_core::protocol::full_hamiltonian;
use spinmetro_core::spin::{hermitian_propagator, x_basis};
use spinmetro_core::{
    cfi, circuit_qfi, DerivativeMethod, JzReadout, ProtocolParams, QfiMethod, SpinDimension,
};

fn spin_algebra(c: &mut Criterion) {
    let mut g = c.benchmark_group("spin");
    for n in [10u32, 50, 100] {
        let dim = SpinDimension::new(n).unwrap();
        g.bench_with_input(BenchmarkId::new("x_basis", n), &dim, |b, &d| {
            b.iter(|| x_basis(black_box(d)))
        });
        let h = full_hamiltonian(&ProtocolParams::optimized(n).unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::new("propagator", n), &h, |b, h| {
            b.iter(|| hermitian_propagator(black_box(h), 0.7).unwrap())
        });
    }
    g.finish();
}

fn fisher(c: &mut Criterion) {
    let mut g = c.benchmark_group("fisher");
    for n in [10u32, 50, 100] {
        let pure = polarized(n);
        g.bench_with_input(BenchmarkId::new("qfi_pure", n), &pure, |b, circ| {
            b.iter(|| circuit_qfi(circ, black_box(0.3), QfiMethod::Pure).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("cfi_jz", n), &pure, |b, circ| {
            b.iter(|| cfi(&JzReadout(circ), black_box(0.3), DerivativeMethod::Analytic).unwrap())
        });
    }
    for n in [10u32, 50] {
        let mixed = thermal(n, 1.0);
        g.bench_with_input(BenchmarkId::new("qfi_sld_thermal", n), &mixed, |b, circ| {
            b.iter(|| circuit_qfi(circ, black_box(0.3), QfiMethod::Sld).unwrap())
        });
        g.bench_with_input(
            BenchmarkId::new("qfi_spectral_thermal", n),
            &mixed,
            |b, circ| b.iter(|| circuit_qfi(circ, black_box(0.3), QfiMethod::Spectral).unwrap()),
        );
    }
    g.finish();
}

fn analytic(c: &mut Criterion) {
    c.bench_function("thermal_exact/1000", |b| {
        b.iter(|| thermal_qfi_exact(black_box(1000), 2.0).unwrap())
    });
}

criterion_group!(benches, spin_algebra, fisher, analytic);
criterion_main!(benches);
