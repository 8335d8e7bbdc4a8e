use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stabpoly::exec::Exec;
use stabpoly::mol::{self, ErrorNorm, Reference};
use stabpoly::optimizer::{find_max_dt, Mode, OptimizeConfig};
use stabpoly::polynomial::{disk_polynomial_pe, StabilityPolynomial};
use stabpoly::rk::{boundary_samples, build_tableau, default_anchor, internal_stability_with, BuildOptions};
use stabpoly::spectra::generate_fv_advection_circle;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn internal_stability(c: &mut Criterion) {
    let poly = StabilityPolynomial::new(disk_polynomial_pe(64, 2).unwrap(), 2, 1.0).unwrap();
    let tab = build_tableau(&poly, &BuildOptions::default()).unwrap();
    let samples = boundary_samples(&poly, default_anchor(&poly), 2048).unwrap();
    let mut group = c.benchmark_group("internal_stability_s64");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| internal_stability_with(black_box(&tab), &samples, exec)));
    }
    group.finish();
}

fn feasibility_probe(c: &mut Criterion) {
    let spectrum = generate_fv_advection_circle(4000, 1.0, 1.0).unwrap();
    let mut group = c.benchmark_group("feasibility_s16_p2");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = OptimizeConfig::new(16, 2);
        cfg.mode = Mode::Feasibility;
        cfg.dt = Some(14.9 / 4000.0);
        cfg.exec = exec;
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| find_max_dt(cfg, black_box(&spectrum)).unwrap())
        });
    }
    group.finish();
}

fn convergence(c: &mut Criterion) {
    let poly = StabilityPolynomial::new(disk_polynomial_pe(16, 2).unwrap(), 2, 1.0).unwrap();
    let tab = build_tableau(&poly, &BuildOptions::default()).unwrap();
    let sys = mol::advect_fv_system(500, 1.0, 1.0, |x| (2.0 * PI * x).sin()).unwrap();
    let dts: Vec<f64> = (0..5).map(|i| 0.028 / 2f64.powi(i)).collect();
    let mut group = c.benchmark_group("convergence_study_advection");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| mol::convergence_study(&sys, &tab, &dts, 0.5, ErrorNorm::Linf, Reference::Exact, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, internal_stability, feasibility_probe, convergence);
criterion_main!(benches);
