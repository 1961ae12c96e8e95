//! Sequential against rayon execution for the three data-parallel kernels.
//! Set POLYCYCLE_THREADS to cap the rayon pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use polycycle::approx::{bernstein_of, eval_bump, BoxDomain, BumpSpec};
use polycycle::builder::{build_main3_family, build_polycycle, Orientation, PolycycleSpec};
use polycycle::graphic::{delta_max_with, RatioVector};
use polycycle::melnikov::{melnikov_matrix, ConnectionGeometry, MelnikovOptions};
use polycycle::par::Exec;
use std::hint::black_box;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("rayon", Exec::Parallel)];

fn delta(c: &mut Criterion) {
    let r = RatioVector::new(vec![2.0, 1.0 / 3.0, 4.0, 0.6, 1.7, 0.25, 3.5, 0.8]).unwrap();
    let mut g = c.benchmark_group("delta_max");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, r.len()), |b| {
            b.iter(|| delta_max_with(black_box(&r), exec).unwrap())
        });
    }
    g.finish();
}

fn bernstein_grid(c: &mut Criterion) {
    let spec = BumpSpec::new(0.1, 0.3, [0.0, 0.0]).unwrap();
    let domain = BoxDomain::around(&spec);
    let poly = bernstein_of(|u| eval_bump(&spec, domain.from_unit(u)), 64, 64).unwrap();
    let xs: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
    let mut g = c.benchmark_group("bernstein_grid");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "64x64 on 200x200"), |b| {
            b.iter(|| poly.eval_grid_with(black_box(&xs), black_box(&xs), exec))
        });
    }
    g.finish();
}

fn melnikov(c: &mut Criterion) {
    let b = build_polycycle(&PolycycleSpec::new(
        vec![1.5, 0.5, 3.0, 0.8],
        Orientation::Clockwise,
    ))
    .unwrap();
    let fam = build_main3_family(&b);
    let conns = ConnectionGeometry::all_of_builder(&b).unwrap();
    let mut g = c.benchmark_group("melnikov_matrix");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = MelnikovOptions {
            exec,
            ..Default::default()
        };
        g.bench_function(BenchmarkId::new(name, "n=4"), |bch| {
            bch.iter(|| melnikov_matrix(&fam, black_box(&conns), &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, delta, bernstein_grid, melnikov);
criterion_main!(benches);
