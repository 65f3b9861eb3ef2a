use criterion::{black_box, criterion_group, criterion_main, Criterion};

use femtosim_core::cac::{first_admission, CacPolicy};
use femtosim_core::geometry::{Point2D, Trajectory};
use femtosim_core::{run, Measurement, SimConfig};

fn geometry(c: &mut Criterion) {
    let traj = Trajectory::new(Point2D::new(-15.0, 3.0), 0.0, 0.25, 0.0).unwrap();
    c.bench_function("intersect", |b| {
        b.iter(|| black_box(&traj).intersect(black_box(Point2D::ORIGIN), 10.0))
    });
}

fn gate(c: &mut Criterion) {
    let policy = CacPolicy::DEFAULT.with_threshold_time(10.0);
    let trace: Vec<Measurement> = (0..1000)
        .map(|k| Measurement {
            time: k as f64 * 0.1,
            rsl_dbm: -40.0 + (k as f64 * 0.05).sin() * 15.0,
            es_io_db: 5.0,
        })
        .collect();
    c.bench_function("gate_1000_samples", |b| {
        b.iter(|| first_admission(black_box(&trace), &policy))
    });
}

fn small_run(c: &mut Criterion) {
    let cfg = SimConfig {
        offered_calls: 1000,
        ..SimConfig::default()
    };
    c.bench_function("run_1000_calls", |b| {
        b.iter(|| run(black_box(&cfg)).unwrap())
    });
}

criterion_group!(benches, geometry, gate, small_run);
criterion_main!(benches);
