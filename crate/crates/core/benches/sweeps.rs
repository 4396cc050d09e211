//! Parallel against sequential execution of the two sweep workloads: a
//! retention population and a batch of short circuit simulations.
//!
//! `jobs = 1` takes the sequential path; `jobs = 0` uses the rayon pool when
//! the `parallel` feature is on (with it off both rows are sequential).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use soen_core::engine::RunOptions;
use soen_core::par;
use soen_core::plasticity::{retention_experiment, BoundMode, EventStream, RetentionSpec};
use soen_core::synapse::{build_binary_cell, simulate, BinaryCellSpec, DriveSchedule};

fn retention(c: &mut Criterion) {
    let spec = RetentionSpec {
        population: 4000,
        levels: 8,
        q: 1.0,
        bound: BoundMode::Hard,
        stream: EventStream::new(1.0, 0.5, 0.5).unwrap(),
        t_grid: (0..=100).map(|i| i as f64).collect(),
        seed: 1,
    };
    let mut g = c.benchmark_group("retention_4000");
    g.sample_size(10);
    for (name, jobs) in [("sequential", 1), ("parallel", 0)] {
        g.bench_with_input(BenchmarkId::from_parameter(name), &jobs, |b, &jobs| {
            b.iter(|| retention_experiment(&spec, jobs).unwrap())
        });
    }
    g.finish();
}

fn circuit_batch(c: &mut Criterion) {
    let specs: Vec<BinaryCellSpec> = (0..8)
        .map(|k| BinaryCellSpec {
            drive: DriveSchedule {
                potentiate: vec![1e-9 + k as f64 * 0.1e-9],
                depress: vec![3e-9],
            },
            ..BinaryCellSpec::default()
        })
        .collect();
    let opts = RunOptions::new(5e-9, 2e-12);
    let mut g = c.benchmark_group("binary_cell_batch_8");
    g.sample_size(10);
    for (name, jobs) in [("sequential", 1), ("parallel", 0)] {
        g.bench_with_input(BenchmarkId::from_parameter(name), &jobs, |b, &jobs| {
            b.iter(|| {
                par::map(&specs, jobs, |s| {
                    simulate(&build_binary_cell(s).unwrap(), &opts).unwrap().steps_accepted
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, retention, circuit_batch);
criterion_main!(benches);
