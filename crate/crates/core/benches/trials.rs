//! Sequential against data-parallel execution of the same workloads.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hicap::montecarlo::{
    empirical_concentration, empirical_load_distribution, run_experiment, ConcentrationSetup,
    ExperimentSpec,
};
use hicap::{ConfigParams, Execution};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn end_to_end(c: &mut Criterion) {
    let mut group = c.benchmark_group("trials");
    group.sample_size(10);
    for n in [1024usize, 4096] {
        let params = ConfigParams {
            n,
            t: 20,
            ..ConfigParams::default()
        };
        for (name, exec) in MODES {
            let spec = ExperimentSpec::single(params.clone(), 8).with_execution(exec);
            group.bench_with_input(BenchmarkId::new(name, n), &spec, |b, spec| {
                b.iter(|| black_box(run_experiment(spec).unwrap()))
            });
        }
    }
    group.finish();
}

fn tails(c: &mut Criterion) {
    let mut group = c.benchmark_group("tails");
    group.sample_size(10);
    let setup = ConcentrationSetup {
        n: 1024,
        s: 8,
        k_s: 4,
        k_u: 4,
        m: 16,
        t: 10,
    };
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("concentration", name), |b| {
            b.iter(|| black_box(empirical_concentration(setup, 2000, &[0.5], 1, exec).unwrap()))
        });
        group.bench_function(BenchmarkId::new("load", name), |b| {
            b.iter(|| {
                black_box(empirical_load_distribution(1024, 16, 256, 20_000, 1, exec).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, end_to_end, tails);
criterion_main!(benches);
