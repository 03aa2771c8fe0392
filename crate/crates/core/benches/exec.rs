//! Sequential against parallel execution on the two data-parallel hot paths:
//! a figure grid and a verification suite.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use proxmix::cli::{figure_grid, GridSpec, Preset};
use proxmix::verify::{run_suite, Scale};
use proxmix::{Execution, SolverOpts};

const STRATEGIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn figure(c: &mut Criterion) {
    let mut group = c.benchmark_group("figure_grid");
    group.sample_size(10);
    let (l, g) = (Preset::Example1.operator(), Preset::Example1.function());
    let grid = GridSpec { lo: -4.0, hi: 4.0, steps: 41 };
    for (name, exec) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| figure_grid(&l, &g, black_box(&[0.5, 2.0, 8.0]), grid, &SolverOpts::default(), exec).unwrap())
        });
    }
    group.finish();
}

fn suite(c: &mut Criterion) {
    let mut group = c.benchmark_group("suite_prop30_i");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_suite(black_box("prop30-i"), 7, Scale::Small.params(), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, figure, suite);
criterion_main!(benches);
