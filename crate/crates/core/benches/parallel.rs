use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use relu_varieties::dimension::functional_dimension;
use relu_varieties::invariants::two_block_constraints;
use relu_varieties::par::Execution;
use relu_varieties::report::{find_preset, run_pipeline, RunOptions, Stage};
use relu_varieties::verify::{check_constraint, SampleSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn verify_constraints(c: &mut Criterion) {
    let cfg = find_preset("deep-tightness-remark").unwrap().config();
    let res = cfg.resolve().unwrap();
    let spec = SampleSpec::new(0, 64, 100);
    let analysis = two_block_constraints(&res.arch, &res.patterns, &spec, 10_000).unwrap();
    let mut group = c.benchmark_group("check_constraint");
    for (name, exec) in MODES {
        let spec = spec.with_execution(exec);
        group.bench_with_input(BenchmarkId::from_parameter(name), &spec, |b, spec| {
            b.iter(|| {
                for con in &analysis.constraints {
                    black_box(check_constraint(con, &res.arch, &res.patterns, None, spec).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn jacobian_rank(c: &mut Criterion) {
    let cfg = find_preset("multiblock-455-dim40").unwrap().config();
    let res = cfg.resolve().unwrap();
    let mut group = c.benchmark_group("functional_dimension");
    for (name, exec) in MODES {
        let spec = SampleSpec::new(0, 8, 100).with_execution(exec);
        group.bench_with_input(BenchmarkId::from_parameter(name), &spec, |b, spec| {
            b.iter(|| black_box(functional_dimension(&res.arch, &res.patterns, spec).unwrap()))
        });
    }
    group.finish();
}

fn full_report(c: &mut Criterion) {
    let cfg = find_preset("shallow-434-three-block").unwrap().config();
    let mut group = c.benchmark_group("run_pipeline");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = RunOptions {
            execution: exec,
            ..RunOptions::new(Stage::Report)
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| black_box(run_pipeline(&cfg, opts).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, verify_constraints, jacobian_rank, full_report);
criterion_main!(benches);
