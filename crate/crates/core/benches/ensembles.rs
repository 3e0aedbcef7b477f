use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nuh_core::hyperbolic::estimate_density;
use nuh_core::measures::{ensemble_histogram, ulam_operator};
use nuh_core::par::{set_execution, Execution};
use nuh_core::torus::{make_da_map, verify_conditions, DAParams};
use nuh_core::NoiseModel;

const PATHS: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench(c: &mut Criterion) {
    let map = make_da_map(&DAParams::default()).unwrap();
    let model = NoiseModel::new(0.01).unwrap();

    let mut g = c.benchmark_group("ensemble_histogram");
    g.sample_size(10);
    for (name, mode) in PATHS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_execution(mode);
            b.iter(|| ensemble_histogram(&map, &model, 64, 5000, 1000, 32, 1).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("hyperbolic_density");
    g.sample_size(10);
    for (name, mode) in PATHS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_execution(mode);
            b.iter(|| estimate_density(&map, &model, 64, 5000, 0.5, 1).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("ulam_operator");
    g.sample_size(10);
    for (name, mode) in PATHS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_execution(mode);
            b.iter(|| ulam_operator(&map, &model, 32, 64, 1).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("verify_conditions");
    g.sample_size(10);
    for (name, mode) in PATHS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_execution(mode);
            b.iter(|| verify_conditions(&map, 0.2, 256, 0.5).unwrap())
        });
    }
    g.finish();
    set_execution(Execution::Parallel);
}

criterion_group!(benches, bench);
criterion_main!(benches);
