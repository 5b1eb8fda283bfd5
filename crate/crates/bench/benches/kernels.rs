use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use epl_core::chaining::{build_partition, chain_decomposition, choose_chain_depth, smoothed_process};
use epl_core::distmodel::DistributionModel;
use epl_core::empproc::{sup_distance, EmpiricalProcess};
use epl_core::procgen::{generate, CoefficientRule, Link, ProcessSpec};
use epl_core::verify::sup_increment;

fn generation(c: &mut Criterion) {
    let mut group = c.benchmark_group("generate_4096");
    let specs = [
        ProcessSpec::iid_uniform(),
        ProcessSpec::cantor(),
        ProcessSpec::nar(0.5, 0.25, Link::Sine),
        ProcessSpec::gouezel(4, CoefficientRule::default()),
    ];
    for spec in specs {
        group.bench_function(spec.name(), |b| b.iter(|| generate(black_box(&spec), 4096, 1, 0).unwrap()));
    }
    group.finish();
}

fn empirical_process(c: &mut Criterion) {
    let mut group = c.benchmark_group("empirical_process");
    for n in [1024usize, 16_384] {
        let path = generate(&ProcessSpec::cantor(), n, 2, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("sup_abs", n), &path, |b, path| {
            b.iter(|| EmpiricalProcess::new(path, DistributionModel::CantorCdf).unwrap().sup_abs())
        });
        let process = EmpiricalProcess::new(&path, DistributionModel::CantorCdf).unwrap();
        let p = build_partition(&DistributionModel::CantorCdf, 16).unwrap();
        group.bench_with_input(BenchmarkId::new("smoothing_error_m16", n), &path, |b, path| {
            b.iter(|| sup_distance(&process, &smoothed_process(&path.values, &p).unwrap().unm_step()))
        });
    }
    group.finish();
}

fn chaining(c: &mut Criterion) {
    let model = DistributionModel::CantorCdf;
    let p = build_partition(&model, 10).unwrap();
    let xs = generate(&ProcessSpec::cantor(), 1000, 3, 0).unwrap().values;
    let k = choose_chain_depth(xs.len(), p.h, 0.1).unwrap();
    c.bench_function("chain_decomposition_n1000", |b| {
        b.iter(|| chain_decomposition(black_box(&xs), &p, 0.4, k).unwrap())
    });
}

fn modulus(c: &mut Criterion) {
    let mut group = c.benchmark_group("sup_increment_delta0.1");
    for (name, model, spec) in [
        ("uniform", DistributionModel::Uniform01, ProcessSpec::iid_uniform()),
        ("cantor", DistributionModel::CantorCdf, ProcessSpec::cantor()),
    ] {
        let xs = generate(&spec, 4096, 4, 0).unwrap().values;
        group.bench_function(name, |b| b.iter(|| sup_increment(black_box(&xs), &model, 0.1).unwrap()));
    }
    group.finish();
}

fn cantor_cdf(c: &mut Criterion) {
    let xs: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
    c.bench_function("cantor_cdf_1000", |b| {
        b.iter(|| xs.iter().map(|&x| DistributionModel::CantorCdf.cdf(x)).sum::<f64>())
    });
}

criterion_group!(benches, generation, empirical_process, chaining, modulus, cantor_cdf);
criterion_main!(benches);
