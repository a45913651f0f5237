use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use microagg_core::dataset::{synthesize, SynthSpec};
use microagg_core::metrics::dbrl;
use microagg_core::{anonymize, AnonymizationConfig, Method, Microdata, Role};

fn data(n: usize) -> Microdata {
    synthesize(&SynthSpec {
        n,
        qid_blob_centers: vec![
            vec![0.0, 0.0, 0.0],
            vec![20.0, 5.0, 10.0],
            vec![5.0, 25.0, -10.0],
        ],
        conf_class_centers: vec![vec![0.0], vec![40.0], vec![80.0]],
        noise_scale: 4.0,
        seed: 3,
    })
    .unwrap()
    .data
}

fn methods(c: &mut Criterion) {
    let md = data(1000);
    let mut group = c.benchmark_group("anonymize_n1000_k5");
    group.sample_size(10);
    for method in Method::ALL {
        let config = AnonymizationConfig::new(method, 5);
        group.bench_with_input(BenchmarkId::from_parameter(method), &config, |b, cfg| {
            b.iter(|| anonymize(&md, cfg).unwrap())
        });
    }
    group.finish();
}

fn mdav_scaling(c: &mut Criterion) {
    let mut group = c.benchmark_group("mdav_k3");
    group.sample_size(10);
    for n in [250, 500, 1000, 2000] {
        let md = data(n);
        let config = AnonymizationConfig::new(Method::Mdav, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &md, |b, md| {
            b.iter(|| anonymize(md, &config).unwrap())
        });
    }
    group.finish();
}

fn linkage(c: &mut Criterion) {
    let md = data(1000);
    let masked = anonymize(&md, &AnonymizationConfig::new(Method::Mdav, 5))
        .unwrap()
        .masked;
    c.bench_function("dbrl_n1000", |b| {
        b.iter(|| dbrl(&md, &masked, Role::QuasiIdentifier).unwrap())
    });
}

criterion_group!(benches, methods, mdav_scaling, linkage);
criterion_main!(benches);
