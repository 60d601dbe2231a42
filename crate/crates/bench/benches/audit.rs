use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use subaudit_core::cohort::partition;
use subaudit_core::featspace::pca_fit;
use subaudit_core::hyptest::{kruskal_wallis, ks_two_sample};
use subaudit_core::pipeline::{run_audit, ArmSelection, AuditConfig};
use subaudit_core::rng::rng_from_seed;
use subaudit_core::synth::{generate_cohort, standard_normal, CohortSpec};

fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| standard_normal(&mut rng)).collect()
}

fn bench_pca(c: &mut Criterion) {
    let mut group = c.benchmark_group("pca_fit");
    group.sample_size(10);
    for (n, d) in [(5_000, 128), (2_000, 512)] {
        let mut spec = CohortSpec::uniform(n / 6, 1);
        spec.features.dim = d;
        let (_, features) = generate_cohort(&spec).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{d}")), &features, |b, f| {
            b.iter(|| pca_fit(black_box(f), 4).unwrap())
        });
    }
    group.finish();
}

fn bench_kruskal(c: &mut Criterion) {
    let groups: Vec<Vec<f64>> = (0..6).map(|g| normals(g, 7_000)).collect();
    c.bench_function("kruskal_wallis 6x7000", |b| {
        b.iter(|| kruskal_wallis(black_box(&groups)).unwrap())
    });
}

fn bench_ks(c: &mut Criterion) {
    let (a, b) = (normals(1, 20_000), normals(2, 20_000));
    c.bench_function("ks_two_sample 20000x20000", |bch| {
        bch.iter(|| ks_two_sample(black_box(&a), black_box(&b)).unwrap())
    });
}

fn bench_audit(c: &mut Criterion) {
    let mut spec = CohortSpec::default();
    spec.features.dim = 64;
    for s in &mut spec.subgroups {
        s.count /= 4;
    }
    let (records, features) = generate_cohort(&spec).unwrap();
    let part = partition(records).unwrap();
    let config = AuditConfig {
        seed: 1,
        ..Default::default()
    };
    let mut group = c.benchmark_group("audit");
    group.sample_size(10);
    group.bench_function("all ~10k subjects x 64", |b| {
        b.iter(|| run_audit(&part, Some(&features), &config, ArmSelection::ALL, vec![], false).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_pca, bench_kruskal, bench_ks, bench_audit);
criterion_main!(benches);
