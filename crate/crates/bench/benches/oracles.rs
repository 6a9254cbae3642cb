use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use mdl_core::codec::{CodeConfig, Codebook};
use mdl_core::models::family::FamilyRef;
use mdl_core::models::mixture::Mixture;
use mdl_core::oracles::{exhaustive_kraft, shtarkov_complexity, verify_theorem1_with, CodeKind};
use mdl_core::types::DEFAULT_ENUMERATION_CAP as CAP;

fn mixture() -> FamilyRef {
    Arc::new(Mixture::from_probs(vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.1, 0.8]], 0.2).unwrap())
}

fn oracles(c: &mut Criterion) {
    let fam = mixture();
    let cb = Codebook::build(fam.clone(), 12, &CodeConfig::default()).unwrap();
    c.bench_function("shtarkov/n12", |b| b.iter(|| shtarkov_complexity(fam.as_ref(), black_box(12), CAP).unwrap()));
    c.bench_function("kraft/combined/n12", |b| {
        b.iter(|| exhaustive_kraft(&cb, CodeKind::Combined, CAP).unwrap())
    });
    c.bench_function("risk/exact/n12", |b| {
        b.iter(|| verify_theorem1_with(&cb, black_box(&[0.5]), CAP).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = oracles
}
criterion_main!(benches);
