use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mdl_core::codec::bitstream::{read_bitstream, write_bitstream};
use mdl_core::codec::{CodeConfig, Codebook, SearchMode};
use mdl_core::models::family::FamilyRef;
use mdl_core::models::mixture::Mixture;
use mdl_core::models::pmf::Counts;
use mdl_core::quantizer::build_grid_relaxed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mixture() -> FamilyRef {
    Arc::new(
        Mixture::from_probs(
            vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.7, 0.2], vec![0.2, 0.1, 0.7]],
            0.1,
        )
        .unwrap(),
    )
}

fn symbols(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0..3)).collect()
}

fn grid(c: &mut Criterion) {
    let fam = mixture();
    let mut g = c.benchmark_group("grid");
    for n in [100u64, 10_000] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| build_grid_relaxed(fam.as_ref(), black_box(n), 2.0, 0.25, f64::INFINITY).unwrap())
        });
    }
    g.finish();
}

fn encode(c: &mut Criterion) {
    let fam = mixture();
    let mut g = c.benchmark_group("encode");
    for n in [64u64, 1024] {
        for search in [SearchMode::Full, SearchMode::Shortcut] {
            let config = CodeConfig {
                search,
                ..CodeConfig::default()
            };
            let cb = Codebook::build(fam.clone(), n, &config).unwrap();
            let counts = Counts::from_symbols(&symbols(n as usize, n), 3).unwrap();
            g.bench_with_input(BenchmarkId::new(format!("{search:?}"), n), &counts, |b, c| {
                b.iter(|| cb.encode(black_box(c)).unwrap())
            });
        }
    }
    g.finish();
}

fn bitstream(c: &mut Criterion) {
    let fam = mixture();
    let n = 4096;
    let cb = Codebook::build(fam, n as u64, &CodeConfig::default()).unwrap();
    let xs = symbols(n, 1);
    let bs = write_bitstream(&cb, &xs).unwrap();
    c.bench_function("bitstream/write/4096", |b| b.iter(|| write_bitstream(&cb, black_box(&xs)).unwrap()));
    c.bench_function("bitstream/read/4096", |b| b.iter(|| read_bitstream(&cb, black_box(&bs.bytes)).unwrap()));
}

criterion_group!(benches, grid, encode, bitstream);
criterion_main!(benches);
