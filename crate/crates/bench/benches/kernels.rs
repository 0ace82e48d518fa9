use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mwpcl_core::equation::{parse_equation, EquationTree};
use mwpcl_core::similarity::{bi_bleu, tree_edit_distance, SimilarityMatrix};
use mwpcl_core::trainer::info_nce_with_grad;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_infix(rng: &mut ChaCha8Rng, depth: usize) -> String {
    if depth == 0 || rng.random_bool(0.3) {
        return format!("n{}", rng.random_range(1..=4));
    }
    let op = ["+", "-", "*", "/"][rng.random_range(0..4)];
    format!("({}{op}{})", random_infix(rng, depth - 1), random_infix(rng, depth - 1))
}

fn templates(count: usize, seed: u64) -> Vec<EquationTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeMap::new();
    while seen.len() < count {
        let t = parse_equation(&random_infix(&mut rng, 3)).expect("generated infix parses");
        seen.insert(t.template_key(), t);
    }
    seen.into_values().collect()
}

fn bench_ted(c: &mut Criterion) {
    let a = parse_equation("(n1+n2)*n3-n4/(n1-n2)").unwrap();
    let b = parse_equation("n1*(n2+n3)-(n4-n1)/n2").unwrap();
    c.bench_function("ted/11x11", |bench| bench.iter(|| tree_edit_distance(black_box(&a), black_box(&b))));
}

fn bench_matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("matrix");
    group.sample_size(10);
    for n in [100, 400] {
        let ts = templates(n, n as u64);
        group.bench_with_input(BenchmarkId::from_parameter(n), &ts, |bench, ts| {
            bench.iter(|| SimilarityMatrix::build(black_box(ts)).unwrap())
        });
    }
    group.finish();
}

fn bench_bleu(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vocab = ["a", "box", "has", "n1", "apples", "how", "many", "?", "the", "more"];
    let mut sentence = |len: usize| -> Vec<&str> { (0..len).map(|_| vocab[rng.random_range(0..vocab.len())]).collect() };
    let (x, y) = (sentence(30), sentence(30));
    c.bench_function("bi_bleu/30", |bench| bench.iter(|| bi_bleu(black_box(&x), black_box(&y)).unwrap()));
}

fn bench_info_nce(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut batch = |n: usize, d: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    };
    let (a, p, n) = (batch(16, 64), batch(16, 64), batch(16, 64));
    c.bench_function("info_nce_grad/16x64", |bench| {
        bench.iter(|| info_nce_with_grad(black_box(&a), black_box(&p), black_box(&n), 0.1).unwrap())
    });
}

criterion_group!(kernels, bench_ted, bench_matrix, bench_bleu, bench_info_nce);
criterion_main!(kernels);
