use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use wqlab_core::empirical::{self, Estimator};
use wqlab_core::quantize::{self, Mode};
use wqlab_core::rational::ratio;
use wqlab_core::verify::{grid_mixture, random_measure};
use wqlab_core::DiscreteMeasure;

fn pair(atoms: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    let mu = random_measure(atoms, 4 * atoms as u64, 1, 0).unwrap();
    let nu = empirical::sample_empirical(&mu, 3 * atoms as u64, 5).unwrap();
    (mu, nu)
}

fn transport(c: &mut Criterion) {
    let mut g = c.benchmark_group("wasserstein");
    for atoms in [8, 32, 128] {
        let (mu, nu) = pair(atoms);
        g.bench_with_input(BenchmarkId::new("p1", atoms), &atoms, |b, _| {
            b.iter(|| wqlab_core::wasserstein_cost(black_box(&mu), black_box(&nu), 1.0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("p2_with_plan", atoms), &atoms, |b, _| {
            b.iter(|| wqlab_core::wasserstein(black_box(&mu), black_box(&nu), 2.0).unwrap())
        });
    }
    g.finish();

    let (mu, graph) = grid_mixture(6, ratio(1, 10)).unwrap();
    let nu = empirical::sample_empirical(&mu, 256, 3).unwrap();
    c.bench_function("grid_graph_w1_g6", |b| {
        b.iter(|| graph.w1(mu.weights(), nu.weights()).unwrap())
    });
}

fn quantizers(c: &mut Criterion) {
    let mu = random_measure(10, 40, 2, 0).unwrap();
    let mut g = c.benchmark_group("quantize");
    for n in [2u64, 4] {
        g.bench_with_input(BenchmarkId::new("e_exact", n), &n, |b, &n| {
            b.iter(|| quantize::optimal_quantization_error(&mu, n, 2.0, Mode::Exact, u64::MAX).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("b_exact", n), &n, |b, &n| {
            b.iter(|| quantize::uniform_quantization_error(&mu, n, 1.0, Mode::Exact, u64::MAX).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("e_lloyd", n), &n, |b, &n| {
            b.iter(|| quantize::optimal_quantization_error(&mu, n, 2.0, Mode::Heuristic, u64::MAX).unwrap())
        });
    }
    g.finish();
}

fn expectations(c: &mut Criterion) {
    let mu = random_measure(4, 12, 3, 0).unwrap();
    c.bench_function("exact_expected_w1_n8", |b| {
        b.iter(|| empirical::exact_expected_error(&mu, 8, 1.0, Estimator::MeanOfW1, u64::MAX).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = transport, quantizers, expectations
}
criterion_main!(benches);
