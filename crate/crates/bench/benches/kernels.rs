use std::hint::black_box;

use ap3_core::search::delta_count;
use ap3_core::{count_3aps_convolution, count_3aps_naive, dft, exact_min, random_set};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn counters(c: &mut Criterion) {
    let mut g = c.benchmark_group("count");
    for q in [101u64, 1009, 10007] {
        let set = random_set(q, q / 3, 7).unwrap();
        if q <= 1009 {
            g.bench_with_input(BenchmarkId::new("naive", q), &set, |b, s| {
                b.iter(|| count_3aps_naive(black_box(s)))
            });
        }
        g.bench_with_input(BenchmarkId::new("convolution", q), &set, |b, s| {
            b.iter(|| count_3aps_convolution(black_box(s)))
        });
    }
    g.finish();
}

fn fourier(c: &mut Criterion) {
    let mut g = c.benchmark_group("dft");
    for q in [1009u64, 10007, 100003] {
        let set = random_set(q, q / 4, 11).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(q), &set, |b, s| {
            b.iter(|| dft(black_box(s)))
        });
    }
    g.finish();
}

fn swap_delta(c: &mut Criterion) {
    let set = random_set(10007, 3000, 3).unwrap();
    let out = set.elements()[17];
    let inn = (0..10007).find(|x| !set.contains(*x)).unwrap();
    c.bench_function("delta_count/10007", |b| {
        b.iter(|| delta_count(black_box(&set), out, inn).unwrap())
    });
}

fn exhaustive(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact_min");
    g.sample_size(10);
    for (q, m) in [(17u64, 6u64), (23, 8)] {
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("{q}_{m}")),
            &(q, m),
            |b, &(q, m)| b.iter(|| exact_min(q, m, u128::MAX).unwrap()),
        );
    }
    g.finish();
}

criterion_group!(benches, counters, fourier, swap_delta, exhaustive);
criterion_main!(benches);
