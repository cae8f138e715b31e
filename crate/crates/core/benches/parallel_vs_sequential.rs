//! Compares the data-parallel execution path against sequential execution
//! for the two hot stages: pair scanning and spread-model fitting.
//!
//! Two comparisons are available:
//!
//! - In-run: with the default `parallel` feature, each stage is measured on
//!   the default rayon pool and on a one-thread pool (same code path,
//!   parallelism disabled at runtime).
//! - Across runs: `cargo bench -p pairlab-core --no-default-features`
//!   rebuilds the plain sequential iterators under the same benchmark IDs,
//!   so criterion reports the change against the parallel baseline.

use criterion::{criterion_group, criterion_main, Criterion};
use pairlab_core::cointegration::scan_pairs;
use pairlab_core::estimation::{fit_spread_model, DeConfig};
use pairlab_core::market_data::{PriceSeries, SplitSpec};
use pairlab_core::simulate::{simulate_ou_spread, simulate_random_walk, SimSpec};
use pairlab_core::spread_model::{OuParams, SpreadSeries};
use rayon::ThreadPoolBuilder;

fn bench_spread() -> SpreadSeries {
    let spec = SimSpec {
        ou: OuParams::new(0.1, 2.0, 0.05, 0.02).unwrap(),
        length: 750,
        seed: 7,
        initial_state: 2.0,
        beta: 0.7,
        walk_volatility: 0.02,
    };
    simulate_ou_spread(&spec).unwrap().spread
}

fn bench_universe() -> Vec<PriceSeries> {
    (0..12)
        .map(|i| simulate_random_walk(&format!("rw{i:02}"), 600, 1000 + i, 0.05).unwrap())
        .collect()
}

fn fit_benchmarks(c: &mut Criterion) {
    let spread = bench_spread();
    let config = DeConfig {
        population_size: 24,
        max_generations: 40,
        ..DeConfig::default()
    };

    let mut group = c.benchmark_group("fit_spread_model");
    group.sample_size(10);
    group.bench_function("default_pool", |b| {
        b.iter(|| fit_spread_model(&spread, &config).unwrap())
    });
    let single = ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    group.bench_function("one_thread_pool", |b| {
        b.iter(|| single.install(|| fit_spread_model(&spread, &config).unwrap()))
    });
    group.finish();
}

fn scan_benchmarks(c: &mut Criterion) {
    let universe = bench_universe();

    let mut group = c.benchmark_group("scan_pairs");
    group.sample_size(10);
    group.bench_function("default_pool", |b| {
        b.iter(|| scan_pairs(&universe, SplitSpec::Fraction(0.8), 6).unwrap())
    });
    let single = ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    group.bench_function("one_thread_pool", |b| {
        b.iter(|| single.install(|| scan_pairs(&universe, SplitSpec::Fraction(0.8), 6).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, fit_benchmarks, scan_benchmarks);
criterion_main!(benches);
