use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fracarb_core::calculus::stieltjes_integral;
use fracarb_core::fbm::{CovarianceFbm, FbmSampler};
use fracarb_core::market::price_path;
use fracarb_core::seeding::{component_rng, Component};
use fracarb_core::strategy::portfolio_value;
use fracarb_core::volatility::simulate_volatility;
use fracarb_core::{MarketParams, Partition, StrategyParams, VolatilityModelSpec};

const HESTON: VolatilityModelSpec = VolatilityModelSpec::Heston {
    v0: 0.04,
    kappa: 1.5,
    theta: 0.04,
    xi: 0.3,
};

fn circulant(c: &mut Criterion) {
    let mut g = c.benchmark_group("circulant_fbm");
    for level in [10u32, 12, 14] {
        let sampler = FbmSampler::new(0.7, 1.0, 1 << level).unwrap();
        let mut seed = 0u64;
        g.bench_with_input(BenchmarkId::from_parameter(1 << level), &sampler, |b, s| {
            b.iter(|| {
                seed += 1;
                black_box(s.sample(seed))
            })
        });
    }
    g.finish();
}

fn covariance(c: &mut Criterion) {
    let mut g = c.benchmark_group("covariance_fbm");
    for n in [256usize, 1024] {
        let grid = Partition::uniform(1.0, n).unwrap();
        g.bench_with_input(BenchmarkId::new("factorize", n), &grid, |b, grid| {
            b.iter(|| black_box(CovarianceFbm::new(grid.times(), 0.7).unwrap()))
        });
        let sampler = CovarianceFbm::new(grid.times(), 0.7).unwrap();
        let mut rng = component_rng(1, Component::Modulator);
        g.bench_with_input(BenchmarkId::new("sample", n), &sampler, |b, s| {
            b.iter(|| black_box(s.sample_with(&mut rng)))
        });
    }
    g.finish();
}

fn stieltjes(c: &mut Criterion) {
    let n = 1 << 14;
    let grid = Partition::dyadic(1.0, 14).unwrap();
    let z = FbmSampler::new(0.7, 1.0, n).unwrap().sample(3);
    let sigma = simulate_volatility(&HESTON, &grid, 3, None).unwrap().path;
    c.bench_function("stieltjes_integral/16384", |b| {
        b.iter(|| black_box(stieltjes_integral(&sigma, &z).unwrap()))
    });
}

fn portfolio(c: &mut Criterion) {
    let grid = Partition::dyadic(1.0, 12).unwrap();
    let z = FbmSampler::new(0.7, 1.0, 1 << 12).unwrap().sample(5);
    let vol = simulate_volatility(&HESTON, &grid, 5, None).unwrap();
    let paths = price_path(&MarketParams::default(), &vol, &z).unwrap();
    let strategy = StrategyParams::default();
    c.bench_function("portfolio_value/4096", |b| {
        b.iter(|| black_box(portfolio_value(&paths, &strategy).unwrap()))
    });
}

criterion_group!(benches, circulant, covariance, stieltjes, portfolio);
criterion_main!(benches);
