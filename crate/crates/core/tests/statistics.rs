//! Ensemble checks of the samplers against their analytic moments.

use fracarb_core::fbm::{
    fbm_covariance, generate_fbm_on_grid, CovarianceFbm, FbmSampler, TimeChange, TimeChangedFbm,
};
use fracarb_core::market::{discretized_sde_consistency, price_path};
use fracarb_core::seeding::{component_rng, path_seed, Component};
use fracarb_core::stats::{correlation, covariance, mean, non_decreasing_steps, variance};
use fracarb_core::volatility::simulate_volatility;
use fracarb_core::{MarketParams, Partition, SamplePath, VolatilityModelSpec};

const SEEDS: u64 = 10_000;

fn check_covariance(paths: &[SamplePath], hurst: f64, pairs: &[(usize, usize)]) {
    for &(i, j) in pairs {
        let xi: Vec<f64> = paths.iter().map(|p| p.values()[i]).collect();
        let xj: Vec<f64> = paths.iter().map(|p| p.values()[j]).collect();
        let (t, s) = (paths[0].times()[i], paths[0].times()[j]);
        let want = fbm_covariance(t, s, hurst);
        let got = covariance(&xi, &xj);
        assert!(
            (got - want).abs() < 0.04,
            "H={hurst} t={t} s={s}: {got} vs {want}"
        );
    }
}

#[test]
fn circulant_ensemble_covariance() {
    for hurst in [0.3, 0.5, 0.7, 0.9] {
        let sampler = FbmSampler::new(hurst, 1.0, 64).unwrap();
        let paths: Vec<SamplePath> = (0..SEEDS)
            .map(|i| sampler.sample(path_seed(1, i)))
            .collect();
        check_covariance(
            &paths,
            hurst,
            &[(64, 64), (32, 64), (16, 48), (8, 8), (1, 63)],
        );
    }
}

#[test]
fn factorized_ensemble_covariance() {
    let times = [0.05, 0.1, 0.3, 0.35, 0.7, 1.0, 1.6];
    let sampler = CovarianceFbm::new(&times, 0.7).unwrap();
    let paths: Vec<SamplePath> = (0..SEEDS)
        .map(|i| sampler.sample_with(&mut component_rng(path_seed(2, i), Component::Modulator)))
        .collect();
    // Index 0 is the prepended origin.
    check_covariance(&paths, 0.7, &[(1, 1), (2, 3), (3, 5), (5, 7), (7, 7)]);
    let one = generate_fbm_on_grid(&times, 0.7, path_seed(2, 0)).unwrap();
    assert_eq!(one.path, paths[0]);
    assert_eq!(one.factorization.retries, 0);
}

#[test]
fn time_changed_covariance_follows_the_clock() {
    let grid = Partition::uniform(1.0, 16).unwrap();
    let tc = TimeChange::power(&grid, 2.0).unwrap();
    let sampler = TimeChangedFbm::new(&tc, 0.7).unwrap();
    let paths: Vec<SamplePath> = (0..SEEDS)
        .map(|i| sampler.sample(path_seed(3, i)))
        .collect();
    for (i, j) in [(16, 16), (8, 16), (4, 12)] {
        let xi: Vec<f64> = paths.iter().map(|p| p.values()[i]).collect();
        let xj: Vec<f64> = paths.iter().map(|p| p.values()[j]).collect();
        let (a, b) = (tc.clock().values()[i], tc.clock().values()[j]);
        let want = fbm_covariance(a, b, 0.7);
        assert!((covariance(&xi, &xj) - want).abs() < 0.04);
    }
}

#[test]
fn volatility_driver_is_independent_of_the_modulator() {
    let grid = Partition::dyadic(1.0, 8).unwrap();
    let sampler = FbmSampler::new(0.7, 1.0, 256).unwrap();
    // kappa = 0, beta = 1: sigma_T - sigma_0 is the driving Brownian motion at T.
    let model = VolatilityModelSpec::SteinStein {
        sigma0: 0.0,
        kappa: 0.0,
        theta: 0.0,
        beta: 1.0,
    };
    let (mut z, mut b) = (Vec::new(), Vec::new());
    for i in 0..SEEDS {
        let seed = path_seed(4, i);
        z.push(sampler.sample(seed).last_value());
        b.push(
            simulate_volatility(&model, &grid, seed, None)
                .unwrap()
                .path
                .last_value(),
        );
    }
    assert!(correlation(&z, &b).abs() < 0.04);
    assert!((variance(&b) - 1.0).abs() < 0.04);
}

#[test]
fn heston_mean_reverts() {
    let grid = Partition::dyadic(1.0, 8).unwrap();
    let model = VolatilityModelSpec::Heston {
        v0: 0.09,
        kappa: 2.0,
        theta: 0.04,
        xi: 0.2,
    };
    let finals: Vec<f64> = (0..SEEDS)
        .map(|i| {
            let v = simulate_volatility(&model, &grid, path_seed(5, i), None).unwrap();
            v.state.unwrap().last_value()
        })
        .collect();
    let want = 0.04 + 0.05 * (-2.0f64).exp();
    assert!((mean(&finals) - want).abs() < 2e-3, "{}", mean(&finals));
}

#[test]
fn log_price_carries_the_modulator_variance() {
    let grid = Partition::dyadic(1.0, 8).unwrap();
    let sampler = FbmSampler::new(0.7, 1.0, 256).unwrap();
    let unit = simulate_volatility(
        &VolatilityModelSpec::Constant { level: 1.0 },
        &grid,
        0,
        None,
    )
    .unwrap();
    let params = MarketParams {
        nu: 0.0,
        ..MarketParams::default()
    };
    let logs: Vec<f64> = (0..SEEDS)
        .map(|i| {
            let z = sampler.sample(path_seed(6, i));
            let m = price_path(&params, &unit, &z).unwrap();
            (m.risky.last_value() / params.y0).ln()
        })
        .collect();
    assert!((variance(&logs) - 1.0).abs() < 0.04);
}

#[test]
fn euler_prices_converge_to_the_exponential_form() {
    let grid = Partition::dyadic(1.0, 14).unwrap();
    let sampler = FbmSampler::new(0.7, 1.0, 1 << 14).unwrap();
    let model = VolatilityModelSpec::Heston {
        v0: 0.04,
        kappa: 1.5,
        theta: 0.04,
        xi: 0.3,
    };
    let levels: Vec<Partition> = (8..=14)
        .map(|k| Partition::dyadic(1.0, k).unwrap())
        .collect();
    let mut gaps: Vec<Vec<f64>> = vec![Vec::new(); levels.len()];
    for i in 0..1000 {
        let seed = path_seed(7, i);
        let z = sampler.sample(seed);
        let vol = simulate_volatility(&model, &grid, seed, None).unwrap();
        let m = price_path(&MarketParams::default(), &vol, &z).unwrap();
        let c = discretized_sde_consistency(&m, &levels).unwrap();
        assert!(c.failed_levels.is_empty());
        for (g, r) in gaps.iter_mut().zip(&c.report.residuals) {
            g.push(*r);
        }
    }
    let medians: Vec<f64> = gaps
        .iter()
        .map(|g| fracarb_core::stats::median(g))
        .collect();
    assert_eq!(non_decreasing_steps(&medians), 0, "{medians:?}");
}
