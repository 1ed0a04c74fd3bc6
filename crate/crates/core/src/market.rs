//! Riskless and risky asset paths.
//!
//! The risky asset is built from its exponential solution
//! `Y_t = Y_0 exp(nu t + I_t)` with `I_t = sum sigma_{t_i} Delta Z` taken at left
//! endpoints. The running integral is kept alongside the prices so the trading
//! strategy can reuse exactly the same `I`.

use serde::{Deserialize, Serialize};

use crate::calculus::{stieltjes_integral, ConvergenceReport};
use crate::error::{Error, Result};
use crate::path::{Partition, SamplePath};
use crate::volatility::VolPath;

/// Largest argument for which `exp` stays finite.
const MAX_EXP_ARG: f64 = 709.782_712_893_384;
/// Below this `exp` underflows to zero.
const MIN_EXP_ARG: f64 = -745.133_219_101_941_1;

fn default_nu() -> f64 {
    0.1
}
fn default_r() -> f64 {
    0.05
}
fn default_y0() -> f64 {
    100.0
}
fn default_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_y0")]
    pub y0: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            nu: default_nu(),
            r: default_r(),
            y0: default_y0(),
            horizon: default_horizon(),
        }
    }
}

impl MarketParams {
    /// Every violated constraint, as `(field, message)` pairs.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !self.nu.is_finite() {
            out.push(("nu", format!("{} must be finite", self.nu)));
        }
        if !self.r.is_finite() {
            out.push(("r", format!("{} must be finite", self.r)));
        }
        if !(self.y0 > 0.0 && self.y0.is_finite()) {
            out.push(("y0", format!("{} must lie in (0, inf)", self.y0)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            out.push(("horizon", format!("{} must lie in (0, inf)", self.horizon)));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().first() {
            None => Ok(()),
            Some((name, msg)) => Err(Error::Configuration(format!("market.{name}: {msg}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketPaths {
    /// `X_t = e^{rt}`
    pub riskless: SamplePath,
    /// `Y_t`
    pub risky: SamplePath,
    /// Running left-point integral `I_t = int_0^t sigma dZ`.
    pub log_integral: SamplePath,
    pub modulator: SamplePath,
    pub vol: VolPath,
    pub params: MarketParams,
}

impl MarketPaths {
    /// `nu t + I_t` at each grid point.
    pub fn exponent(&self) -> Vec<f64> {
        self.log_integral
            .times()
            .iter()
            .zip(self.log_integral.values())
            .map(|(&t, &i)| self.params.nu * t + i)
            .collect()
    }

    pub fn grid(&self) -> Partition {
        self.risky.partition()
    }
}

pub fn riskless_path(params: &MarketParams, grid: &Partition) -> SamplePath {
    SamplePath::from_fn(grid, |t| (params.r * t).exp())
}

pub fn price_path(params: &MarketParams, vol: &VolPath, z: &SamplePath) -> Result<MarketPaths> {
    params.validate()?;
    let integral = stieltjes_integral(&vol.path, z)?;
    let times = integral.times();
    let mut risky = Vec::with_capacity(times.len());
    for (&t, &i) in times.iter().zip(integral.values()) {
        let exponent = params.nu * t + i;
        if !exponent.is_finite() || !(MIN_EXP_ARG..=MAX_EXP_ARG).contains(&exponent) {
            return Err(Error::NumericOverflow { time: t, exponent });
        }
        let y = params.y0 * exponent.exp();
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::NumericOverflow { time: t, exponent });
        }
        risky.push(y);
    }
    let grid = z.partition();
    Ok(MarketPaths {
        riskless: riskless_path(params, &grid),
        risky: SamplePath::on_grid(&grid, risky)?,
        log_integral: integral,
        modulator: z.clone(),
        vol: vol.clone(),
        params: *params,
    })
}

/// Outcome of comparing the exponential price against an Euler recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeConsistency {
    /// Max relative gap per level; infinite where the Euler path left `(0, inf)`.
    pub report: ConvergenceReport,
    /// Grid sizes at which the Euler recursion hit a non-positive value.
    pub failed_levels: Vec<usize>,
}

/// Max relative gap `|Y_hat - Y| / Y` at each refinement between the
/// exponential form and `Y_hat_{i+1} = Y_hat_i (1 + nu dt + sigma_i dZ)`, both
/// built on the same refinement from the observed `sigma` and `Z`.
/// `levels` must be ordered coarse to fine and nested in the path grid.
pub fn discretized_sde_consistency(
    paths: &MarketPaths,
    levels: &[Partition],
) -> Result<SdeConsistency> {
    let nu = paths.params.nu;
    let y0 = paths.params.y0;
    let mut sizes = Vec::with_capacity(levels.len());
    let mut gaps = Vec::with_capacity(levels.len());
    let mut failed = Vec::new();
    for grid in levels {
        let z = paths.modulator.restrict(grid)?;
        let sigma = paths.vol.path.restrict(grid)?;
        let integral = stieltjes_integral(&sigma, &z)?;
        let t = grid.times();
        let zv = z.values();
        let sv = sigma.values();
        let iv = integral.values();

        let mut euler = y0;
        let mut gap: f64 = 0.0;
        let mut broke = false;
        for k in 0..grid.num_steps() {
            euler *= 1.0 + nu * (t[k + 1] - t[k]) + sv[k] * (zv[k + 1] - zv[k]);
            if !(euler > 0.0 && euler.is_finite()) {
                broke = true;
                break;
            }
            let exact = y0 * (nu * t[k + 1] + iv[k + 1]).exp();
            gap = gap.max((euler - exact).abs() / exact);
        }
        sizes.push(grid.num_steps());
        if broke {
            failed.push(grid.num_steps());
            gaps.push(f64::INFINITY);
        } else {
            gaps.push(gap);
        }
    }
    Ok(SdeConsistency {
        report: ConvergenceReport::new(sizes, gaps)?,
        failed_levels: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{FbmSampler, FbmSpec};
    use crate::volatility::{simulate_volatility, VolatilityModelSpec};

    fn constant_vol(grid: &Partition, level: f64) -> VolPath {
        simulate_volatility(&VolatilityModelSpec::Constant { level }, grid, 0, None).unwrap()
    }

    fn params(nu: f64, r: f64) -> MarketParams {
        MarketParams {
            nu,
            r,
            y0: 100.0,
            horizon: 1.0,
        }
    }

    #[test]
    fn riskless_values() {
        let g = Partition::uniform(1.0, 4).unwrap();
        let x = riskless_path(&params(0.1, 0.05), &g);
        assert_eq!(x.values()[0], 1.0);
        assert_eq!(x.last_value(), 1.051_271_096_376_024_1);
        let flat = riskless_path(&params(0.1, 0.0), &g);
        assert!(flat.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_volatility_is_deterministic_growth() {
        let g = Partition::dyadic(1.0, 6).unwrap();
        let z = SamplePath::from_fn(&g, |t| (9.0 * t).sin());
        let p = params(0.1, 0.05);
        let m = price_path(&p, &constant_vol(&g, 0.0), &z).unwrap();
        for ((&t, &y), &x) in g
            .times()
            .iter()
            .zip(m.risky.values())
            .zip(m.riskless.values())
        {
            assert_eq!(y, 100.0 * (0.1 * t).exp());
            assert!((y / x - 100.0 * (0.05 * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_modulator_fixture() {
        let g = Partition::dyadic(1.0, 5).unwrap();
        let z = SamplePath::from_fn(&g, |t| t);
        let m = price_path(&params(0.1, 0.05), &constant_vol(&g, 0.2), &z).unwrap();
        let expected = 100.0 * 1.349_858_807_576_003_2;
        assert!((m.risky.last_value() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn stored_integral_reproduces_log_prices() {
        let g = Partition::dyadic(1.0, 8).unwrap();
        let z = FbmSampler::new(0.7, 1.0, 256).unwrap().sample(4);
        let vol = simulate_volatility(
            &VolatilityModelSpec::Heston {
                v0: 0.04,
                kappa: 1.5,
                theta: 0.04,
                xi: 0.3,
            },
            &g,
            4,
            None,
        )
        .unwrap();
        let p = params(0.1, 0.05);
        let m = price_path(&p, &vol, &z).unwrap();
        for ((&t, &y), &i) in g
            .times()
            .iter()
            .zip(m.risky.values())
            .zip(m.log_integral.values())
        {
            assert!(y > 0.0);
            assert!(((y / 100.0).ln() - 0.1 * t - i).abs() < 1e-13);
        }
    }

    #[test]
    fn overflow_reports_time() {
        let g = Partition::uniform(1.0, 4).unwrap();
        let z = SamplePath::new(g.times().to_vec(), vec![0.0, 0.0, 1e4, 1e4, 1e4]).unwrap();
        let err = price_path(&params(0.1, 0.05), &constant_vol(&g, 1.0), &z).unwrap_err();
        assert_eq!(
            err,
            Error::NumericOverflow {
                time: 0.5,
                exponent: 0.05 + 1e4
            }
        );
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let g = Partition::uniform(1.0, 4).unwrap();
        let z = SamplePath::constant(&Partition::uniform(1.0, 8).unwrap(), 0.0);
        assert!(matches!(
            price_path(&params(0.1, 0.05), &constant_vol(&g, 0.2), &z),
            Err(Error::GridMismatch { .. })
        ));
    }

    fn dyadic_levels(range: std::ops::RangeInclusive<u32>) -> Vec<Partition> {
        range.map(|k| Partition::dyadic(1.0, k).unwrap()).collect()
    }

    #[test]
    fn euler_gap_without_noise_is_first_order() {
        let g = Partition::dyadic(1.0, 12).unwrap();
        let z = SamplePath::constant(&g, 0.0);
        let m = price_path(&params(0.1, 0.05), &constant_vol(&g, 0.0), &z).unwrap();
        let c = discretized_sde_consistency(&m, &dyadic_levels(4..=12)).unwrap();
        assert!(c.failed_levels.is_empty());
        assert!((c.report.slope + 1.0).abs() < 0.05, "{}", c.report.slope);

        let m0 = price_path(&params(0.0, 0.05), &constant_vol(&g, 0.0), &z).unwrap();
        let c0 = discretized_sde_consistency(&m0, &dyadic_levels(4..=8)).unwrap();
        assert!(c0.report.residuals.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn euler_breakdown_is_recorded() {
        let g = Partition::uniform(1.0, 2).unwrap();
        let z = SamplePath::new(g.times().to_vec(), vec![0.0, -3.0, -3.0]).unwrap();
        let m = price_path(&params(0.0, 0.0), &constant_vol(&g, 1.0), &z).unwrap();
        let c = discretized_sde_consistency(&m, std::slice::from_ref(&g)).unwrap();
        assert_eq!(c.failed_levels, vec![2]);
        assert!(c.report.residuals[0].is_infinite());
    }

    #[test]
    fn euler_gap_shrinks_with_fbm_noise() {
        let spec = FbmSpec {
            hurst: 0.7,
            horizon: 1.0,
            num_steps: 1 << 12,
            seed: 0,
        };
        let sampler = FbmSampler::from_spec(&spec).unwrap();
        let g = Partition::dyadic(1.0, 12).unwrap();
        let levels = dyadic_levels(6..=12);
        let mut mean = vec![0.0; levels.len()];
        let seeds = 200;
        for seed in 0..seeds {
            let z = sampler.sample(seed);
            let m = price_path(&params(0.1, 0.05), &constant_vol(&g, 0.3), &z).unwrap();
            let c = discretized_sde_consistency(&m, &levels).unwrap();
            for (acc, r) in mean.iter_mut().zip(&c.report.residuals) {
                *acc += r / seeds as f64;
            }
        }
        assert!(crate::stats::non_decreasing_steps(&mean) == 0, "{mean:?}");
    }
}
