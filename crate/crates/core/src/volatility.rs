//! Volatility processes: continuous semimartingales driven by a Brownian motion
//! independent of the modulator, or deterministic functions of the modulator.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calculus::ModulatorFunction;
use crate::error::{Error, Result};
use crate::path::{Partition, SamplePath};
use crate::seeding::{component_rng, Component};
use crate::stats::CompensatedSum;

/// Named `C^1` functions available for modulator-driven volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiFunction {
    Identity,
    /// `a + b x`
    Affine {
        a: f64,
        b: f64,
    },
    Cos,
    /// `exp(tanh x)`, bounded in `(1/e, e)`
    ExpBounded,
}

impl ModulatorFunction for PhiFunction {
    fn value(&self, x: f64) -> f64 {
        match *self {
            PhiFunction::Identity => x,
            PhiFunction::Affine { a, b } => a + b * x,
            PhiFunction::Cos => x.cos(),
            PhiFunction::ExpBounded => x.tanh().exp(),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match *self {
            PhiFunction::Identity => 1.0,
            PhiFunction::Affine { b, .. } => b,
            PhiFunction::Cos => -x.sin(),
            PhiFunction::ExpBounded => {
                let th = x.tanh();
                th.exp() * (1.0 - th * th)
            }
        }
    }

    fn antiderivative(&self, x: f64) -> Option<f64> {
        match *self {
            PhiFunction::Identity => Some(0.5 * x * x),
            PhiFunction::Affine { a, b } => Some(a * x + 0.5 * b * x * x),
            PhiFunction::Cos => Some(x.sin()),
            PhiFunction::ExpBounded => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VolatilityModelSpec {
    Constant {
        level: f64,
    },
    /// CIR variance `dv = kappa (theta - v) dt + xi sqrt(v) dB`, `sigma = sqrt(v)`.
    Heston {
        v0: f64,
        kappa: f64,
        theta: f64,
        xi: f64,
    },
    /// Lognormal variance `dV = mu V dt + nu_vol V dB`, `sigma = sqrt(V)`.
    HullWhite {
        sigma0: f64,
        mu: f64,
        nu_vol: f64,
    },
    /// Ornstein-Uhlenbeck volatility `d sigma = kappa (theta - sigma) dt + beta dB`.
    SteinStein {
        sigma0: f64,
        kappa: f64,
        theta: f64,
        beta: f64,
    },
    /// `sigma_t = phi(Z_t)`
    FunctionOfModulator {
        phi: PhiFunction,
    },
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v, "finite"))
    }
}

fn nonneg(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v, "[0, inf)"))
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v, "(0, inf)"))
    }
}

impl VolatilityModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            VolatilityModelSpec::Constant { .. } => "constant",
            VolatilityModelSpec::Heston { .. } => "heston",
            VolatilityModelSpec::HullWhite { .. } => "hull_white",
            VolatilityModelSpec::SteinStein { .. } => "stein_stein",
            VolatilityModelSpec::FunctionOfModulator { .. } => "function_of_modulator",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            VolatilityModelSpec::Constant { level } => nonneg("level", level),
            VolatilityModelSpec::Heston {
                v0,
                kappa,
                theta,
                xi,
            } => {
                positive("v0", v0)?;
                nonneg("kappa", kappa)?;
                nonneg("theta", theta)?;
                nonneg("xi", xi)
            }
            VolatilityModelSpec::HullWhite { sigma0, mu, nu_vol } => {
                positive("sigma0", sigma0)?;
                finite("mu", mu)?;
                nonneg("nu_vol", nu_vol)
            }
            VolatilityModelSpec::SteinStein {
                sigma0,
                kappa,
                theta,
                beta,
            } => {
                finite("sigma0", sigma0)?;
                nonneg("kappa", kappa)?;
                finite("theta", theta)?;
                nonneg("beta", beta)
            }
            VolatilityModelSpec::FunctionOfModulator { phi } => match phi {
                PhiFunction::Affine { a, b } => {
                    finite("a", a)?;
                    finite("b", b)
                }
                _ => Ok(()),
            },
        }
    }

    pub fn needs_modulator(&self) -> bool {
        matches!(self, VolatilityModelSpec::FunctionOfModulator { .. })
    }
}

/// Drift and diffusion of the driving SDE, evaluated at each step's left point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeCoefficients {
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolPath {
    /// `sigma_t` on the grid.
    pub path: SamplePath,
    pub driver_seed: u64,
    pub model: VolatilityModelSpec,
    /// State of the driving SDE (variance for Heston and Hull-White, sigma
    /// itself for Stein-Stein); absent for constant and modulator-driven kinds.
    pub state: Option<SamplePath>,
    /// Absent for modulator-driven volatility, which has no driving SDE.
    pub coefficients: Option<SdeCoefficients>,
}

impl VolPath {
    /// Observes the volatility on every `stride`-th grid point.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        let path = self.path.coarsen(stride)?;
        let state = self.state.as_ref().map(|s| s.coarsen(stride)).transpose()?;
        let coefficients = self.coefficients.as_ref().map(|c| SdeCoefficients {
            drift: c.drift.iter().step_by(stride).copied().collect(),
            diffusion: c.diffusion.iter().step_by(stride).copied().collect(),
        });
        Ok(Self {
            path,
            driver_seed: self.driver_seed,
            model: self.model,
            state,
            coefficients,
        })
    }
}

pub fn simulate_volatility(
    model: &VolatilityModelSpec,
    grid: &Partition,
    seed: u64,
    z_path: Option<&SamplePath>,
) -> Result<VolPath> {
    model
        .validate()
        .map_err(|e| Error::Configuration(format!("{} volatility: {e}", model.name())))?;
    let times = grid.times();
    let n = grid.num_steps();

    if let VolatilityModelSpec::FunctionOfModulator { phi } = *model {
        let z = z_path.ok_or_else(|| {
            Error::Configuration(
                "function-of-modulator volatility requires a modulator path".into(),
            )
        })?;
        if z.times() != times {
            return Err(Error::Configuration(
                "modulator path must share the volatility grid".into(),
            ));
        }
        let mut values = Vec::with_capacity(z.len());
        for (i, &x) in z.values().iter().enumerate() {
            let v = phi.value(x);
            if !v.is_finite() {
                return Err(Error::NumericDomain {
                    what: "volatility function",
                    time: times[i],
                });
            }
            values.push(v);
        }
        return Ok(VolPath {
            path: SamplePath::on_grid(grid, values)?,
            driver_seed: seed,
            model: *model,
            state: None,
            coefficients: None,
        });
    }

    if let VolatilityModelSpec::Constant { level } = *model {
        return Ok(VolPath {
            path: SamplePath::constant(grid, level),
            driver_seed: seed,
            model: *model,
            state: None,
            coefficients: Some(SdeCoefficients {
                drift: vec![0.0; n],
                diffusion: vec![0.0; n],
            }),
        });
    }

    let mut rng = component_rng(seed, Component::Volatility);
    let mut state = Vec::with_capacity(n + 1);
    let mut drift = Vec::with_capacity(n);
    let mut diffusion = Vec::with_capacity(n);

    let (initial, to_sigma): (f64, fn(f64) -> f64) = match *model {
        VolatilityModelSpec::Heston { v0, .. } => (v0, |v: f64| v.max(0.0).sqrt()),
        VolatilityModelSpec::HullWhite { sigma0, .. } => (sigma0 * sigma0, f64::sqrt),
        VolatilityModelSpec::SteinStein { sigma0, .. } => (sigma0, |s: f64| s),
        _ => unreachable!("handled above"),
    };
    state.push(initial);

    for i in 0..n {
        let dt = times[i + 1] - times[i];
        let db = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let x = state[i];
        let next = match *model {
            VolatilityModelSpec::Heston {
                kappa, theta, xi, ..
            } => {
                // Full truncation: the positive part feeds both coefficients.
                let vp = x.max(0.0);
                let mu = kappa * (theta - vp);
                let sd = xi * vp.sqrt();
                drift.push(mu);
                diffusion.push(sd);
                x + mu * dt + sd * db
            }
            VolatilityModelSpec::HullWhite { mu, nu_vol, .. } => {
                drift.push(mu * x);
                diffusion.push(nu_vol * x);
                // Exact lognormal step.
                x * ((mu - 0.5 * nu_vol * nu_vol) * dt + nu_vol * db).exp()
            }
            VolatilityModelSpec::SteinStein {
                kappa, theta, beta, ..
            } => {
                let mu = kappa * (theta - x);
                drift.push(mu);
                diffusion.push(beta);
                x + mu * dt + beta * db
            }
            _ => unreachable!(),
        };
        if !next.is_finite() {
            return Err(Error::NumericDomain {
                what: "volatility state",
                time: times[i + 1],
            });
        }
        state.push(next);
    }

    let sigma: Vec<f64> = state.iter().map(|&x| to_sigma(x)).collect();
    Ok(VolPath {
        path: SamplePath::on_grid(grid, sigma)?,
        driver_seed: seed,
        model: *model,
        state: Some(SamplePath::on_grid(grid, state)?),
        coefficients: Some(SdeCoefficients { drift, diffusion }),
    })
}

/// Whether the discrete integrals `sum |mu_W| dt` and `sum sigma_W^2 dt` are
/// finite and within the supplied bounds. Modulator-driven volatility has no
/// SDE; only finiteness of the path is checked.
pub fn integrability_check(vol: &VolPath, mu_bound: f64, sigma2_bound: f64) -> bool {
    if !vol.path.all_finite() {
        return false;
    }
    let Some(coef) = &vol.coefficients else {
        return true;
    };
    let (mu_int, s2_int) = sde_integrals(&vol.path, coef);
    mu_int.is_finite() && s2_int.is_finite() && mu_int <= mu_bound && s2_int <= sigma2_bound
}

/// `(sum |mu_W| dt, sum sigma_W^2 dt)` over the path's grid.
pub fn sde_integrals(path: &SamplePath, coef: &SdeCoefficients) -> (f64, f64) {
    let mut mu = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    for (i, w) in path.times().windows(2).enumerate() {
        let dt = w[1] - w[0];
        mu.add(coef.drift[i].abs() * dt);
        s2.add(coef.diffusion[i] * coef.diffusion[i] * dt);
    }
    (mu.value(), s2.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(level: u32) -> Partition {
        Partition::dyadic(1.0, level).unwrap()
    }

    #[test]
    fn constant_volatility() {
        let v = simulate_volatility(
            &VolatilityModelSpec::Constant { level: 0.2 },
            &grid(5),
            1,
            None,
        )
        .unwrap();
        assert!(v.path.values().iter().all(|&s| s == 0.2));
        assert!(integrability_check(&v, 1e-9, 1e-9));
    }

    #[test]
    fn frozen_heston_is_constant() {
        let m = VolatilityModelSpec::Heston {
            v0: 0.04,
            kappa: 0.0,
            theta: 0.3,
            xi: 0.0,
        };
        let v = simulate_volatility(&m, &grid(8), 3, None).unwrap();
        assert!(v.path.values().iter().all(|&s| (s - 0.2).abs() < 1e-16));
    }

    #[test]
    fn noiseless_stein_stein_follows_the_ode() {
        let m = VolatilityModelSpec::SteinStein {
            sigma0: 0.4,
            kappa: 1.0,
            theta: 0.2,
            beta: 0.0,
        };
        let v = simulate_volatility(&m, &grid(14), 3, None).unwrap();
        // theta + (sigma0 - theta) e^{-1}; Euler error ~ 0.2 e^{-1} / (2n)
        let exact = 0.273_575_888_234_288_46;
        assert!((v.path.last_value() - exact).abs() < 5e-6);
    }

    #[test]
    fn stein_stein_diffusion_integral() {
        let m = VolatilityModelSpec::SteinStein {
            sigma0: 0.1,
            kappa: 2.0,
            theta: 0.2,
            beta: 0.5,
        };
        let v = simulate_volatility(&m, &grid(10), 8, None).unwrap();
        let (_, s2) = sde_integrals(&v.path, v.coefficients.as_ref().unwrap());
        assert_eq!(s2, 0.25);
        assert!(integrability_check(&v, 100.0, 0.25));
        assert!(!integrability_check(&v, 100.0, 0.2));
    }

    #[test]
    fn non_finite_path_fails_integrability() {
        let g = grid(3);
        let mut v = simulate_volatility(&VolatilityModelSpec::Constant { level: 0.1 }, &g, 0, None)
            .unwrap();
        let mut vals = v.path.values().to_vec();
        vals[4] = f64::INFINITY;
        v.path = SamplePath::on_grid(&g, vals).unwrap();
        assert!(!integrability_check(&v, f64::MAX, f64::MAX));
    }

    #[test]
    fn heston_truncated_variance_is_nonnegative() {
        // Far outside the Feller region so the raw variance does go negative.
        let m = VolatilityModelSpec::Heston {
            v0: 0.01,
            kappa: 0.5,
            theta: 0.01,
            xi: 1.5,
        };
        let mut went_negative = false;
        for seed in 0..50 {
            let v = simulate_volatility(&m, &grid(9), seed, None).unwrap();
            let st = v.state.as_ref().unwrap();
            went_negative |= st.values().iter().any(|&x| x < 0.0);
            let c = v.coefficients.as_ref().unwrap();
            assert!(c.diffusion.iter().all(|&d| d >= 0.0));
            assert!(v.path.values().iter().all(|&s| s >= 0.0));
        }
        assert!(went_negative);
    }

    #[test]
    fn hull_white_matches_lognormal_state() {
        let m = VolatilityModelSpec::HullWhite {
            sigma0: 0.2,
            mu: 0.1,
            nu_vol: 0.5,
        };
        let v = simulate_volatility(&m, &grid(6), 2, None).unwrap();
        let st = v.state.unwrap();
        for (s, var) in v.path.values().iter().zip(st.values()) {
            assert!(*var > 0.0);
            assert!((s * s - var).abs() < 1e-15);
        }
    }

    #[test]
    fn function_of_modulator_is_pointwise_and_seed_free() {
        let g = grid(6);
        let z = SamplePath::from_fn(&g, |t| (3.0 * t).sin());
        let m = VolatilityModelSpec::FunctionOfModulator {
            phi: PhiFunction::Cos,
        };
        let a = simulate_volatility(&m, &g, 1, Some(&z)).unwrap();
        let b = simulate_volatility(&m, &g, 2, Some(&z)).unwrap();
        assert_eq!(a.path, b.path);
        for (s, x) in a.path.values().iter().zip(z.values()) {
            assert_eq!(*s, x.cos());
        }
        assert!(integrability_check(&a, 0.0, 0.0));
    }

    #[test]
    fn function_of_modulator_needs_z() {
        let m = VolatilityModelSpec::FunctionOfModulator {
            phi: PhiFunction::Identity,
        };
        assert!(matches!(
            simulate_volatility(&m, &grid(3), 0, None),
            Err(Error::Configuration(_))
        ));
        let other = SamplePath::constant(&grid(4), 0.0);
        assert!(simulate_volatility(&m, &grid(3), 0, Some(&other)).is_err());
    }

    #[test]
    fn invalid_parameters_are_configuration_errors() {
        let bad = [
            VolatilityModelSpec::Constant { level: -0.1 },
            VolatilityModelSpec::Heston {
                v0: 0.0,
                kappa: 1.0,
                theta: 0.04,
                xi: 0.1,
            },
            VolatilityModelSpec::HullWhite {
                sigma0: 0.2,
                mu: f64::NAN,
                nu_vol: 0.1,
            },
            VolatilityModelSpec::SteinStein {
                sigma0: 0.2,
                kappa: -1.0,
                theta: 0.2,
                beta: 0.1,
            },
        ];
        for m in bad {
            assert!(matches!(
                simulate_volatility(&m, &grid(3), 0, None),
                Err(Error::Configuration(_))
            ));
        }
    }

    #[test]
    fn phi_derivatives_match_finite_differences() {
        let fns = [
            PhiFunction::Identity,
            PhiFunction::Affine { a: 0.3, b: -1.2 },
            PhiFunction::Cos,
            PhiFunction::ExpBounded,
        ];
        let h = 1e-6;
        for f in fns {
            for x in [-1.7, -0.2, 0.0, 0.4, 2.3] {
                let fd = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
                assert!((fd - f.derivative(x)).abs() < 1e-8, "{f:?} at {x}");
                if let (Some(a), Some(b)) = (f.antiderivative(x + h), f.antiderivative(x - h)) {
                    assert!(((a - b) / (2.0 * h) - f.value(x)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn coarsening_keeps_left_point_coefficients() {
        let m = VolatilityModelSpec::SteinStein {
            sigma0: 0.3,
            kappa: 1.0,
            theta: 0.2,
            beta: 0.3,
        };
        let v = simulate_volatility(&m, &grid(6), 5, None).unwrap();
        let c = v.coarsen(4).unwrap();
        assert_eq!(c.path.len(), 17);
        let cc = c.coefficients.unwrap();
        assert_eq!(cc.drift.len(), 16);
        assert_eq!(cc.drift[3], v.coefficients.as_ref().unwrap().drift[12]);
    }
}
