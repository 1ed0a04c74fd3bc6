//! The zero-capital portfolio
//!
//! ```text
//! theta0_t = (c / Y0) (Y0^2 - (e^{-rt} Y_t)^2)
//! theta1_t = (2c / Y0) (e^{-rt} Y_t - Y0)
//! ```
//!
//! and its value `P_t = theta0 X_t + theta1 Y_t = c Y0 e^{rt} (e^{a_t} - 1)^2`
//! with `a_t = (nu - r) t + I_t`. Holdings depend on the price path, `Y0`, `r`
//! and `c` only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{MarketParams, MarketPaths};
use crate::path::Partition;
use crate::stats::CompensatedSum;

/// Relative tolerance between the price form and the exponent form of the holdings.
pub const REPRESENTATION_TOLERANCE: f64 = 1e-12;
/// Relative tolerance between `theta . (X, Y)` and the squared closed form.
pub const VALUE_TOLERANCE: f64 = 1e-10;

fn default_c() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyParams {
    #[serde(default = "default_c")]
    pub c: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self { c: default_c() }
    }
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        if self.c > 0.0 && self.c.is_finite() {
            Ok(())
        } else {
            Err(Error::domain("c", self.c, "(0, inf)"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Holdings {
    /// Units of the riskless asset.
    pub theta0: f64,
    /// Units of the risky asset.
    pub theta1: f64,
}

/// Holdings from the observed price. Reads only `r` and `y0` from `market`.
pub fn holdings(
    t: f64,
    y_t: f64,
    strategy: &StrategyParams,
    market: &MarketParams,
) -> Result<Holdings> {
    if !(y_t > 0.0 && y_t.is_finite()) {
        return Err(Error::domain("y_t", y_t, "(0, inf)"));
    }
    if !(t >= 0.0) {
        return Err(Error::domain("t", t, "[0, inf)"));
    }
    let c = strategy.c;
    let y0 = market.y0;
    let d = y_t * (-market.r * t).exp();
    Ok(Holdings {
        theta0: (c / y0) * ((y0 - d) * (y0 + d)),
        theta1: (2.0 * c / y0) * (d - y0),
    })
}

/// Holdings written through the exponent `a = (nu - r) t + I_t`.
pub fn exponent_form_holdings(
    t: f64,
    running_integral: f64,
    strategy: &StrategyParams,
    market: &MarketParams,
) -> Result<Holdings> {
    let a = (market.nu - market.r) * t + running_integral;
    if !a.is_finite() || 2.0 * a > 709.78 {
        return Err(Error::NumericOverflow {
            time: t,
            exponent: a,
        });
    }
    let c = strategy.c;
    Ok(Holdings {
        theta0: -c * market.y0 * (2.0 * a).exp_m1(),
        theta1: 2.0 * c * a.exp_m1(),
    })
}

/// Largest relative disagreement between two holdings representations at
/// exponent `a`. Each component is measured against the larger of its own
/// magnitude and the magnitude of the terms that cancel to produce it, so a
/// holding that is zero up to rounding is not divided by zero.
pub fn representation_gap(
    lhs: &Holdings,
    rhs: &Holdings,
    a: f64,
    strategy: &StrategyParams,
    market: &MarketParams,
) -> f64 {
    let c = strategy.c;
    let ea = a.exp();
    let scale0 = (c * market.y0 * (1.0 + ea) * ea).max(lhs.theta0.abs());
    let scale1 = (2.0 * c * ea).max(lhs.theta1.abs());
    let g0 = (lhs.theta0 - rhs.theta0).abs() / scale0;
    let g1 = (lhs.theta1 - rhs.theta1).abs() / scale1;
    g0.max(g1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioTrajectory {
    pub grid: Partition,
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
    /// `theta0 X + theta1 Y`
    pub value: Vec<f64>,
    /// `c Y0 e^{rt} expm1(a)^2`
    pub closed_form_value: Vec<f64>,
    /// `a_t = (nu - r) t + I_t`
    pub exponent: Vec<f64>,
    /// Per-step self-financing gaps; one fewer than grid points.
    pub sf_residuals: Vec<f64>,
    /// Largest relative gap between the price-form and exponent-form holdings.
    pub representation_gap: f64,
}

impl PortfolioTrajectory {
    pub fn max_abs_residual(&self) -> f64 {
        self.sf_residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn sum_abs_residual(&self) -> f64 {
        crate::stats::compensated_sum(self.sf_residuals.iter().map(|r| r.abs()))
    }

    pub fn terminal_value(&self) -> f64 {
        *self.closed_form_value.last().expect("non-empty trajectory")
    }

    pub fn terminal_exponent(&self) -> f64 {
        *self.exponent.last().expect("non-empty trajectory")
    }
}

pub fn portfolio_value(
    paths: &MarketPaths,
    strategy: &StrategyParams,
) -> Result<PortfolioTrajectory> {
    strategy.validate()?;
    let market = &paths.params;
    let times = paths.risky.times();
    let x = paths.riskless.values();
    let y = paths.risky.values();
    let ints = paths.log_integral.values();
    let n = times.len();

    let mut theta0 = Vec::with_capacity(n);
    let mut theta1 = Vec::with_capacity(n);
    let mut value = Vec::with_capacity(n);
    let mut closed = Vec::with_capacity(n);
    let mut exponent = Vec::with_capacity(n);
    let mut repr_gap: f64 = 0.0;

    for i in 0..n {
        let t = times[i];
        let h = holdings(t, y[i], strategy, market)?;
        let a = (market.nu - market.r) * t + ints[i];
        let hx = exponent_form_holdings(t, ints[i], strategy, market)?;
        repr_gap = repr_gap.max(representation_gap(&h, &hx, a, strategy, market));

        let p = h.theta0 * x[i] + h.theta1 * y[i];
        let em1 = a.exp_m1();
        let cf = strategy.c * market.y0 * (market.r * t).exp() * (em1 * em1);
        let scale = cf.max((h.theta0 * x[i]).abs() + (h.theta1 * y[i]).abs());
        if (p - cf).abs() > VALUE_TOLERANCE * scale {
            return Err(Error::Consistency {
                time: t,
                detail: format!("portfolio value {p} differs from closed form {cf}"),
            });
        }
        theta0.push(h.theta0);
        theta1.push(h.theta1);
        value.push(p);
        closed.push(cf);
        exponent.push(a);
    }

    let mut traj = PortfolioTrajectory {
        grid: paths.grid(),
        theta0,
        theta1,
        value,
        closed_form_value: closed,
        exponent,
        sf_residuals: Vec::new(),
        representation_gap: repr_gap,
    };
    traj.sf_residuals = self_financing_residuals(&traj, paths)?;
    Ok(traj)
}

/// `(P_{i+1} - P_i) - [theta0_i (X_{i+1} - X_i) + theta1_i (Y_{i+1} - Y_i)]`
/// per step, with holdings frozen at the left endpoint.
pub fn self_financing_residuals(
    traj: &PortfolioTrajectory,
    paths: &MarketPaths,
) -> Result<Vec<f64>> {
    let n = traj.value.len();
    if paths.risky.len() != n || paths.riskless.len() != n || traj.theta0.len() != n {
        return Err(Error::GridMismatch {
            left: n,
            right: paths.risky.len(),
        });
    }
    let x = paths.riskless.values();
    let y = paths.risky.values();
    let p = &traj.value;
    Ok((0..n.saturating_sub(1))
        .map(|i| {
            let mut acc = CompensatedSum::new();
            acc.add(p[i + 1]);
            acc.add(-p[i]);
            acc.add(-traj.theta0[i] * (x[i + 1] - x[i]));
            acc.add(-traj.theta1[i] * (y[i + 1] - y[i]));
            acc.value()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    /// Zero start, nonnegative throughout, strictly positive at the horizon.
    Arbitrage,
    /// Exponent identically zero: no gain and no loss.
    NullArbitrage,
    /// Exponent vanishes at the horizon only, so `P_T = 0`.
    Coincidence,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageCertificate {
    pub status: CertificateStatus,
    pub terminal_value: f64,
    pub terminal_exponent: f64,
    /// Fraction of interior grid times with `P_t > 0`.
    pub positive_fraction: f64,
    /// Time of the first violated condition, if any.
    pub offending_time: Option<f64>,
    pub detail: Option<String>,
}

impl ArbitrageCertificate {
    pub fn passed(&self) -> bool {
        self.status != CertificateStatus::Failed
    }
}

pub fn arbitrage_certificate(traj: &PortfolioTrajectory) -> ArbitrageCertificate {
    let times = traj.grid.times();
    let cf = &traj.closed_form_value;
    let n = cf.len();
    let interior = n.saturating_sub(2);
    let positive = cf[1..n - 1].iter().filter(|&&p| p > 0.0).count();
    let mut cert = ArbitrageCertificate {
        status: CertificateStatus::Arbitrage,
        terminal_value: traj.terminal_value(),
        terminal_exponent: traj.terminal_exponent(),
        positive_fraction: if interior == 0 {
            1.0
        } else {
            positive as f64 / interior as f64
        },
        offending_time: None,
        detail: None,
    };
    let fail = |mut c: ArbitrageCertificate, t: f64, why: String| {
        c.status = CertificateStatus::Failed;
        c.offending_time = Some(t);
        c.detail = Some(why);
        c
    };

    if cf[0] != 0.0 || traj.value[0] != 0.0 || traj.theta0[0] != 0.0 || traj.theta1[0] != 0.0 {
        return fail(cert, times[0], "nonzero initial position".into());
    }
    if let Some(i) = cf.iter().position(|p| !(*p >= 0.0)) {
        return fail(cert, times[i], format!("negative value {}", cf[i]));
    }
    let a_t = traj.terminal_exponent();
    if a_t == 0.0 {
        cert.status = if traj.exponent.iter().all(|&a| a == 0.0) {
            CertificateStatus::NullArbitrage
        } else {
            CertificateStatus::Coincidence
        };
        return cert;
    }
    if !(cert.terminal_value > 0.0) {
        let t = times[n - 1];
        return fail(
            cert,
            t,
            format!(
                "terminal value {} with exponent {a_t}",
                traj.terminal_value()
            ),
        );
    }
    cert
}
