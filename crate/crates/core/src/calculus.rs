//! Left-point Stieltjes sums, quadratic variation and residual checks for the
//! zero-quadratic-variation calculus.
//!
//! Every integral here is a finite left-point sum on the integrator's own grid.
//! Limits are never taken inside these functions; the convergence studies
//! evaluate the same sums on nested dyadic refinements and look at the trend.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{Partition, SamplePath};
use crate::stats::{self, CompensatedSum};

/// A `C^2` scalar field `F(t, z)` with analytic first partials.
pub trait ScalarField {
    fn value(&self, t: f64, z: f64) -> f64;
    /// `d F / d t`
    fn d_time(&self, t: f64, z: f64) -> f64;
    /// `d F / d z`
    fn d_space(&self, t: f64, z: f64) -> f64;
}

/// The fields exercised by the modified Ito checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItoField {
    /// `F = z`
    Z,
    /// `F = t`
    T,
    /// `F = z^2`
    ZSquared,
    /// `F = t z`
    TZ,
    /// `F = e^z`
    ExpZ,
    /// `F = t^2 + sin z`
    TSquaredPlusSinZ,
}

impl ItoField {
    pub const ALL: [ItoField; 6] = [
        ItoField::Z,
        ItoField::T,
        ItoField::ZSquared,
        ItoField::TZ,
        ItoField::ExpZ,
        ItoField::TSquaredPlusSinZ,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ItoField::Z => "ito_z",
            ItoField::T => "ito_t",
            ItoField::ZSquared => "ito_z2",
            ItoField::TZ => "ito_tz",
            ItoField::ExpZ => "ito_expz",
            ItoField::TSquaredPlusSinZ => "ito_t2_sinz",
        }
    }

    /// Whether the discrete residual vanishes identically (telescoping).
    pub fn is_exact(&self) -> bool {
        matches!(self, ItoField::Z | ItoField::T)
    }
}

impl ScalarField for ItoField {
    fn value(&self, t: f64, z: f64) -> f64 {
        match self {
            ItoField::Z => z,
            ItoField::T => t,
            ItoField::ZSquared => z * z,
            ItoField::TZ => t * z,
            ItoField::ExpZ => z.exp(),
            ItoField::TSquaredPlusSinZ => t * t + z.sin(),
        }
    }

    fn d_time(&self, t: f64, z: f64) -> f64 {
        match self {
            ItoField::Z | ItoField::ZSquared | ItoField::ExpZ => 0.0,
            ItoField::T => 1.0,
            ItoField::TZ => z,
            ItoField::TSquaredPlusSinZ => 2.0 * t,
        }
    }

    fn d_space(&self, t: f64, z: f64) -> f64 {
        match self {
            ItoField::Z => 1.0,
            ItoField::T => 0.0,
            ItoField::ZSquared => 2.0 * z,
            ItoField::TZ => t,
            ItoField::ExpZ => z.exp(),
            ItoField::TSquaredPlusSinZ => z.cos(),
        }
    }
}

/// A `C^1` function of the modulator, optionally with a closed-form
/// antiderivative.
pub trait ModulatorFunction {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    /// Some antiderivative `Phi` with `Phi' = phi`, when one is known.
    fn antiderivative(&self, _x: f64) -> Option<f64> {
        None
    }
}

/// Residuals of a convergence study, one per grid size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub grid_sizes: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Log-log regression slope of residual against grid size.
    pub slope: f64,
}

impl ConvergenceReport {
    pub fn new(grid_sizes: Vec<usize>, residuals: Vec<f64>) -> Result<Self> {
        if grid_sizes.len() != residuals.len() {
            return Err(Error::Invariant(
                "convergence report columns differ in length".into(),
            ));
        }
        if grid_sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invariant(
                "convergence grid sizes must be strictly increasing".into(),
            ));
        }
        if residuals.iter().any(|r| *r < 0.0) {
            return Err(Error::Invariant("residuals must be nonnegative".into()));
        }
        let xs: Vec<f64> = grid_sizes.iter().map(|&n| n as f64).collect();
        let slope = stats::log_log_slope(&xs, &residuals);
        Ok(Self {
            grid_sizes,
            residuals,
            slope,
        })
    }

    /// Refinement steps at which the residual did not strictly decrease.
    pub fn non_decreasing_steps(&self) -> usize {
        stats::non_decreasing_steps(&self.residuals)
    }
}

/// Running left-point sum `I_{t_k} = sum_{i<k} Y_{t_i} (X_{t_{i+1}} - X_{t_i})`.
pub fn stieltjes_integral(integrand: &SamplePath, integrator: &SamplePath) -> Result<SamplePath> {
    integrand.require_same_grid(integrator)?;
    let y = integrand.values();
    let x = integrator.values();
    let mut acc = CompensatedSum::new();
    let mut out = Vec::with_capacity(x.len());
    out.push(0.0);
    for i in 0..x.len() - 1 {
        acc.add(y[i] * (x[i + 1] - x[i]));
        out.push(acc.value());
    }
    SamplePath::new(integrator.times().to_vec(), out)
}

/// `sum (Delta Z)^2` over the path's own grid.
pub fn quadratic_variation(path: &SamplePath) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::Invariant(
            "quadratic variation needs at least two points".into(),
        ));
    }
    Ok(stats::compensated_sum(path.increments().map(|d| d * d)))
}

/// `sum Delta W Delta Z` on a shared grid.
pub fn cross_variation(w: &SamplePath, z: &SamplePath) -> Result<f64> {
    w.require_same_grid(z)?;
    Ok(stats::compensated_sum(
        w.increments().zip(z.increments()).map(|(a, b)| a * b),
    ))
}

/// `|F(T, Z_T) - F(0, Z_0) - sum d_t F Delta t - sum d_z F Delta Z|` with all
/// partials at left endpoints. No second-order correction is subtracted.
pub fn ito_formula_residual(field: &dyn ScalarField, z_path: &SamplePath) -> Result<f64> {
    let t = z_path.times();
    let z = z_path.values();
    let n = z.len() - 1;
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        let dt = field.d_time(t[i], z[i]);
        let dz = field.d_space(t[i], z[i]);
        if !dt.is_finite() || !dz.is_finite() {
            return Err(Error::NumericDomain {
                what: "field derivative",
                time: t[i],
            });
        }
        acc.add(dt * (t[i + 1] - t[i]));
        acc.add(dz * (z[i + 1] - z[i]));
    }
    let start = field.value(t[0], z[0]);
    let end = field.value(t[n], z[n]);
    if !start.is_finite() || !end.is_finite() {
        return Err(Error::NumericDomain {
            what: "field value",
            time: t[n],
        });
    }
    let mut total = CompensatedSum::new();
    total.add(end);
    total.add(-start);
    total.add(-acc.value());
    Ok(total.value().abs())
}

/// Gap in the discrete Abel identity
/// `sum W dZ + sum Z dW + sum dW dZ = Z_T W_T - Z_0 W_0`, which holds exactly
/// for finite sums; only rounding remains.
pub fn abel_identity_gap(w: &SamplePath, z: &SamplePath) -> Result<f64> {
    w.require_same_grid(z)?;
    let wv = w.values();
    let zv = z.values();
    let n = wv.len() - 1;
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        let dw = wv[i + 1] - wv[i];
        let dz = zv[i + 1] - zv[i];
        acc.add(wv[i] * dz);
        acc.add(zv[i] * dw);
        acc.add(dw * dz);
    }
    acc.add(-(zv[n] * wv[n]));
    acc.add(zv[0] * wv[0]);
    Ok(acc.value().abs())
}

/// `|int W dZ + int Z dW - (Z_T W_T - Z_0 W_0)|` at the path's resolution. By
/// the Abel identity this equals `|sum dW dZ|` up to rounding.
pub fn integration_by_parts_residual(w: &SamplePath, z: &SamplePath) -> Result<f64> {
    let wz = stieltjes_integral(w, z)?.last_value();
    let zw = stieltjes_integral(z, w)?.last_value();
    let wv = w.values();
    let zv = z.values();
    let n = wv.len() - 1;
    let mut acc = CompensatedSum::new();
    acc.add(wz);
    acc.add(zw);
    acc.add(-(zv[n] * wv[n]));
    acc.add(zv[0] * wv[0]);
    Ok(acc.value().abs())
}

/// Quadratic variation of `int sigma dZ` read along nested refinements.
///
/// The integral is built once at the resolution of the supplied paths and then
/// observed at each refinement's points, so every entry is a deterministic
/// function of the same fine path. `refinements` must be ordered coarse to
/// fine, each nested in the next and all nested in the path grid.
pub fn integral_qv_residual(
    sigma_path: &SamplePath,
    z_path: &SamplePath,
    refinements: &[Partition],
) -> Result<ConvergenceReport> {
    let integral = stieltjes_integral(sigma_path, z_path)?;
    for pair in refinements.windows(2) {
        if pair[1].num_steps() <= pair[0].num_steps() {
            return Err(Error::Invariant(
                "refinements must have strictly increasing sizes".into(),
            ));
        }
        pair[0].indices_in(pair[1].times())?;
    }
    let mut sizes = Vec::with_capacity(refinements.len());
    let mut qv = Vec::with_capacity(refinements.len());
    for grid in refinements {
        let coarse = integral.restrict(grid)?;
        sizes.push(grid.num_steps());
        qv.push(quadratic_variation(&coarse)?);
    }
    ConvergenceReport::new(sizes, qv)
}

/// Running sums `sum phi(Z_{t_i}) Delta Z` and, when `phi` has a known
/// antiderivative, the closed-form reference `Phi(Z_t) - Phi(Z_0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionIntegral {
    pub running: SamplePath,
    pub closed_form: Option<SamplePath>,
}

impl FunctionIntegral {
    /// `|sum - closed form|` at the horizon, when a closed form is available.
    pub fn terminal_residual(&self) -> Option<f64> {
        self.closed_form
            .as_ref()
            .map(|c| (self.running.last_value() - c.last_value()).abs())
    }
}

pub fn function_of_z_integral(
    phi: &dyn ModulatorFunction,
    z_path: &SamplePath,
) -> Result<FunctionIntegral> {
    let t = z_path.times();
    let z = z_path.values();
    let mut integrand = Vec::with_capacity(z.len());
    for (i, &x) in z.iter().enumerate() {
        let v = phi.value(x);
        if !v.is_finite() {
            return Err(Error::NumericDomain {
                what: "modulator function",
                time: t[i],
            });
        }
        integrand.push(v);
    }
    let integrand = SamplePath::new(t.to_vec(), integrand)?;
    let running = stieltjes_integral(&integrand, z_path)?;

    let closed_form = match phi.antiderivative(z[0]) {
        None => None,
        Some(base) => {
            let mut vals = Vec::with_capacity(z.len());
            for (i, &x) in z.iter().enumerate() {
                let v = phi.antiderivative(x).ok_or(Error::NumericDomain {
                    what: "antiderivative",
                    time: t[i],
                })?;
                if !v.is_finite() {
                    return Err(Error::NumericDomain {
                        what: "antiderivative",
                        time: t[i],
                    });
                }
                vals.push(v - base);
            }
            Some(SamplePath::new(t.to_vec(), vals)?)
        }
    };
    Ok(FunctionIntegral {
        running,
        closed_form,
    })
}
