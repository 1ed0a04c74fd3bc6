//! Time grids and sampled paths.
//!
//! A [`SamplePath`] pairs a strictly increasing grid starting at `t = 0` with
//! one real value per grid point. It carries the modulator, the volatility,
//! prices, holdings and running integrals alike.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Invariant("time grid is empty".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::Invariant(format!(
            "time grid must start at 0, got {}",
            times[0]
        )));
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(Error::Invariant(format!(
                "time grid must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// A partition `0 = t_0 < t_1 < ... < t_n` together with its mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    times: Vec<f64>,
    mesh: f64,
}

impl Partition {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        check_times(&times)?;
        let mesh = times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0_f64, f64::max);
        Ok(Self { times, mesh })
    }

    /// Uniform grid of `num_steps` intervals on `[0, horizon]`.
    ///
    /// Grid points are `i * (horizon / num_steps)`, so dyadic grids are exactly
    /// nested: point `i` at level `k` equals point `2i` at level `k + 1`.
    pub fn uniform(horizon: f64, num_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::domain("horizon", horizon, "(0, inf)"));
        }
        if num_steps == 0 {
            return Err(Error::domain("num_steps", 0.0, "[1, inf)"));
        }
        let dt = horizon / num_steps as f64;
        let mut times: Vec<f64> = (0..=num_steps).map(|i| i as f64 * dt).collect();
        times[num_steps] = horizon;
        Ok(Self { times, mesh: dt })
    }

    /// Uniform grid with `2^level` intervals.
    pub fn dyadic(horizon: f64, level: u32) -> Result<Self> {
        if level > 30 {
            return Err(Error::domain("level", level as f64, "[0, 30]"));
        }
        Self::uniform(horizon, 1usize << level)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// Number of intervals.
    pub fn num_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Indices of `self`'s points inside `fine`, or `NotNested` if some point is
    /// absent. Matching is exact: nested grids are constructed, never inferred.
    pub fn indices_in(&self, fine: &[f64]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.times.len());
        let mut cursor = 0usize;
        for &t in &self.times {
            match fine[cursor..].iter().position(|&s| s >= t) {
                Some(off) if fine[cursor + off] == t => {
                    cursor += off;
                    out.push(cursor);
                }
                _ => return Err(Error::NotNested { time: t }),
            }
        }
        Ok(out)
    }
}

/// Values observed on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_times(&times)?;
        if times.len() != values.len() {
            return Err(Error::Invariant(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        Ok(Self { times, values })
    }

    /// Path on `grid` with the given values; the grid is already validated.
    pub fn on_grid(grid: &Partition, values: Vec<f64>) -> Result<Self> {
        if grid.times.len() != values.len() {
            return Err(Error::Invariant(format!(
                "{} grid points but {} values",
                grid.times.len(),
                values.len()
            )));
        }
        Ok(Self {
            times: grid.times.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &Partition, f: impl FnMut(f64) -> f64) -> Self {
        let values = grid.times.iter().copied().map(f).collect();
        Self {
            times: grid.times.clone(),
            values,
        }
    }

    pub fn constant(grid: &Partition, level: f64) -> Self {
        Self::from_fn(grid, |_| level)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn partition(&self) -> Partition {
        Partition::new(self.times.clone()).expect("sample path grids are validated")
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().copied().map(f).collect(),
        }
    }

    pub fn same_grid(&self, other: &SamplePath) -> bool {
        self.times == other.times
    }

    pub(crate) fn require_same_grid(&self, other: &SamplePath) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.len(),
                right: other.len(),
            })
        }
    }

    /// Keeps every `stride`-th point. `len - 1` must be a multiple of `stride`.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        let steps = self.len() - 1;
        if stride == 0 || !steps.is_multiple_of(stride) {
            return Err(Error::Invariant(format!(
                "cannot coarsen {steps} steps by stride {stride}"
            )));
        }
        Ok(Self {
            times: self.times.iter().step_by(stride).copied().collect(),
            values: self.values.iter().step_by(stride).copied().collect(),
        })
    }

    /// Reads the path at the points of a coarser partition nested in this grid.
    pub fn restrict(&self, grid: &Partition) -> Result<Self> {
        let idx = grid.indices_in(&self.times)?;
        Ok(Self {
            times: grid.times.clone(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
        })
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
