//! Exact sampling of fractional Brownian motion.
//!
//! Uniform grids use circulant embedding of the fractional Gaussian noise
//! covariance (Davies-Harte). Arbitrary grids, and the random clocks of
//! time-changed modulators, use a Cholesky factor of the full covariance
//!
//! ```text
//! E[B_t B_s] = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2
//! ```

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{Partition, SamplePath};
use crate::seeding::{component_rng, Component};

/// Largest uniform grid for which a failed circulant embedding falls back to
/// covariance factorization.
pub const FACTORIZATION_FALLBACK_MAX_STEPS: usize = 2048;

/// Relative floor below which a circulant eigenvalue counts as negative
/// rather than rounding noise.
const EIGENVALUE_FLOOR: f64 = -1e-10;

const JITTER_START: f64 = 1e-12;
const JITTER_MAX_RETRIES: u32 = 3;

fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("hurst", hurst, "(0, 1)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmSpec {
    pub hurst: f64,
    pub horizon: f64,
    pub num_steps: usize,
    pub seed: u64,
}

impl FbmSpec {
    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::domain("horizon", self.horizon, "(0, inf)"));
        }
        if self.num_steps == 0 {
            return Err(Error::domain("num_steps", 0.0, "[1, inf)"));
        }
        Ok(())
    }
}

/// Autocovariance of unit-spacing fractional Gaussian noise,
/// `(|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2`.
pub fn fgn_autocovariance(lag: u64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    Ok(fgn_gamma(lag as f64, hurst))
}

fn fgn_gamma(k: f64, hurst: f64) -> f64 {
    let e = 2.0 * hurst;
    0.5 * ((k + 1.0).abs().powf(e) - 2.0 * k.abs().powf(e) + (k - 1.0).abs().powf(e))
}

pub fn fbm_covariance(t: f64, s: f64, hurst: f64) -> f64 {
    let e = 2.0 * hurst;
    0.5 * (t.abs().powf(e) + s.abs().powf(e) - (t - s).abs().powf(e))
}

/// Davies-Harte sampler for a fixed `(H, T, n)`; eigenvalues and the FFT plan
/// are computed once and shared by every draw.
#[derive(Clone)]
pub struct CirculantFbm {
    hurst: f64,
    grid: Partition,
    /// `sqrt(lambda_k / m)` at k = 0 and k = n, `sqrt(lambda_k / 2m)` otherwise.
    scales: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantFbm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantFbm")
            .field("hurst", &self.hurst)
            .field("num_steps", &self.grid.num_steps())
            .finish()
    }
}

impl CirculantFbm {
    pub fn new(hurst: f64, horizon: f64, num_steps: usize) -> Result<Self> {
        check_hurst(hurst)?;
        let grid = Partition::uniform(horizon, num_steps)?;
        let n = num_steps;
        let m = 2 * n;

        let mut row: Vec<Complex64> = (0..m)
            .map(|j| {
                let k = if j <= n { j } else { m - j };
                Complex64::new(fgn_gamma(k as f64, hurst), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);

        let top = row.iter().map(|c| c.re).fold(0.0_f64, f64::max);
        let mut scales = vec![0.0; n + 1];
        for (k, s) in scales.iter_mut().enumerate() {
            let lambda = row[k].re;
            if lambda < EIGENVALUE_FLOOR * top {
                return Err(Error::NegativeEigenvalue {
                    index: k,
                    value: lambda,
                });
            }
            let lambda = lambda.max(0.0);
            *s = if k == 0 || k == n {
                (lambda / m as f64).sqrt()
            } else {
                (lambda / (2 * m) as f64).sqrt()
            };
        }

        Ok(Self {
            hurst,
            grid,
            scales,
            fft,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn grid(&self) -> &Partition {
        &self.grid
    }

    /// Unit-spacing fractional Gaussian noise of length `n`.
    pub fn sample_fgn<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.grid.num_steps();
        let m = 2 * n;
        let mut w = vec![Complex64::new(0.0, 0.0); m];
        let z0: f64 = rng.sample(StandardNormal);
        let zn: f64 = rng.sample(StandardNormal);
        w[0] = Complex64::new(self.scales[0] * z0, 0.0);
        w[n] = Complex64::new(self.scales[n] * zn, 0.0);
        for k in 1..n {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let s = self.scales[k];
            w[k] = Complex64::new(s * a, s * b);
            w[m - k] = Complex64::new(s * a, -s * b);
        }
        self.fft.process(&mut w);
        w.truncate(n);
        w.into_iter().map(|c| c.re).collect()
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> SamplePath {
        let noise = self.sample_fgn(rng);
        let scale = self.grid.mesh().powf(self.hurst);
        let mut values = Vec::with_capacity(noise.len() + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for x in noise {
            acc += scale * x;
            values.push(acc);
        }
        SamplePath::on_grid(&self.grid, values).expect("grid and values have equal length")
    }
}

/// Diagnostics of a covariance factorization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FactorizationInfo {
    /// Diagonal jitter that was finally added, relative to the largest variance.
    pub jitter: f64,
    pub retries: u32,
}

/// Exact Gaussian sampler for fBm observed at arbitrary times, backed by a
/// packed lower-triangular Cholesky factor.
#[derive(Debug, Clone)]
pub struct CovarianceFbm {
    hurst: f64,
    /// Output grid, always starting at 0.
    times: Vec<f64>,
    dim: usize,
    factor: Vec<f64>,
    info: FactorizationInfo,
}

impl CovarianceFbm {
    /// `times` must be strictly increasing with `times[0] >= 0`. When
    /// `times[0] > 0` the origin is prepended, so output paths always start at
    /// `(0, 0)`.
    pub fn new(times: &[f64], hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        if times.is_empty() || !(times[0] >= 0.0) {
            return Err(Error::Invariant(
                "covariance grid must be nonempty with nonnegative times".into(),
            ));
        }
        let mut grid = Vec::with_capacity(times.len() + 1);
        if times[0] > 0.0 {
            grid.push(0.0);
        }
        grid.extend_from_slice(times);
        // Validates strict monotonicity.
        Partition::new(grid.clone())?;

        let positive = &grid[1..];
        let dim = positive.len();
        let mut base = vec![0.0; dim * (dim + 1) / 2];
        let mut top = 0.0_f64;
        for i in 0..dim {
            let row = i * (i + 1) / 2;
            for j in 0..=i {
                base[row + j] = fbm_covariance(positive[i], positive[j], hurst);
            }
            top = top.max(base[row + i]);
        }

        let mut info = FactorizationInfo::default();
        let mut factor = base.clone();
        let mut jitter = JITTER_START;
        loop {
            match cholesky_packed(&mut factor, dim) {
                Ok(()) => break,
                Err(_) if info.retries < JITTER_MAX_RETRIES => {
                    factor.copy_from_slice(&base);
                    for i in 0..dim {
                        factor[i * (i + 1) / 2 + i] += jitter * top;
                    }
                    info.retries += 1;
                    info.jitter = jitter;
                    jitter *= 2.0;
                }
                Err(_) => {
                    return Err(Error::Factorization {
                        retries: info.retries,
                        jitter: info.jitter,
                    })
                }
            }
        }

        Ok(Self {
            hurst,
            times: grid,
            dim,
            factor,
            info,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn info(&self) -> FactorizationInfo {
        self.info
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> SamplePath {
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut values = vec![0.0; self.times.len()];
        for i in 0..self.dim {
            let row = &self.factor[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
            // Output index 0 is the origin, pinned at zero.
            values[i + 1] = dot(row, &z[..=i]);
        }
        SamplePath::new(self.times.clone(), values).expect("grid validated at construction")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0_f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// In-place Cholesky of a packed lower-triangular matrix (row `i` starts at
/// `i(i+1)/2`). On failure returns the row whose pivot was not positive.
pub(crate) fn cholesky_packed(a: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    for i in 0..n {
        let ri = i * (i + 1) / 2;
        let (head, tail) = a.split_at_mut(ri);
        for j in 0..i {
            let rj = j * (j + 1) / 2;
            let s = dot(&tail[..j], &head[rj..rj + j]);
            tail[j] = (tail[j] - s) / head[rj + j];
        }
        let pivot = tail[i] - dot(&tail[..i], &tail[..i]);
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(i);
        }
        tail[i] = pivot.sqrt();
    }
    Ok(())
}

/// Uniform-grid fBm sampler: circulant embedding, with covariance
/// factorization as fallback on small grids.
#[derive(Debug, Clone)]
pub enum FbmSampler {
    Circulant(CirculantFbm),
    Factorized(CovarianceFbm),
}

impl FbmSampler {
    pub fn new(hurst: f64, horizon: f64, num_steps: usize) -> Result<Self> {
        match CirculantFbm::new(hurst, horizon, num_steps) {
            Ok(c) => Ok(Self::Circulant(c)),
            Err(Error::NegativeEigenvalue { .. })
                if num_steps <= FACTORIZATION_FALLBACK_MAX_STEPS =>
            {
                let grid = Partition::uniform(horizon, num_steps)?;
                Ok(Self::Factorized(CovarianceFbm::new(grid.times(), hurst)?))
            }
            Err(e) => Err(e),
        }
    }

    pub fn from_spec(spec: &FbmSpec) -> Result<Self> {
        spec.validate()?;
        Self::new(spec.hurst, spec.horizon, spec.num_steps)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> SamplePath {
        match self {
            Self::Circulant(c) => c.sample_with(rng),
            Self::Factorized(f) => f.sample_with(rng),
        }
    }

    /// Path for the given path seed, drawn from the modulator stream.
    pub fn sample(&self, seed: u64) -> SamplePath {
        self.sample_with(&mut component_rng(seed, Component::Modulator))
    }
}

pub fn generate_fbm(spec: &FbmSpec) -> Result<SamplePath> {
    Ok(FbmSampler::from_spec(spec)?.sample(spec.seed))
}

/// A path sampled on a caller-supplied grid, with factorization diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub path: SamplePath,
    pub factorization: FactorizationInfo,
}

pub fn generate_fbm_on_grid(times: &[f64], hurst: f64, seed: u64) -> Result<GridSample> {
    let sampler = CovarianceFbm::new(times, hurst)?;
    let path = sampler.sample_with(&mut component_rng(seed, Component::Modulator));
    Ok(GridSample {
        path,
        factorization: sampler.info(),
    })
}

/// Brownian motion on `grid`, drawn from the auxiliary stream of `seed`.
pub fn brownian_path(grid: &Partition, seed: u64) -> SamplePath {
    let mut rng = component_rng(seed, Component::Auxiliary);
    let times = grid.times();
    let mut values = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    values.push(0.0);
    for w in times.windows(2) {
        let z: f64 = rng.sample(StandardNormal);
        acc += (w[1] - w[0]).sqrt() * z;
        values.push(acc);
    }
    SamplePath::on_grid(grid, values).expect("one value per grid point")
}

/// Parameters of a CIR rate `dv = kappa (theta - v) dt + xi sqrt(v) dB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CirParams {
    pub v0: f64,
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
}

impl CirParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("v0", self.v0),
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("xi", self.xi),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(name, v, "[0, inf)"));
            }
        }
        Ok(())
    }
}

/// A continuous nondecreasing clock `A` observed on a grid, `A_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeChange {
    clock: SamplePath,
}

impl TimeChange {
    pub fn new(clock: SamplePath) -> Result<Self> {
        let v = clock.values();
        if v[0] != 0.0 {
            return Err(Error::Invariant(format!(
                "time change must start at 0, got {}",
                v[0]
            )));
        }
        for (i, w) in v.windows(2).enumerate() {
            if !(w[1] >= w[0]) || !w[1].is_finite() {
                return Err(Error::Invariant(format!(
                    "time change decreases at t = {} ({} -> {})",
                    clock.times()[i + 1],
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Self { clock })
    }

    pub fn identity(grid: &Partition) -> Self {
        Self {
            clock: SamplePath::from_fn(grid, |t| t),
        }
    }

    /// `A_t = t^p`, `p > 0`.
    pub fn power(grid: &Partition, p: f64) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::domain("p", p, "(0, inf)"));
        }
        Ok(Self {
            clock: SamplePath::from_fn(grid, |t| t.powf(p)),
        })
    }

    /// `A_t = int_0^t v_s^+ ds` for a CIR variance `v` simulated with full
    /// truncation Euler on `grid`, drawn from the time-change stream of `seed`.
    pub fn integrated_cir(grid: &Partition, params: CirParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = component_rng(seed, Component::TimeChange);
        let times = grid.times();
        let mut clock = Vec::with_capacity(times.len());
        clock.push(0.0);
        let mut v = params.v0;
        let mut a = 0.0;
        for w in times.windows(2) {
            let dt = w[1] - w[0];
            let vp = v.max(0.0);
            a += vp * dt;
            clock.push(a);
            let db = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
            v += params.kappa * (params.theta - vp) * dt + params.xi * vp.sqrt() * db;
        }
        Self::new(SamplePath::on_grid(grid, clock)?)
    }

    pub fn clock(&self) -> &SamplePath {
        &self.clock
    }
}

/// Sampler for `Z_t = B^H_{A_t}` on a fixed clock. The factorization is built
/// once over the distinct clock values and reused for every seed.
#[derive(Debug, Clone)]
pub struct TimeChangedFbm {
    times: Vec<f64>,
    /// Index into the distinct-clock sample for each output point.
    index: Vec<usize>,
    inner: CovarianceFbm,
}

impl TimeChangedFbm {
    pub fn new(tc: &TimeChange, hurst: f64) -> Result<Self> {
        let clock = tc.clock.values();
        let mut distinct = Vec::with_capacity(clock.len());
        let mut index = Vec::with_capacity(clock.len());
        for &a in clock {
            // Ties in A are exact; the clock is given on a grid.
            if distinct.last() != Some(&a) {
                distinct.push(a);
            }
            index.push(distinct.len() - 1);
        }
        let inner = CovarianceFbm::new(&distinct, hurst)?;
        Ok(Self {
            times: tc.clock.times().to_vec(),
            index,
            inner,
        })
    }

    pub fn info(&self) -> FactorizationInfo {
        self.inner.info()
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> SamplePath {
        let base = self.inner.sample_with(rng);
        let values = self.index.iter().map(|&i| base.values()[i]).collect();
        SamplePath::new(self.times.clone(), values).expect("clock grid is validated")
    }

    pub fn sample(&self, seed: u64) -> SamplePath {
        self.sample_with(&mut component_rng(seed, Component::Modulator))
    }
}

pub fn time_change_compose(tc: &TimeChange, hurst: f64, seed: u64) -> Result<GridSample> {
    let sampler = TimeChangedFbm::new(tc, hurst)?;
    Ok(GridSample {
        path: sampler.sample(seed),
        factorization: sampler.info(),
    })
}
