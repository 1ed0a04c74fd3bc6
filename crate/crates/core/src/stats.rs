//! Small numeric helpers shared by the verifiers and the experiment harness.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    covariance(xs, xs)
}

/// Unbiased sample covariance.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let mx = mean(xs);
    let my = mean(ys);
    compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my))) / (n - 1) as f64
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    covariance(xs, ys) / (variance(xs) * variance(ys)).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`. Non-positive or non-finite
/// points are skipped; fewer than two usable points give NaN.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in &pts {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Sample autocorrelation at each lag, pooled over an ensemble of zero-mean
/// series of equal length: `c(k) / c(0)` with
/// `c(k) = sum_paths sum_i x_i x_{i+k} / (paths * (n - k))`.
/// The known zero mean is used instead of per-series means, which bias
/// short-lag estimates of long-memory series.
pub fn pooled_autocorrelation(series: &[Vec<f64>], lags: &[usize]) -> Vec<f64> {
    let n = series.first().map_or(0, Vec::len);
    assert!(
        series.iter().all(|s| s.len() == n),
        "series differ in length"
    );
    let cov = |k: usize| {
        let mut acc = CompensatedSum::new();
        for s in series {
            acc.add(s[..n - k].iter().zip(&s[k..]).map(|(a, b)| a * b).sum());
        }
        acc.value() / (series.len() * (n - k)) as f64
    };
    let c0 = cov(0);
    lags.iter()
        .map(|&k| if k < n { cov(k) / c0 } else { f64::NAN })
        .collect()
}

/// Number of consecutive pairs where the sequence fails to strictly decrease.
pub fn non_decreasing_steps(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| !(w[1] < w[0])).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = (8..=14).map(|k| (1u64 << k) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|n| 3.0 * n.powf(-0.4)).collect();
        assert!((log_log_slope(&xs, &ys) + 0.4).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_count() {
        assert_eq!(non_decreasing_steps(&[5.0, 4.0, 4.0, 3.0, 3.5]), 2);
        assert_eq!(non_decreasing_steps(&[1.0]), 0);
    }

    #[test]
    fn pooled_autocorrelation_of_alternating_series() {
        let a: Vec<f64> = (0..8)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let b: Vec<f64> = a.iter().map(|x| -2.0 * x).collect();
        let r = pooled_autocorrelation(&[a, b], &[0, 1, 2, 9]);
        assert_eq!(&r[..3], &[1.0, -1.0, 1.0]);
        assert!(r[3].is_nan());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
