//! Small statistical helpers shared by the verification routines.

use statrs::function::erf::erfc;

use crate::error::{param, Result};

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
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
    let mut s = NeumaierSum::default();
    for x in xs {
        s.add(x);
    }
    s.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Variance with divisor `len` (population form).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    compensated_sum(xs.iter().map(|x| (x - m) * (x - m))) / xs.len() as f64
}

/// Autocovariance at `lag` with divisor `len`, around `center`.
pub fn autocovariance(xs: &[f64], center: f64, lag: usize) -> f64 {
    let n = xs.len();
    if lag >= n {
        return 0.0;
    }
    compensated_sum((0..n - lag).map(|i| (xs[i] - center) * (xs[i + lag] - center))) / n as f64
}

pub fn normal_cdf(x: f64, variance: f64) -> f64 {
    0.5 * erfc(-x / (2.0 * variance).sqrt())
}

/// Two-sided Kolmogorov–Smirnov distance between the ECDF of `sample`
/// and a continuous CDF, checked at every jump from both sides.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return param("KS statistic needs a nonempty sample");
    }
    if sample.iter().any(|x| x.is_nan()) {
        return param("sample contains NaN");
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let below = i as f64 / n;
        while i < sorted.len() && sorted[i] == x {
            i += 1;
        }
        let at = i as f64 / n;
        let f = cdf(x);
        d = d.max((at - f).abs()).max((f - below).abs());
    }
    Ok(d)
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    if sxx == 0.0 {
        return None;
    }
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Median by sorting a copy; `NaN` for an empty slice.
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_examples() {
        let u = |x: f64| x.clamp(0.0, 1.0);
        assert_eq!(ks_distance(&[0.5], u).unwrap(), 0.5);
        assert_eq!(ks_distance(&[0.25, 0.75], u).unwrap(), 0.25);
        let q: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_distance(&q, u).unwrap() - 0.005).abs() < 1e-15);
        assert!(ks_distance(&[], u).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn wilson_contains_proportion() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && hi > 0.3);
        assert!((lo - 0.2189).abs() < 1e-3 && (hi - 0.3958).abs() < 1e-3);
        assert_eq!(wilson_interval(0, 100, 1.96).0, 0.0);
        assert_eq!(wilson_interval(100, 100, 1.96).1, 1.0);
    }

    #[test]
    fn ols_line() {
        let (s, c) = ols(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-15 && (c - 1.0).abs() < 1e-15);
    }
}
