use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{closed_form_mean, reference_for, replicate_map, LipschitzFn};
use crate::error::{param, Result};
use crate::procgen::{Generator, ProcessSpec};
use crate::rng::derive_seed;
use crate::stats::{self, NeumaierSum};

/// Largest log-log slope of the ratio series still read as "bounded".
pub const SLOPE_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moment4Row {
    pub n: usize,
    /// Monte Carlo `E(Σ f(X_i))⁴` for centered `f`.
    pub fourth_moment: f64,
    pub std_error: f64,
    pub denominator: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moment4Report {
    pub process: String,
    pub f: String,
    pub center: f64,
    pub center_source: String,
    pub alpha: f64,
    pub beta: f64,
    pub reps: usize,
    pub norm: f64,
    pub m_f: f64,
    pub l1_norm: f64,
    pub rows: Vec<Moment4Row>,
    pub max_ratio: f64,
    /// OLS slope of `ln ratio` on `ln n`; absent for a single `n`.
    pub log_log_slope: Option<f64>,
    pub slope_threshold: f64,
    pub bounded: bool,
    pub seed: u64,
}

impl Moment4Report {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "fourth_moment", "std_error", "denominator", "ratio"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                crate::fmt_f64(r.fourth_moment),
                crate::fmt_f64(r.std_error),
                crate::fmt_f64(r.denominator),
                crate::fmt_f64(r.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `m_f³ (n ‖f‖₁ log^α(1+‖f‖) + n² ‖f‖₁² log^β(1+‖f‖))`.
pub fn moment4_denominator(n: usize, m_f: f64, l1: f64, norm: f64, alpha: f64, beta: f64) -> f64 {
    let n = n as f64;
    let lg = norm.ln_1p();
    m_f.powi(3) * (n * l1 * lg.powf(alpha) + n * n * l1 * l1 * lg.powf(beta))
}

/// Fourth moments of partial sums of the centered `f` against the bound
/// shape with unknown constant. The verdict is a trend test on the ratio.
pub fn moment4_scan(
    spec: &ProcessSpec,
    f: &LipschitzFn,
    ns: &[usize],
    reps: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
) -> Result<Moment4Report> {
    if ns.is_empty() {
        return param("moment4_scan needs a nonempty list of n");
    }
    if ns.contains(&0) {
        return param("every n must be at least 1");
    }
    if reps < 2 {
        return param("moment4_scan needs at least two replicates");
    }
    if !(alpha >= 0.0 && beta >= 0.0) {
        return param(format!("alpha and beta must be nonnegative, got {alpha}, {beta}"));
    }
    let generator = Generator::new(spec.clone())?;
    let model = reference_for(spec)?;

    // one batch of partial sums per n, then a common center
    let mut batches = Vec::with_capacity(ns.len());
    for &n in ns {
        let sub_seed = derive_seed(seed, n as u64);
        let sums = replicate_map(reps, |r| {
            let path = generator.generate(n, sub_seed, r)?;
            Ok(stats::compensated_sum(path.values.iter().map(|&x| f.eval(x))))
        })?;
        batches.push(sums);
    }
    let (center, center_source) = match closed_form_mean(f, &model) {
        Some(m) => (m, "model"),
        None => {
            let mut total = NeumaierSum::default();
            let mut count = 0.0;
            for (sums, &n) in batches.iter().zip(ns) {
                sums.iter().for_each(|&s| total.add(s));
                count += (n * reps) as f64;
            }
            (total.value() / count, "pooled")
        }
    };
    let g = f.shifted(center)?;
    let (norm, m_f) = (g.norm(), g.m_f());
    let l1 = g.l1_norm(&model);

    let mut rows = Vec::with_capacity(ns.len());
    for (sums, &n) in batches.iter().zip(ns) {
        let fourth: Vec<f64> = sums.iter().map(|s| (s - n as f64 * center).powi(4)).collect();
        let m4 = stats::mean(&fourth);
        let std_error = (stats::variance(&fourth) / reps as f64).sqrt();
        let denominator = moment4_denominator(n, m_f, l1, norm, alpha, beta);
        rows.push(Moment4Row {
            n,
            fourth_moment: m4,
            std_error,
            denominator,
            ratio: m4 / denominator,
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let finite = rows.iter().all(|r| r.ratio.is_finite());
    let log_log_slope = if finite && rows.iter().all(|r| r.ratio > 0.0) {
        let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
        stats::ols(&x, &y).map(|(s, _)| s)
    } else {
        None
    };
    let bounded = finite && log_log_slope.map_or(true, |s| s <= SLOPE_THRESHOLD);
    Ok(Moment4Report {
        process: spec.name().into(),
        f: f.label(),
        center,
        center_source: center_source.into(),
        alpha,
        beta,
        reps,
        norm,
        m_f,
        l1_norm: l1,
        rows,
        max_ratio,
        log_log_slope,
        slope_threshold: SLOPE_THRESHOLD,
        bounded,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iid_fourth_moment_identity() {
        // n μ₄ + 3n(n−1) μ₂² for U − 1/2: μ₂ = 1/12, μ₄ = 1/80
        let f = LipschitzFn::identity((0.0, 1.0)).unwrap();
        let r = moment4_scan(&ProcessSpec::iid_uniform(), &f, &[2, 10], 50_000, 3.0, 2.0, 4).unwrap();
        for row in &r.rows {
            let n = row.n as f64;
            let exact = n / 80.0 + 3.0 * n * (n - 1.0) / 144.0;
            assert!((row.fourth_moment / exact - 1.0).abs() < 0.05, "{row:?}");
        }
        assert_eq!(r.center, 0.5);
    }

    #[test]
    fn single_term_ratio_is_finite() {
        let f = LipschitzFn::identity((0.0, 1.0)).unwrap();
        let r = moment4_scan(&ProcessSpec::cantor(), &f, &[1], 1000, 3.0, 2.0, 4).unwrap();
        assert!(r.rows[0].ratio.is_finite() && r.rows[0].ratio > 0.0);
        assert!(r.log_log_slope.is_none() && r.bounded);
    }

    #[test]
    fn rejects_bad_input() {
        let f = LipschitzFn::identity((0.0, 1.0)).unwrap();
        let spec = ProcessSpec::iid_uniform();
        assert!(moment4_scan(&spec, &f, &[], 10, 3.0, 2.0, 0).is_err());
        assert!(moment4_scan(&spec, &f, &[4], 10, -1.0, 2.0, 0).is_err());
    }

    #[test]
    fn denominator_shape() {
        let d = moment4_denominator(4, 1.0, 0.25, 1.5, 3.0, 2.0);
        let lg = 2.5f64.ln();
        assert!((d - (lg.powi(3) + lg.powi(2))).abs() < 1e-15);
    }
}
