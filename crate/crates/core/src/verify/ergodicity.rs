use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{replicate_map, LipschitzFn};
use crate::error::{param, Error, Result};
use crate::procgen::{stationary_sample, Generator, ProcessSpec};
use crate::rng::{derive_seed, replicate_rng};
use crate::stats::{self, NeumaierSum};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityOptions {
    pub grid_points: usize,
    /// Inner Monte Carlo paths per start.
    pub inner: usize,
    /// Deviations below this many standard errors are treated as noise.
    pub noise_multiple: f64,
}

impl Default for ErgodicityOptions {
    fn default() -> Self {
        Self {
            grid_points: 21,
            inner: 10_000,
            noise_multiple: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityRow {
    pub k: usize,
    /// `max_x |Q^k f(x) − Πf|` over the start grid.
    pub deviation: f64,
    pub std_error: f64,
    pub argmax_start: f64,
    pub used: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub process: String,
    pub f: String,
    pub starts: Vec<f64>,
    pub inner: usize,
    pub rows: Vec<ErgodicityRow>,
    /// `exp` of the OLS slope of `ln deviation` on `k` over the used rows.
    pub theta_hat: Option<f64>,
    pub degenerate: bool,
    pub seed: u64,
}

impl ErgodicityReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "deviation", "std_error", "argmax_start", "used"])?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                crate::fmt_f64(r.deviation),
                crate::fmt_f64(r.std_error),
                crate::fmt_f64(r.argmax_start),
                r.used.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Estimates the geometric decay rate of `Q^k f − Πf` by nested Monte Carlo.
///
/// Inner path `j` drives every start with the same innovations, and `Πf` is
/// estimated jointly from a stationary start `x0_j` under the same
/// innovations, so common noise cancels in the differences.
pub fn ergodicity_probe(
    spec: &ProcessSpec,
    f: &LipschitzFn,
    ks: &[usize],
    options: &ErgodicityOptions,
    seed: u64,
) -> Result<ErgodicityReport> {
    if !spec.is_markov() {
        return Err(Error::Applicability(format!(
            "{} is not Markov-representable; ergodicity probe needs a one-step transition",
            spec.name()
        )));
    }
    if ks.is_empty() || ks.contains(&0) {
        return param("k list must be nonempty with every k ≥ 1");
    }
    if options.grid_points < 2 || options.inner < 2 {
        return param("need at least two starts and two inner paths");
    }
    let generator = Generator::new(spec.clone())?;
    let stationary = stationary_sample(spec, options.inner, derive_seed(seed, 1))?;
    let (lo, hi) = stationary.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let g = options.grid_points;
    let starts: Vec<f64> = (0..g).map(|i| lo + (hi - lo) * i as f64 / (g - 1) as f64).collect();
    let k_max = *ks.iter().max().expect("nonempty");

    let noise_seed = derive_seed(seed, 2);
    // per inner path: differences f(X_k^x) − f(X_k^{x0}) for each start and k
    let diffs = replicate_map(options.inner, |j| {
        let base = replicate_rng(noise_seed, j);
        let mut rng = base.clone();
        let mut x0 = stationary[j as usize];
        let mut reference = Vec::with_capacity(k_max);
        for _ in 0..k_max {
            x0 = generator.markov_step(x0, &mut rng);
            reference.push(f.eval(x0));
        }
        let mut out = Vec::with_capacity(g * ks.len());
        for &start in &starts {
            let mut rng = base.clone();
            let mut x = start;
            let mut trajectory = Vec::with_capacity(k_max);
            for _ in 0..k_max {
                x = generator.markov_step(x, &mut rng);
                trajectory.push(f.eval(x));
            }
            out.extend(ks.iter().map(|&k| trajectory[k - 1] - reference[k - 1]));
        }
        Ok(out)
    })?;

    let inner = options.inner as f64;
    let mut rows = Vec::with_capacity(ks.len());
    for (ki, &k) in ks.iter().enumerate() {
        let mut best = (0.0, 0.0, starts[0]);
        for (si, &start) in starts.iter().enumerate() {
            let slot = si * ks.len() + ki;
            let mut s = NeumaierSum::default();
            diffs.iter().for_each(|d| s.add(d[slot]));
            let mean = s.value() / inner;
            if mean.abs() > best.0 {
                let var = stats::compensated_sum(diffs.iter().map(|d| (d[slot] - mean).powi(2))) / (inner - 1.0);
                best = (mean.abs(), (var / inner).sqrt(), start);
            }
        }
        rows.push(ErgodicityRow {
            k,
            deviation: best.0,
            std_error: best.1,
            argmax_start: best.2,
            used: best.0 > 0.0 && best.0 > options.noise_multiple * best.1,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.used).map(|r| (r.k as f64, r.deviation.ln())).unzip();
    let theta_hat = if f.is_constant() {
        None
    } else {
        stats::ols(&x, &y).map(|(slope, _)| slope.exp())
    };
    Ok(ErgodicityReport {
        process: spec.name().into(),
        f: f.label(),
        starts,
        inner: options.inner,
        rows,
        theta_hat,
        degenerate: theta_hat.is_none(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procgen::Link;

    fn probe(rho: f64) -> ErgodicityReport {
        let spec = ProcessSpec::nar(rho, 0.5, Link::Linear);
        let f = LipschitzFn::identity((-10.0, 10.0)).unwrap();
        let opts = ErgodicityOptions {
            inner: 2000,
            ..Default::default()
        };
        ergodicity_probe(&spec, &f, &(1..=8).collect::<Vec<_>>(), &opts, 17).unwrap()
    }

    #[test]
    fn linear_ar_rate() {
        let r = probe(0.5);
        let theta = r.theta_hat.unwrap();
        assert!((theta - 0.5).abs() < 0.05, "{theta}");
        assert!(probe(0.9).theta_hat.unwrap() > theta);
    }

    #[test]
    fn constant_is_degenerate() {
        let spec = ProcessSpec::nar(0.5, 0.5, Link::Linear);
        let f = LipschitzFn::constant(2.0, (-10.0, 10.0)).unwrap();
        let opts = ErgodicityOptions {
            inner: 100,
            ..Default::default()
        };
        let r = ergodicity_probe(&spec, &f, &[1, 2, 3], &opts, 1).unwrap();
        assert!(r.degenerate && r.theta_hat.is_none());
        assert!(r.rows.iter().all(|row| row.deviation == 0.0 && !row.used));
    }

    #[test]
    fn non_markov_rejected() {
        let f = LipschitzFn::identity((0.0, 1.0)).unwrap();
        let err = ergodicity_probe(&ProcessSpec::cantor(), &f, &[1], &ErgodicityOptions::default(), 1).unwrap_err();
        assert!(matches!(err, Error::Applicability(_)));
    }
}
