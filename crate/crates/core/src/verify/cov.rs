use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{default_lag, replicate_map, LipschitzFn};
use crate::error::{param, Result};
use crate::procgen::{Generator, ProcessSpec};
use crate::stats::{self, NeumaierSum};

/// Function whose normalized partial sums enter the covariance kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFn {
    /// `1{x ≤ at}`; its normalized sums are `U_n(at)`.
    Indicator { at: f64 },
    Lipschitz(LipschitzFn),
}

impl TestFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TestFn::Indicator { at } => f64::from(u8::from(x <= *at)),
            TestFn::Lipschitz(f) => f.eval(x),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TestFn::Indicator { at } => format!("indicator({at})"),
            TestFn::Lipschitz(f) => f.label(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovEntry {
    pub a: String,
    pub b: String,
    /// Empirical covariance of the two normalized sums across replicates.
    pub empirical: f64,
    pub std_error: f64,
    /// `Σ_{|k|≤L}` of pooled cross-covariances.
    pub predicted: f64,
    /// Same series truncated at `⌊L/2⌋`.
    pub predicted_half_lag: f64,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovKernelReport {
    pub process: String,
    pub n: usize,
    pub reps: usize,
    pub lag: usize,
    pub functions: Vec<String>,
    /// Upper triangle `(i, j)`, `i ≤ j`, in row-major order.
    pub entries: Vec<CovEntry>,
    pub max_discrepancy: f64,
    pub max_lag_sensitivity: f64,
    pub seed: u64,
}

impl CovKernelReport {
    pub fn entry(&self, i: usize, j: usize) -> &CovEntry {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let m = self.functions.len();
        &self.entries[i * m - i * (i + 1) / 2 + j]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["a", "b", "empirical", "std_error", "predicted", "predicted_half_lag", "discrepancy"])?;
        for e in &self.entries {
            w.write_record([
                e.a.clone(),
                e.b.clone(),
                crate::fmt_f64(e.empirical),
                crate::fmt_f64(e.std_error),
                crate::fmt_f64(e.predicted),
                crate::fmt_f64(e.predicted_half_lag),
                crate::fmt_f64(e.discrepancy),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn cov_kernel(
    spec: &ProcessSpec,
    a: &TestFn,
    b: &TestFn,
    n: usize,
    reps: usize,
    lag: Option<usize>,
    seed: u64,
) -> Result<CovEntry> {
    let report = cov_kernel_grid(spec, &[a.clone(), b.clone()], n, reps, lag, seed)?;
    Ok(report.entry(0, 1).clone())
}

/// Covariances of `n^{-1/2} Σ (f_i(X_k) − E f_i)` for every pair of
/// functions, estimated twice: across replicates, and by the truncated
/// series of within-path cross-covariances.
pub fn cov_kernel_grid(
    spec: &ProcessSpec,
    fns: &[TestFn],
    n: usize,
    reps: usize,
    lag: Option<usize>,
    seed: u64,
) -> Result<CovKernelReport> {
    if fns.is_empty() {
        return param("cov_kernel needs at least one function");
    }
    if reps < 2 {
        return param("cov_kernel needs at least two replicates");
    }
    let lag = lag.unwrap_or_else(|| default_lag(n));
    if lag >= n {
        return param(format!("lag {lag} must be below n = {n}"));
    }
    let generator = Generator::new(spec.clone())?;
    let m = fns.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let evaluate = |r: u64| -> Result<Vec<Vec<f64>>> {
        let path = generator.generate(n, seed, r)?;
        Ok(fns.iter().map(|f| path.values.iter().map(|&x| f.eval(x)).collect()).collect())
    };

    // pass 1: partial sums per replicate, and pooled means
    let sums = replicate_map(reps, |r| {
        Ok(evaluate(r)?.iter().map(|ys| stats::compensated_sum(ys.iter().copied())).collect::<Vec<f64>>())
    })?;
    let means: Vec<f64> = (0..m)
        .map(|i| stats::compensated_sum(sums.iter().map(|s| s[i])) / (n * reps) as f64)
        .collect();

    // pass 2: cross-covariances at lags −L..=L around the pooled means
    let width = 2 * lag + 1;
    let cross = replicate_map(reps, |r| {
        let centered: Vec<Vec<f64>> = evaluate(r)?
            .into_iter()
            .zip(&means)
            .map(|(ys, mu)| ys.into_iter().map(|y| y - mu).collect())
            .collect();
        let mut out = Vec::with_capacity(pairs.len() * width);
        for &(i, j) in &pairs {
            let (u, v) = (&centered[i], &centered[j]);
            for k in 0..=lag {
                // Cov(f_i(X_0), f_j(X_k)), then Cov(f_i(X_k), f_j(X_0))
                let fwd: f64 = (0..n - k).map(|t| u[t] * v[t + k]).sum();
                out.push(fwd / n as f64);
                if k > 0 {
                    let bwd: f64 = (0..n - k).map(|t| u[t + k] * v[t]).sum();
                    out.push(bwd / n as f64);
                }
            }
        }
        Ok(out)
    })?;

    let root_n = (n as f64).sqrt();
    let z: Vec<Vec<f64>> = sums
        .iter()
        .map(|s| s.iter().zip(&means).map(|(s, mu)| (s - n as f64 * mu) / root_n).collect())
        .collect();
    let half = lag / 2;
    let mut entries = Vec::with_capacity(pairs.len());
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let zi: Vec<f64> = z.iter().map(|row| row[i]).collect();
        let zj: Vec<f64> = z.iter().map(|row| row[j]).collect();
        let (mi, mj) = (stats::mean(&zi), stats::mean(&zj));
        let products: Vec<f64> = zi.iter().zip(&zj).map(|(a, b)| (a - mi) * (b - mj)).collect();
        let empirical = stats::compensated_sum(products.iter().copied()) / (reps - 1) as f64;
        let std_error = (stats::variance(&products) / reps as f64).sqrt();

        // slot order inside a pair block: k = 0, then (+k, −k) for k ≥ 1
        let mut full = NeumaierSum::default();
        let mut short = NeumaierSum::default();
        for slot in 0..width {
            let k = (slot + 1) / 2;
            let mean_c = stats::compensated_sum(cross.iter().map(|c| c[p * width + slot])) / reps as f64;
            full.add(mean_c);
            if k <= half {
                short.add(mean_c);
            }
        }
        let predicted = full.value();
        entries.push(CovEntry {
            a: fns[i].label(),
            b: fns[j].label(),
            empirical,
            std_error,
            predicted,
            predicted_half_lag: short.value(),
            discrepancy: (empirical - predicted).abs(),
        });
    }
    let max_discrepancy = entries.iter().map(|e| e.discrepancy).fold(0.0, f64::max);
    let max_lag_sensitivity = entries
        .iter()
        .map(|e| (e.predicted - e.predicted_half_lag).abs())
        .fold(0.0, f64::max);
    Ok(CovKernelReport {
        process: spec.name().into(),
        n,
        reps,
        lag,
        functions: fns.iter().map(TestFn::label).collect(),
        entries,
        max_discrepancy,
        max_lag_sensitivity,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_bridge_pair() {
        let grid = [0.25, 0.75].map(|at| TestFn::Indicator { at });
        let r = cov_kernel_grid(&ProcessSpec::iid_uniform(), &grid, 512, 2000, None, 8).unwrap();
        assert!((r.entry(0, 0).empirical - 0.1875).abs() < 0.03);
        assert!((r.entry(1, 0).empirical - 0.0625).abs() < 0.03);
        // lag terms vanish for independent data
        assert!((r.entry(0, 1).predicted - 0.0625).abs() < 0.01, "{:?}", r.entry(0, 1));
        assert!(r.entries.iter().all(|e| e.std_error > 0.0));
    }

    #[test]
    fn entry_indexing() {
        let fns: Vec<TestFn> = (1..=3).map(|i| TestFn::Indicator { at: i as f64 / 4.0 }).collect();
        let r = cov_kernel_grid(&ProcessSpec::iid_uniform(), &fns, 64, 10, Some(2), 1).unwrap();
        assert_eq!(r.entries.len(), 6);
        assert_eq!(r.entry(2, 1).a, "indicator(0.5)");
        assert_eq!(r.entry(2, 1).b, "indicator(0.75)");
        assert_eq!(r.entry(2, 2).a, "indicator(0.75)");
    }
}
