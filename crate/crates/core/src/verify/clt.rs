use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{closed_form_mean, long_run_variance_of, reference_for, replicate_map, ks_statistic, KsReference, LipschitzFn};
use crate::error::{param, Result};
use crate::procgen::{Generator, ProcessSpec};
use crate::stats;

pub const DEFAULT_KS_THRESHOLD: f64 = 0.05;
const LOW_POWER_REPS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltOptions {
    pub threshold: f64,
    /// Bartlett lag; `⌊n^{1/3}⌋` when absent.
    pub lag: Option<usize>,
    /// Use this limit variance for the KS reference instead of the pooled
    /// estimate, e.g. a known analytic value.
    pub variance: Option<f64>,
}

impl Default for CltOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_KS_THRESHOLD,
            lag: None,
            variance: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub process: String,
    pub f: String,
    pub n: usize,
    pub reps: usize,
    pub lag: usize,
    pub mean: f64,
    /// "model" for a closed-form `E f(X_0)`, "pooled" otherwise.
    pub mean_source: String,
    /// Average over replicates of the per-path Bartlett estimate.
    pub sigma2_hat: f64,
    pub sigma2_std_error: f64,
    pub variance_used: f64,
    pub ks: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    pub degenerate: bool,
    pub warnings: Vec<String>,
    pub seed: u64,
    #[serde(skip)]
    pub normalized_sums: Vec<f64>,
    #[serde(skip)]
    pub replicate_lrvs: Vec<f64>,
}

impl CltReport {
    /// One row per replicate: normalized sum and its path's variance estimate.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["replicate", "normalized_sum", "lrv"])?;
        for (i, (z, v)) in self.normalized_sums.iter().zip(&self.replicate_lrvs).enumerate() {
            w.write_record([i.to_string(), crate::fmt_f64(*z), crate::fmt_f64(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Replicated `(1/√n) Σ (f(X_i) − E f)` compared with `N(0, σ̂²)`.
pub fn clt_check(
    spec: &ProcessSpec,
    f: &LipschitzFn,
    n: usize,
    reps: usize,
    options: &CltOptions,
    seed: u64,
) -> Result<CltReport> {
    if reps < 2 {
        return param("clt_check needs at least two replicates");
    }
    if !(options.threshold > 0.0 && options.threshold <= 1.0) {
        return param(format!("KS threshold must lie in (0, 1], got {}", options.threshold));
    }
    if let Some(v) = options.variance {
        if !(v > 0.0 && v.is_finite()) {
            return param(format!("variance override must be positive, got {v}"));
        }
    }
    let generator = Generator::new(spec.clone())?;
    let model = reference_for(spec)?;
    let lag = options.lag.unwrap_or_else(|| super::default_lag(n));
    let per_rep = replicate_map(reps, |r| {
        let path = generator.generate(n, seed, r)?;
        let ys: Vec<f64> = path.values.iter().map(|&x| f.eval(x)).collect();
        let lrv = long_run_variance_of(&ys, Some(lag))?;
        Ok((stats::compensated_sum(ys.iter().copied()), lrv.value))
    })?;

    let (mean, mean_source) = match closed_form_mean(f, &model) {
        Some(m) => (m, "model"),
        None => (
            stats::compensated_sum(per_rep.iter().map(|p| p.0)) / (n as f64 * reps as f64),
            "pooled",
        ),
    };
    let root_n = (n as f64).sqrt();
    let sums: Vec<f64> = per_rep.iter().map(|p| (p.0 - n as f64 * mean) / root_n).collect();
    let lrvs: Vec<f64> = per_rep.iter().map(|p| p.1).collect();
    let sigma2_hat = stats::mean(&lrvs).max(0.0);
    let sigma2_std_error = (stats::variance(&lrvs) / reps as f64).sqrt();

    let mut warnings = Vec::new();
    if reps < LOW_POWER_REPS {
        warnings.push(format!("only {reps} replicates; KS test has low power below {LOW_POWER_REPS}"));
    }
    let variance_used = options.variance.unwrap_or(sigma2_hat);
    let degenerate = f.is_constant() || variance_used == 0.0;
    let ks = if degenerate {
        warnings.push("limit variance is zero; no KS statistic computed".into());
        None
    } else {
        Some(ks_statistic(&sums, &KsReference::Normal { variance: variance_used })?)
    };
    let pass = ks.is_some_and(|d| d < options.threshold);
    Ok(CltReport {
        process: spec.name().into(),
        f: f.label(),
        n,
        reps,
        lag,
        mean,
        mean_source: mean_source.into(),
        sigma2_hat,
        sigma2_std_error,
        variance_used,
        ks,
        threshold: options.threshold,
        pass,
        degenerate,
        warnings,
        seed,
        normalized_sums: sums,
        replicate_lrvs: lrvs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmodel::DistributionModel;

    #[test]
    fn iid_uniform_passes() {
        let f = LipschitzFn::identity((0.0, 1.0)).unwrap();
        let r = clt_check(&ProcessSpec::iid_uniform(), &f, 1024, 2000, &CltOptions::default(), 3).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.mean_source, "model");
        assert!((r.sigma2_hat - 1.0 / 12.0).abs() < 0.005);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn constant_is_degenerate() {
        let f = LipschitzFn::constant(1.0, (0.0, 1.0)).unwrap();
        let r = clt_check(&ProcessSpec::iid_uniform(), &f, 64, 20, &CltOptions::default(), 1).unwrap();
        assert!(r.degenerate && r.ks.is_none() && !r.pass);
        assert_eq!(r.warnings.len(), 2);
    }

    #[test]
    fn empirical_reference_uses_pooled_mean() {
        let spec = ProcessSpec::nar(0.5, 0.5, crate::procgen::Link::Linear);
        let model = crate::procgen::reference_cdf(&spec).unwrap();
        assert!(matches!(model, DistributionModel::EmpiricalReference(_)));
        let f = LipschitzFn::identity(LipschitzFn::domain_for(&model).unwrap()).unwrap();
        // stationary mean of x = 0.5 x + U[0, 1] is 1, long-run variance
        // (1/12) / (1 − 0.5)² = 1/3; Bartlett at lag 8 is biased low by ≈ 0.05
        let opts = CltOptions {
            variance: Some(1.0 / 3.0),
            ..Default::default()
        };
        let r = clt_check(&spec, &f, 512, 1000, &opts, 9).unwrap();
        assert_eq!(r.mean_source, "pooled");
        assert!((r.mean - 1.0).abs() < 0.01, "{}", r.mean);
        assert!((r.sigma2_hat - 1.0 / 3.0).abs() < 0.07, "{}", r.sigma2_hat);
        assert!(r.pass, "{r:?}");
    }
}
