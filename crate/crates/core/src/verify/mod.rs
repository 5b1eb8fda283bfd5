//! Monte Carlo checks of the standing assumptions (Lipschitz CLT, fourth
//! moment bound, geometric ergodicity) and of the limit-process claims
//! (covariance kernel, tightness).

mod clt;
mod cov;
mod ergodicity;
mod lipschitz;
mod moment4;
mod tightness;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distmodel::DistributionModel;
use crate::error::{param, Result};
use crate::procgen::{reference_cdf, Generator, ProcessSpec};
use crate::stats;

pub use clt::{clt_check, CltOptions, CltReport};
pub use cov::{cov_kernel, cov_kernel_grid, CovEntry, CovKernelReport, TestFn};
pub use ergodicity::{ergodicity_probe, ErgodicityOptions, ErgodicityReport};
pub use lipschitz::{FnDescriptor, LipschitzFn};
pub use moment4::{moment4_scan, Moment4Report, Moment4Row};
pub use tightness::{sup_increment, tightness_probe, TightnessReport};

/// Replicates `0..reps` mapped in parallel; results keep replicate order.
pub(crate) fn replicate_map<T: Send>(reps: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..reps as u64).into_par_iter().map(f).collect()
}

/// Exact mean of `f(X_0)` when the reference marginal has a closed form.
pub(crate) fn closed_form_mean(f: &LipschitzFn, model: &DistributionModel) -> Option<f64> {
    match model {
        DistributionModel::EmpiricalReference(_) => None,
        _ => Some(f.expectation(model)),
    }
}

pub(crate) fn reference_for(spec: &ProcessSpec) -> Result<DistributionModel> {
    reference_cdf(spec)
}

pub(crate) fn default_lag(n: usize) -> usize {
    (n as f64).cbrt().floor() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongRunVariance {
    pub value: f64,
    pub lag: usize,
    /// `f(X_i)` had no variation; `value` is 0.
    pub degenerate: bool,
}

/// Bartlett-tapered `γ̂_0 + 2 Σ_{k=1}^{L} (1 − k/(L+1)) γ̂_k`, clamped at 0.
pub fn long_run_variance_of(ys: &[f64], lag: Option<usize>) -> Result<LongRunVariance> {
    let n = ys.len();
    if n < 2 {
        return param("long-run variance needs at least two observations");
    }
    let lag = lag.unwrap_or_else(|| default_lag(n));
    if lag > n / 10 {
        return param(format!("lag {lag} exceeds n/10 = {}", n / 10));
    }
    let center = stats::mean(ys);
    let gamma0 = stats::autocovariance(ys, center, 0);
    if gamma0 == 0.0 {
        return Ok(LongRunVariance {
            value: 0.0,
            lag,
            degenerate: true,
        });
    }
    let mut value = gamma0;
    for k in 1..=lag {
        let w = 1.0 - k as f64 / (lag as f64 + 1.0);
        value += 2.0 * w * stats::autocovariance(ys, center, k);
    }
    Ok(LongRunVariance {
        value: value.max(0.0),
        lag,
        degenerate: false,
    })
}

/// Long-run variance of `f(X_i)` along one generated path.
pub fn long_run_variance(
    spec: &ProcessSpec,
    f: &LipschitzFn,
    n: usize,
    lag: Option<usize>,
    seed: u64,
) -> Result<LongRunVariance> {
    let path = Generator::new(spec.clone())?.generate(n, seed, 0)?;
    let ys: Vec<f64> = path.values.iter().map(|&x| f.eval(x)).collect();
    long_run_variance_of(&ys, lag)
}

/// Reference distribution for a KS distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KsReference {
    Model(DistributionModel),
    Normal { variance: f64 },
}

pub fn ks_statistic(sample: &[f64], reference: &KsReference) -> Result<f64> {
    match reference {
        KsReference::Model(m) => stats::ks_distance(sample, |t| m.cdf(t)),
        KsReference::Normal { variance } => {
            if !(*variance > 0.0) {
                return param(format!("normal reference needs positive variance, got {variance}"));
            }
            stats::ks_distance(sample, |t| stats::normal_cdf(t, *variance))
        }
    }
}
