use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{reference_for, replicate_map};
use crate::distmodel::DistributionModel;
use crate::error::{param, Result};
use crate::procgen::{Generator, ProcessSpec};
use crate::reduction::default_scan_range;
use crate::stats;

const WILSON_Z: f64 = 1.96;
const INTERIOR_GRID: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightnessRow {
    pub eps: f64,
    pub exceedances: usize,
    pub estimate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub process: String,
    pub n: usize,
    pub delta: f64,
    pub reps: usize,
    /// Largest acceptable exceedance probability.
    pub eta: f64,
    pub rows: Vec<TightnessRow>,
    pub median_increment: f64,
    pub pass: bool,
    pub seed: u64,
    #[serde(skip)]
    pub increments: Vec<f64>,
}

impl TightnessReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["eps", "exceedances", "estimate", "wilson_lo", "wilson_hi"])?;
        for r in &self.rows {
            w.write_record([
                crate::fmt_f64(r.eps),
                r.exceedances.to_string(),
                crate::fmt_f64(r.estimate),
                crate::fmt_f64(r.wilson_lo),
                crate::fmt_f64(r.wilson_hi),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sliding extremum over index windows whose ends only move right.
struct MonoDeque {
    idx: VecDeque<usize>,
    keep_max: bool,
}

impl MonoDeque {
    fn new(keep_max: bool) -> Self {
        Self {
            idx: VecDeque::new(),
            keep_max,
        }
    }

    fn push(&mut self, i: usize, vals: &[f64]) {
        while let Some(&b) = self.idx.back() {
            let dominated = if self.keep_max { vals[b] <= vals[i] } else { vals[b] >= vals[i] };
            if !dominated {
                break;
            }
            self.idx.pop_back();
        }
        self.idx.push_back(i);
    }

    fn evict_before(&mut self, lo: usize) {
        while self.idx.front().is_some_and(|&f| f < lo) {
            self.idx.pop_front();
        }
    }

    fn best(&self, vals: &[f64]) -> Option<f64> {
        self.idx.front().map(|&i| vals[i])
    }
}

/// `sup |U_n(t) − U_n(s)|` over closed windows `t − s ∈ [0, δ]`.
///
/// Window positions are cut at every sample and every sample minus `δ` (and
/// at knots for piecewise-linear models). Between cuts the samples inside the
/// window do not change and `U_n` is continuous and nonincreasing, so the
/// oscillation is a maximum of endpoint terms and of `√n (F(a+δ) − F(a) − k/n)`.
/// The last term is linear between cuts for piecewise-linear `F`; otherwise
/// it is maximized numerically, and only where its bound can beat the
/// running supremum.
pub fn sup_increment(values: &[f64], model: &DistributionModel, delta: f64) -> Result<f64> {
    if values.is_empty() {
        return param("sup_increment needs a nonempty sample");
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return param(format!("delta must be positive and finite, got {delta}"));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return param("sample contains non-finite values");
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let root_n = n.sqrt();
    let count_le = |t: f64| xs.partition_point(|&x| x <= t);
    let count_lt = |t: f64| xs.partition_point(|&x| x < t);
    let u_right = |t: f64| root_n * (count_le(t) as f64 / n - model.cdf(t));
    let u_left = |t: f64| root_n * (count_lt(t) as f64 / n - model.cdf(t));
    let right_vals: Vec<f64> = xs.iter().map(|&x| u_right(x)).collect();
    let left_vals: Vec<f64> = xs.iter().map(|&x| u_left(x)).collect();

    let (s_lo, s_hi) = default_scan_range(model)?;
    let lo = s_lo.min(xs[0]) - delta;
    let hi = s_hi.max(xs[xs.len() - 1]);
    // (window start, window end)
    let mut cuts: Vec<(f64, f64)> = vec![(lo, lo + delta), (hi, hi + delta)];
    let mut anchor = |p: f64| {
        cuts.push((p, p + delta));
        cuts.push((p - delta, p));
    };
    xs.iter().for_each(|&x| anchor(x));
    let piecewise_linear = model.is_piecewise_linear();
    if piecewise_linear {
        model.knots().into_iter().for_each(anchor);
    }
    cuts.retain(|c| c.0 >= lo && c.0 <= hi);
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
    cuts.dedup_by(|a, b| a.0 == b.0);

    let mut best: f64 = 0.0;
    let mut max_dq = MonoDeque::new(true);
    let mut min_dq = MonoDeque::new(false);
    let mut pushed = 0;
    for w in cuts.windows(2) {
        let ((a0, r0), (a1, r1)) = (w[0], w[1]);
        // endpoint terms valid at both ends
        best = best.max(u_right(a0) - u_right(r0)).max(u_left(a1) - u_left(r1));
        let mid = 0.5 * (a0 + a1);
        let (i_lo, i_hi) = (count_le(mid), count_lt(mid + delta));
        while pushed < i_hi {
            max_dq.push(pushed, &right_vals);
            min_dq.push(pushed, &left_vals);
            pushed += 1;
        }
        max_dq.evict_before(i_lo);
        min_dq.evict_before(i_lo);
        let top_a = u_right(a0);
        let bottom_b = u_left(r1);
        if let (Some(big), Some(small)) = (max_dq.best(&right_vals), min_dq.best(&left_vals)) {
            best = best.max(big - small).max(top_a - small).max(big - bottom_b);
        }
        if !piecewise_linear {
            let k = i_hi.saturating_sub(i_lo) as f64 / n;
            let bound = root_n * (model.cdf(r1) - model.cdf(a0) - k);
            if bound > best {
                best = best.max(root_n * (max_window_mass(model, a0, a1, delta) - k));
            }
        }
    }
    Ok(best)
}

/// `max F(a+δ) − F(a)` over `a ∈ [a0, a1]` by a grid plus golden-section
/// polish around the best grid point.
fn max_window_mass(model: &DistributionModel, a0: f64, a1: f64, delta: f64) -> f64 {
    let g = |a: f64| model.cdf(a + delta) - model.cdf(a);
    let step = (a1 - a0) / INTERIOR_GRID as f64;
    let (mut arg, mut top) = (a0, g(a0));
    for i in 1..=INTERIOR_GRID {
        let a = a0 + step * i as f64;
        let v = g(a);
        if v > top {
            (arg, top) = (a, v);
        }
    }
    let (mut l, mut r) = ((arg - step).max(a0), (arg + step).min(a1));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (c, d) = (r - ratio * (r - l), l + ratio * (r - l));
        if g(c) >= g(d) {
            r = d;
        } else {
            l = c;
        }
        if r - l <= f64::EPSILON * a1.abs().max(1.0) {
            break;
        }
    }
    top.max(g(0.5 * (l + r)))
}

/// Probability that the `δ`-modulus of `U_n` reaches each `ε`, with Wilson
/// bands. `pass` iff every estimate is at most `eta`.
pub fn tightness_probe(
    spec: &ProcessSpec,
    n: usize,
    delta: f64,
    eps: &[f64],
    reps: usize,
    eta: f64,
    seed: u64,
) -> Result<TightnessReport> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
        return param("eps list must be nonempty and positive");
    }
    if reps == 0 {
        return param("tightness_probe needs at least one replicate");
    }
    if !(0.0..=1.0).contains(&eta) {
        return param(format!("eta must lie in [0, 1], got {eta}"));
    }
    let generator = Generator::new(spec.clone())?;
    let model = reference_for(spec)?;
    let increments = replicate_map(reps, |r| sup_increment(&generator.generate(n, seed, r)?.values, &model, delta))?;
    let rows: Vec<TightnessRow> = eps
        .iter()
        .map(|&e| {
            let exceedances = increments.iter().filter(|&&v| v >= e).count();
            let (wilson_lo, wilson_hi) = stats::wilson_interval(exceedances, reps, WILSON_Z);
            TightnessRow {
                eps: e,
                exceedances,
                estimate: exceedances as f64 / reps as f64,
                wilson_lo,
                wilson_hi,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.estimate <= eta);
    Ok(TightnessReport {
        process: spec.name().into(),
        n,
        delta,
        reps,
        eta,
        rows,
        median_increment: stats::median(&increments),
        pass,
        seed,
        increments,
    })
}
