//! Reduction of an arbitrary continuous marginal to a bounded one: 'bad'
//! intervals where `F` grows at least at unit rate, the 1-Lipschitz map `g`
//! and the transported empirical process `V_n` with `U_n(t) = V_n(g(t))`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distmodel::DistributionModel;
use crate::empproc::{ecdf_from_values, StepFunction};
use crate::error::{param, Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 100_000;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Mass neglected at each unbounded end of the default scan range.
pub const TAIL_MASS: f64 = 1e-12;
/// Largest `|F(y) − F(x) − (y − x)|` accepted for a reported interval.
pub const LEMMA_TOL: f64 = 1e-8;

/// Closed interval `[x, y]` with `F(y) − F(x) = y − x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadInterval {
    pub x: f64,
    pub y: f64,
    pub lemma_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadIntervalSet {
    pub intervals: Vec<BadInterval>,
    pub total_length: f64,
    pub refinement_tolerance: f64,
    pub scan_range: (f64, f64),
    pub grid_size: usize,
}

/// `[quantile(1e-12), quantile(1 − 1e-12)]` at unbounded ends, the support
/// end otherwise.
pub fn default_scan_range(model: &DistributionModel) -> Result<(f64, f64)> {
    let (lo, hi) = model.support();
    let a = if lo.is_finite() { lo } else { model.quantile(TAIL_MASS)? };
    let b = if hi.is_finite() { hi } else { model.quantile(1.0 - TAIL_MASS)? };
    Ok((a, b))
}

/// Maximal bad intervals of `F` inside `scan_range`.
///
/// With `h(t) = F(t) − t`, a grid point is covered when some `x <= t <= y`,
/// `x < y`, has `h(x) <= h(y)`. Covered runs become intervals whose
/// endpoints are bisected to `tol`.
pub fn find_bad_intervals(
    model: &DistributionModel,
    scan_range: Option<(f64, f64)>,
    grid_size: usize,
    tol: f64,
) -> Result<BadIntervalSet> {
    model.validate()?;
    let (a, b) = match scan_range {
        Some(r) => r,
        None => default_scan_range(model)?,
    };
    if !(a.is_finite() && b.is_finite() && a < b) {
        return param(format!("scan range [{a}, {b}] must be finite and nonempty"));
    }
    if grid_size < 2 {
        return param("grid size must be at least 2");
    }
    if !(tol > 0.0) {
        return param("tolerance must be positive");
    }
    let h = |t: f64| model.cdf(t) - t;
    let step = (b - a) / grid_size as f64;
    let grid: Vec<f64> = (0..=grid_size)
        .map(|i| if i == grid_size { b } else { a + i as f64 * step })
        .collect();
    let hs: Vec<f64> = grid.iter().map(|&t| h(t)).collect();
    let g = grid.len();
    let mut prefix_min = hs.clone();
    for i in 1..g {
        prefix_min[i] = prefix_min[i - 1].min(hs[i]);
    }
    let mut suffix_max = hs.clone();
    for i in (0..g - 1).rev() {
        suffix_max[i] = suffix_max[i + 1].max(hs[i]);
    }
    let covered: Vec<bool> = (0..g)
        .map(|i| (i > 0 && prefix_min[i - 1] <= suffix_max[i]) || (i + 1 < g && prefix_min[i] <= suffix_max[i + 1]))
        .collect();

    let mut runs = Vec::new();
    let mut i = 0;
    while i < g {
        if covered[i] {
            let start = i;
            while i + 1 < g && covered[i + 1] {
                i += 1;
            }
            runs.push((start, i));
        }
        i += 1;
    }
    for w in runs.windows(2) {
        if w[1].0 - w[0].1 <= 2 {
            return Err(Error::Resolution(format!(
                "components near {} and {} are within one grid cell",
                grid[w[0].1], grid[w[1].0]
            )));
        }
    }

    let mut intervals = Vec::with_capacity(runs.len());
    for (s, e) in runs {
        let x = if s == 0 {
            grid[0]
        } else {
            // smallest x in [t_{s-1}, t_s] with h(x) <= max_{y >= t_s} h(y)
            let level = suffix_max[s];
            bisect(grid[s - 1], grid[s], tol, |t| h(t) <= level)
        };
        let y = if e == g - 1 {
            grid[g - 1]
        } else {
            // largest y in [t_e, t_{e+1}] with h(y) >= min_{x <= t_e} h(x)
            let level = prefix_min[e];
            bisect(grid[e], grid[e + 1], tol, |t| h(t) < level)
        };
        let lemma_residual = (model.cdf(y) - model.cdf(x) - (y - x)).abs();
        if lemma_residual > LEMMA_TOL {
            return Err(Error::Consistency(format!(
                "covered component [{x}, {y}] has |F(y) - F(x) - (y - x)| = {lemma_residual:.3e}"
            )));
        }
        intervals.push(BadInterval { x, y, lemma_residual });
    }
    let total_length = intervals.iter().map(|iv| iv.y - iv.x).sum();
    Ok(BadIntervalSet {
        intervals,
        total_length,
        refinement_tolerance: tol,
        scan_range: (a, b),
        grid_size,
    })
}

/// First point of `[lo, hi]` where the monotone predicate turns true,
/// assuming it is false at `lo` and true at `hi`; bisected to width `tol`.
fn bisect(mut lo: f64, mut hi: f64, tol: f64, pred: impl Fn(f64) -> bool) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `g(t) = F(x_i) + t − x_i` on bad intervals, `F(t)` elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionMap {
    pub intervals: Vec<BadInterval>,
    pub model: DistributionModel,
}

pub fn build_reduction(model: &DistributionModel, bad: &BadIntervalSet) -> Result<ReductionMap> {
    let mut prev = f64::NEG_INFINITY;
    for iv in &bad.intervals {
        if !(iv.x <= iv.y) || iv.x < prev {
            return Err(Error::Consistency(format!(
                "intervals must be ordered and disjoint, got [{}, {}]",
                iv.x, iv.y
            )));
        }
        let r = (model.cdf(iv.y) - model.cdf(iv.x) - (iv.y - iv.x)).abs();
        if r > LEMMA_TOL.max(10.0 * bad.refinement_tolerance) {
            return Err(Error::Consistency(format!(
                "[{}, {}] violates F(y) - F(x) = y - x by {r:.3e}",
                iv.x, iv.y
            )));
        }
        prev = iv.y;
    }
    Ok(ReductionMap {
        intervals: bad.intervals.clone(),
        model: model.clone(),
    })
}

impl ReductionMap {
    fn interval_of(&self, t: f64) -> Option<&BadInterval> {
        let i = self.intervals.partition_point(|iv| iv.y < t);
        self.intervals.get(i).filter(|iv| iv.x <= t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.interval_of(t) {
            Some(iv) => self.model.cdf(iv.x) + (t - iv.x),
            None => self.model.cdf(t),
        }
    }

    /// `g⁻¹(u) = sup{s : g(s) <= u}`.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain(format!("{u} outside [0, 1]")));
        }
        let q = self.model.quantile(u)?;
        for iv in &self.intervals {
            let (ga, gb) = (self.model.cdf(iv.x), self.model.cdf(iv.x) + (iv.y - iv.x));
            if u >= ga && u < gb {
                return Ok(iv.x + (u - ga));
            }
        }
        Ok(q)
    }

    /// `G(u) = F(g⁻¹(u))`, the marginal of `Y = g(X)`.
    pub fn reduced_cdf(&self, u: f64) -> Result<f64> {
        if u < 0.0 {
            return Ok(0.0);
        }
        if u >= 1.0 {
            return Ok(1.0);
        }
        Ok(self.model.cdf(self.inverse(u)?))
    }

    /// Samples `(t, g(t))` over `range` with `points` rows.
    pub fn write_csv<W: Write>(&self, writer: W, range: (f64, f64), points: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "g"])?;
        for i in 0..points {
            let t = range.0 + (range.1 - range.0) * i as f64 / (points.max(2) - 1) as f64;
            w.write_record([crate::fmt_f64(t), crate::fmt_f64(self.eval(t))])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn reduce_path(map: &ReductionMap, values: &[f64]) -> Vec<f64> {
    values.iter().map(|&x| map.eval(x)).collect()
}

/// `max_t |U_n(t) − V_n(g(t))|` over `grid`, with `V_n` built from the
/// reduced values and `G`.
pub fn verify_transport(values: &[f64], map: &ReductionMap, grid: &[f64]) -> Result<f64> {
    let n = values.len();
    if n == 0 {
        return param("path is empty");
    }
    let root = (n as f64).sqrt();
    let fx: StepFunction = ecdf_from_values(values)?;
    let gy: StepFunction = ecdf_from_values(&reduce_path(map, values))?;
    let mut worst: f64 = 0.0;
    for &t in grid {
        let u = root * (fx.eval(t) - map.model.cdf(t));
        let s = map.eval(t);
        let v = root * (gy.eval(s) - map.reduced_cdf(s)?);
        worst = worst.max((u - v).abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusTransferRow {
    pub delta: f64,
    pub omega_g: f64,
    pub bound: f64,
}

/// Grid estimate of `ω_G(δ)` against `max(ω_F(δ), δ)`.
pub fn modulus_transfer(map: &ReductionMap, deltas: &[f64], grid_size: usize) -> Result<Vec<ModulusTransferRow>> {
    let us: Vec<f64> = (0..=grid_size).map(|i| i as f64 / grid_size as f64).collect();
    let gs = us.iter().map(|&u| map.reduced_cdf(u)).collect::<Result<Vec<_>>>()?;
    deltas
        .iter()
        .map(|&delta| {
            let width = ((delta * grid_size as f64).floor() as usize).min(grid_size);
            let omega_g = (0..=grid_size - width).map(|i| gs[i + width] - gs[i]).fold(0.0, f64::max);
            Ok(ModulusTransferRow {
                delta,
                omega_g,
                bound: map.model.modulus(delta).max(delta),
            })
        })
        .collect()
}
