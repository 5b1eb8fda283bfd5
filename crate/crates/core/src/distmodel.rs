//! Marginal distribution functions, their generalized inverses and the
//! logarithmic modulus-of-continuity condition.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{param, Error, Result};

/// Hölder exponent of the Cantor function, `log 2 / log 3`.
pub const CANTOR_EXPONENT: f64 = std::f64::consts::LN_2 / 1.098_612_288_668_109_8;

/// A marginal distribution function `F(t) = P(X_0 <= t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DistributionModel {
    Uniform01,
    CantorCdf,
    Exponential { rate: f64 },
    StdNormal,
    EmpiricalReference(EmpiricalReference),
}

/// Continuous reference CDF estimated from an i.i.d. sample of the marginal.
///
/// The CDF is the piecewise-linear interpolation of the order statistics,
/// `F(x_(i)) = (i - 1) / (N - 1)`. It stays within `error_bound` of the true
/// marginal with probability at least 0.999 (DKW plus interpolation slack).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReference {
    sample: Vec<f64>,
    error_bound: f64,
    #[serde(skip)]
    prefix_area: Vec<f64>,
}

impl EmpiricalReference {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.len() < 2 {
            return param("empirical reference needs at least two observations");
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return param("empirical reference sample contains non-finite values");
        }
        sample.sort_by(f64::total_cmp);
        if sample[0] == sample[sample.len() - 1] {
            return param("empirical reference sample is constant");
        }
        let n = sample.len() as f64;
        let error_bound = ((2.0f64 / 1e-3).ln() / (2.0 * n)).sqrt() + 1.0 / (n - 1.0);
        let mut reference = Self {
            sample,
            error_bound,
            prefix_area: Vec::new(),
        };
        reference.rebuild_prefix();
        Ok(reference)
    }

    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    pub fn size(&self) -> usize {
        self.sample.len()
    }

    pub fn error_bound(&self) -> f64 {
        self.error_bound
    }

    fn knot_value(&self, i: usize) -> f64 {
        i as f64 / (self.sample.len() - 1) as f64
    }

    fn rebuild_prefix(&mut self) {
        let mut area = Vec::with_capacity(self.sample.len());
        let mut acc = 0.0;
        area.push(0.0);
        for i in 1..self.sample.len() {
            let width = self.sample[i] - self.sample[i - 1];
            acc += 0.5 * width * (self.knot_value(i - 1) + self.knot_value(i));
            area.push(acc);
        }
        self.prefix_area = area;
    }

    fn cdf(&self, t: f64) -> f64 {
        let xs = &self.sample;
        let last = xs.len() - 1;
        if t < xs[0] {
            return 0.0;
        }
        if t >= xs[last] {
            return 1.0;
        }
        // idx >= 1 is the number of knots <= t
        let idx = xs.partition_point(|&x| x <= t);
        let (a, b) = (xs[idx - 1], xs[idx]);
        let frac = (t - a) / (b - a);
        ((idx - 1) as f64 + frac) / last as f64
    }

    fn quantile(&self, u: f64) -> f64 {
        let xs = &self.sample;
        let last = xs.len() - 1;
        let pos = u * last as f64;
        let i = pos.floor() as usize;
        if i >= last {
            return xs[last];
        }
        let frac = pos - i as f64;
        xs[i] + frac * (xs[i + 1] - xs[i])
    }

    /// `∫_{x_(1)}^{t} F(x) dx` for `t` inside the sample range.
    fn area_to(&self, t: f64) -> f64 {
        let xs = &self.sample;
        let last = xs.len() - 1;
        if self.prefix_area.len() != xs.len() {
            // deserialized values skip the cache
            let mut clone = self.clone();
            clone.rebuild_prefix();
            return clone.area_to(t);
        }
        if t <= xs[0] {
            return 0.0;
        }
        if t >= xs[last] {
            return self.prefix_area[last] + (t - xs[last]);
        }
        let idx = xs.partition_point(|&x| x <= t);
        let a = xs[idx - 1];
        let fa = self.knot_value(idx - 1);
        self.prefix_area[idx - 1] + 0.5 * (t - a) * (fa + self.cdf(t))
    }

    fn max_window_increment(&self, delta: f64) -> f64 {
        // F is piecewise linear, so the widest rise over a window of width
        // delta starts or ends at a knot.
        let mut best: f64 = 0.0;
        for &x in &self.sample {
            best = best.max(self.cdf(x + delta) - self.cdf(x));
            best = best.max(self.cdf(x) - self.cdf(x - delta));
        }
        best.min(1.0)
    }
}

impl DistributionModel {
    pub fn exponential(rate: f64) -> Result<Self> {
        let model = DistributionModel::Exponential { rate };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionModel::Exponential { rate } if !(rate.is_finite() && *rate > 0.0) => {
                param(format!("exponential rate must be positive, got {rate}"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistributionModel::Uniform01 => "uniform01",
            DistributionModel::CantorCdf => "cantor",
            DistributionModel::Exponential { .. } => "exponential",
            DistributionModel::StdNormal => "std_normal",
            DistributionModel::EmpiricalReference(_) => "empirical_reference",
        }
    }

    /// Closed interval carrying all the mass. Ends may be infinite.
    pub fn support(&self) -> (f64, f64) {
        match self {
            DistributionModel::Uniform01 | DistributionModel::CantorCdf => (0.0, 1.0),
            DistributionModel::Exponential { .. } => (0.0, f64::INFINITY),
            DistributionModel::StdNormal => (f64::NEG_INFINITY, f64::INFINITY),
            DistributionModel::EmpiricalReference(r) => (r.sample[0], r.sample[r.sample.len() - 1]),
        }
    }

    /// True when `F` is piecewise linear; the knots are then exposed by
    /// [`DistributionModel::knots`].
    pub fn is_piecewise_linear(&self) -> bool {
        matches!(
            self,
            DistributionModel::Uniform01 | DistributionModel::EmpiricalReference(_)
        )
    }

    pub fn knots(&self) -> Vec<f64> {
        match self {
            DistributionModel::Uniform01 => vec![0.0, 1.0],
            DistributionModel::EmpiricalReference(r) => r.sample.clone(),
            _ => Vec::new(),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        match self {
            DistributionModel::Uniform01 => t.clamp(0.0, 1.0),
            DistributionModel::CantorCdf => cantor_cdf(t),
            DistributionModel::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
            DistributionModel::StdNormal => 0.5 * erfc(-t / std::f64::consts::SQRT_2),
            DistributionModel::EmpiricalReference(r) => r.cdf(t),
        }
    }

    /// Generalized inverse `sup{s in support : F(s) <= u}`.
    ///
    /// When no support point satisfies `F(s) <= u` the left support end is
    /// returned.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain(format!("quantile level {u} not in [0, 1]")));
        }
        let (lo, hi) = self.support();
        let q = match self {
            DistributionModel::Uniform01 => u,
            DistributionModel::Exponential { rate } => {
                if u == 1.0 {
                    f64::INFINITY
                } else {
                    -(-u).ln_1p() / rate
                }
            }
            DistributionModel::CantorCdf => {
                if u == 1.0 {
                    hi
                } else {
                    sup_bisect(|s| cantor_cdf(s), u, lo, hi)
                }
            }
            DistributionModel::StdNormal => {
                if u == 0.0 {
                    lo
                } else if u == 1.0 {
                    hi
                } else {
                    sup_bisect(|s| self.cdf(s), u, -40.0, 40.0)
                }
            }
            DistributionModel::EmpiricalReference(r) => r.quantile(u),
        };
        Ok(q)
    }

    /// `∫_a^b F(x) dx` for finite `a <= b`.
    pub fn cdf_integral(&self, a: f64, b: f64) -> f64 {
        debug_assert!(a.is_finite() && b.is_finite());
        if b == a {
            return 0.0;
        }
        if b < a {
            return -self.cdf_integral(b, a);
        }
        self.cdf_antiderivative(b) - self.cdf_antiderivative(a)
    }

    /// An antiderivative of `F`, normalized to vanish at the left support end
    /// when that end is finite.
    fn cdf_antiderivative(&self, x: f64) -> f64 {
        match self {
            DistributionModel::Uniform01 => {
                if x <= 0.0 {
                    0.0
                } else if x <= 1.0 {
                    0.5 * x * x
                } else {
                    0.5 + (x - 1.0)
                }
            }
            DistributionModel::CantorCdf => {
                if x <= 0.0 {
                    0.0
                } else if x <= 1.0 {
                    cantor_integral(x)
                } else {
                    0.5 + (x - 1.0)
                }
            }
            DistributionModel::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    // x - (1 - e^{-λx}) / λ
                    x + (-rate * x).exp_m1() / rate
                }
            }
            DistributionModel::StdNormal => {
                let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
                x * self.cdf(x) + density
            }
            DistributionModel::EmpiricalReference(r) => r.area_to(x),
        }
    }

    /// Modulus of continuity `ω_F(δ) = sup{|F(s) - F(t)| : |s - t| < δ}`.
    ///
    /// Exact for the closed forms except the Cantor function, where the
    /// Hölder bound `δ^{log 2 / log 3}` is returned.
    pub fn modulus(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        let w = match self {
            DistributionModel::Uniform01 => delta,
            DistributionModel::CantorCdf => delta.powf(CANTOR_EXPONENT),
            DistributionModel::Exponential { rate } => -(-rate * delta).exp_m1(),
            DistributionModel::StdNormal => 2.0 * self.cdf(0.5 * delta) - 1.0,
            DistributionModel::EmpiricalReference(r) => r.max_window_increment(delta),
        };
        w.min(1.0)
    }
}

/// Largest `s` in `[lo, hi]` with `cdf(s) <= u`, bisected to the floating
/// point resolution of the bracket.
fn sup_bisect(cdf: impl Fn(f64) -> f64, u: f64, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    if cdf(hi) <= u {
        return hi;
    }
    if cdf(lo) > u {
        return lo;
    }
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            return lo;
        }
        if cdf(mid) <= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Cantor function by scanning ternary digits of the argument.
///
/// Digits 0 and 2 emit binary 0 and 1; the first digit 1 emits a final
/// binary 1 and stops. Digits come from repeated floating-point tripling,
/// so `1.0 / 3.0` reads as ternary 0.1 and maps to exactly 1/2.
pub fn cantor_cdf(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let mut x = t;
    let mut bits: u64 = 0;
    for i in 0..64 {
        x *= 3.0;
        if x >= 2.0 {
            bits |= 1u64 << (63 - i);
            x -= 2.0;
        } else if x >= 1.0 {
            bits |= 1u64 << (63 - i);
            break;
        }
        if x == 0.0 {
            break;
        }
    }
    bits as f64 * (-64f64).exp2()
}

/// `∫_0^x c(s) ds` on `[0, 1]` through the self-similarity of the Cantor
/// function, resolved to depth 40.
pub fn cantor_integral(x: f64) -> f64 {
    let mut x = x.clamp(0.0, 1.0);
    let mut acc = 0.0;
    let mut weight = 1.0;
    for _ in 0..40 {
        if x <= 1.0 / 3.0 {
            weight /= 6.0;
            x *= 3.0;
        } else if x < 2.0 / 3.0 {
            return acc + weight * (1.0 / 12.0 + 0.5 * (x - 1.0 / 3.0));
        } else {
            acc += weight * (0.25 + 0.5 * (x - 2.0 / 3.0));
            weight /= 6.0;
            x = (3.0 * x - 2.0).clamp(0.0, 1.0);
        }
    }
    acc + weight * 0.5 * x
}

/// Outcome of checking `ω_F(δ) <= D |log δ|^{-γ}` on a grid of δ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub model: String,
    pub gamma: f64,
    pub grid: Vec<f64>,
    pub omega: Vec<f64>,
    pub d_required: Vec<f64>,
    pub minimal_d: f64,
    pub satisfied: bool,
}

impl ModulusReport {
    /// Columns `delta, omega, D_required`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["delta", "omega", "D_required"])?;
        for i in 0..self.grid.len() {
            w.write_record([
                crate::fmt_f64(self.grid[i]),
                crate::fmt_f64(self.omega[i]),
                crate::fmt_f64(self.d_required[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn log_modulus_report(model: &DistributionModel, gamma: f64, grid: &[f64]) -> Result<ModulusReport> {
    if grid.is_empty() {
        return param("modulus grid is empty");
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return param(format!("gamma must be positive, got {gamma}"));
    }
    if let Some(bad) = grid.iter().find(|d| !(**d > 0.0 && **d <= 0.5)) {
        return param(format!("delta {bad} outside (0, 1/2]"));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let omega: Vec<f64> = grid.iter().map(|&d| model.modulus(d)).collect();
    let d_required: Vec<f64> = grid
        .iter()
        .zip(&omega)
        .map(|(&d, &w)| w * d.ln().abs().powf(gamma))
        .collect();
    let minimal_d = d_required.iter().copied().fold(0.0, f64::max);
    Ok(ModulusReport {
        model: model.name().to_string(),
        gamma,
        grid,
        omega,
        d_required,
        minimal_d,
        satisfied: minimal_d.is_finite(),
    })
}
