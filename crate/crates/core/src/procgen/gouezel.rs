//! Gouëzel's interval map: countably many full branches `I_n` of length
//! `4 a_n` near the origin, each split into two halves mapped onto `[0, 1)`
//! with derivative oscillating like `1 + 2 cos²`, followed by `N` affine
//! pieces covering `[S, 1)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::CoefficientRule;
use crate::error::{Error, Result};

const TAIL_TARGET: f64 = 1e-12;
const LARGEST_BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalLayout {
    pub rule: CoefficientRule,
    pub n_branches: usize,
    pub cutoff: usize,
    /// `4 Σ_{n <= cutoff} a_n`
    pub bad_region_end: f64,
    /// Bound on the neglected `4 Σ_{n > cutoff} a_n`.
    pub tail_bound: f64,
    /// Left ends `L_n` of `I_n`, `n = 1..=cutoff`.
    starts: Vec<f64>,
    coefficients: Vec<f64>,
}

impl IntervalLayout {
    pub fn coefficient(&self, n: usize) -> f64 {
        self.coefficients[n - 1]
    }

    /// `I_n = [L_n, L_n + 4 a_n)`.
    pub fn branch_interval(&self, n: usize) -> (f64, f64) {
        let l = self.starts[n - 1];
        (l, l + 4.0 * self.coefficient(n))
    }

    /// `(I_n^(1), I_n^(2))`, each of length `2 a_n`.
    pub fn branch_halves(&self, n: usize) -> ((f64, f64), (f64, f64)) {
        let l = self.starts[n - 1];
        let a = self.coefficient(n);
        ((l, l + 2.0 * a), (l + 2.0 * a, l + 4.0 * a))
    }

    pub fn piece_width(&self) -> f64 {
        (1.0 - self.bad_region_end) / self.n_branches as f64
    }

    pub fn affine_pieces(&self) -> Vec<(f64, f64)> {
        let w = self.piece_width();
        let s = self.bad_region_end;
        (0..self.n_branches)
            .map(|i| {
                let right = if i + 1 == self.n_branches { 1.0 } else { s + (i + 1) as f64 * w };
                (s + i as f64 * w, right)
            })
            .collect()
    }

    /// `v_n(u) = L_n + a_n (2u + sin(4π n⁴ u) / (4π n⁴))`.
    pub fn lower_branch(&self, n: usize, u: f64) -> f64 {
        self.starts[n - 1] + self.coefficient(n) * (2.0 * u + wiggle(n, u))
    }

    /// `w_n(u) = L_n + 2 a_n + a_n (2u - sin(4π n⁴ u) / (4π n⁴))`.
    pub fn upper_branch(&self, n: usize, u: f64) -> f64 {
        let a = self.coefficient(n);
        self.starts[n - 1] + 2.0 * a + a * (2.0 * u - wiggle(n, u))
    }

    /// Forward map `T` for `x` already known to lie in `[0, 1)`.
    pub(crate) fn apply_unchecked(&self, x: f64) -> f64 {
        let s = self.bad_region_end;
        if x >= s {
            let w = self.piece_width();
            let i = (((x - s) / w) as usize).min(self.n_branches - 1);
            let left = s + i as f64 * w;
            let y = ((x - left) / w).clamp(0.0, LARGEST_BELOW_ONE);
            return y;
        }
        let idx = self.starts.partition_point(|&l| l <= x).max(1);
        let n = idx;
        let a = self.coefficient(n);
        let y = (x - self.starts[n - 1]) / a;
        let u = if y < 2.0 {
            invert_branch(n, y, 1.0)
        } else {
            invert_branch(n, y - 2.0, -1.0)
        };
        u.clamp(0.0, LARGEST_BELOW_ONE)
    }
}

fn frequency(n: usize) -> f64 {
    let nf = n as f64;
    4.0 * PI * nf * nf * nf * nf
}

fn wiggle(n: usize, u: f64) -> f64 {
    let w = frequency(n);
    if 1.0 / w < 1e-18 {
        0.0
    } else {
        (w * u).sin() / w
    }
}

/// Solves `2u + sign * sin(ω u) / ω = y` on `[0, 1]`. The left side has
/// derivative `2 + sign * cos(ω u)` in `[1, 3]`, so Newton steps are
/// safeguarded by the shrinking bracket.
fn invert_branch(n: usize, y: f64, sign: f64) -> f64 {
    let w = frequency(n);
    let y = y.clamp(0.0, 2.0);
    if 1.0 / w < 1e-18 {
        return 0.5 * y;
    }
    let f = |u: f64| 2.0 * u + sign * (w * u).sin() / w - y;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut u = 0.5 * y;
    for _ in 0..200 {
        let r = f(u);
        if r.abs() <= 1e-16 {
            return u;
        }
        if r < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let d = 2.0 + sign * (w * u).cos();
        let mut next = u - r / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == u || hi - lo <= f64::EPSILON * hi.max(1e-300) {
            return next;
        }
        u = next;
    }
    u
}

/// Builds the layout for `a_n = rule(n)` with `N = n_branches` affine pieces.
///
/// With `cutoff = None` the smallest cutoff whose integral tail bound
/// `4 scale c^{1-p} / (p - 1)` is below 1e-12 is used.
pub fn gouezel_layout(rule: CoefficientRule, n_branches: usize, cutoff: Option<usize>) -> Result<IntervalLayout> {
    if n_branches == 0 {
        return Err(Error::Parameter("n_branches must be at least 1".into()));
    }
    if !(rule.scale > 0.0 && rule.scale.is_finite()) {
        return Err(Error::Parameter(format!("coefficient scale must be positive, got {}", rule.scale)));
    }
    let p = rule.exponent;
    if !(p > 1.0) {
        return Err(Error::Constraint(format!(
            "coefficients n^-{p} are not summable, so 4 Σ a_n < 1 fails"
        )));
    }
    let tail = |c: usize| 4.0 * rule.scale * (c as f64).powf(1.0 - p) / (p - 1.0);
    let cutoff = match cutoff {
        Some(c) if c >= 1 => c,
        Some(_) => return Err(Error::Parameter("cutoff must be at least 1".into())),
        None => {
            let c = (4.0 * rule.scale / ((p - 1.0) * TAIL_TARGET)).powf(1.0 / (p - 1.0)).ceil();
            if !(c.is_finite() && c <= 5e7) {
                return Err(Error::Precision(format!(
                    "cutoff {c} needed for tail < {TAIL_TARGET} is too large"
                )));
            }
            let mut c = c.max(1.0) as usize;
            while tail(c) >= TAIL_TARGET {
                c += 1;
            }
            c
        }
    };
    let tail_bound = tail(cutoff);
    if tail_bound >= TAIL_TARGET {
        return Err(Error::Precision(format!(
            "tail bound {tail_bound:.3e} at cutoff {cutoff} exceeds {TAIL_TARGET}"
        )));
    }
    let coefficients: Vec<f64> = (1..=cutoff).map(|n| rule.coefficient(n)).collect();
    let mut starts = Vec::with_capacity(cutoff);
    // compensated running sum of 4 a_n
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &a in &coefficients {
        starts.push(sum);
        let y = 4.0 * a - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    if sum + tail_bound >= 1.0 {
        return Err(Error::Constraint(format!(
            "4 Σ a_n = {sum} is not below 1"
        )));
    }
    Ok(IntervalLayout {
        rule,
        n_branches,
        cutoff,
        bad_region_end: sum,
        tail_bound,
        starts,
        coefficients,
    })
}

/// `T(x)` for `x` in `[0, 1)`.
pub fn gouezel_apply(layout: &IntervalLayout, x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("{x} is outside [0, 1)")));
    }
    let y = layout.apply_unchecked(x);
    if !(0.0..1.0).contains(&y) {
        return Err(Error::Numeric(format!("branch inversion at {x} produced {y}")));
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_layout(n: usize) -> IntervalLayout {
        gouezel_layout(CoefficientRule::default(), n, None).unwrap()
    }

    #[test]
    fn layout_examples() {
        let l = default_layout(4);
        // ζ(3) / 25 with an independent partial sum plus integral tail
        let zeta3 = 1.202_056_903_159_594_3;
        assert!((l.bad_region_end - zeta3 / 25.0).abs() < 2e-12, "{}", l.bad_region_end);
        assert!((l.bad_region_end - 0.048_082_28).abs() < 1e-8);
        assert!(l.tail_bound < 1e-12);
        let ((a, b), (c, d)) = l.branch_halves(1);
        assert_eq!((a, b, c, d), (0.0, 0.02, 0.02, 0.04));
        assert_eq!(l.branch_interval(1), (0.0, 0.04));
        let single = default_layout(1);
        assert_eq!(single.affine_pieces(), vec![(single.bad_region_end, 1.0)]);
    }

    #[test]
    fn pieces_tile_unit_interval() {
        let l = default_layout(4);
        let mut total = 0.0;
        for n in 1..=l.cutoff {
            let (a, b) = l.branch_interval(n);
            total += b - a;
            if n < l.cutoff {
                assert!((l.branch_interval(n + 1).0 - b).abs() < 1e-12);
            }
        }
        let pieces = l.affine_pieces();
        for w in pieces.windows(2) {
            assert!((w[0].1 - w[1].0).abs() < 1e-12);
        }
        total += pieces.iter().map(|(a, b)| b - a).sum::<f64>();
        assert!(total + l.tail_bound >= 1.0 - 1e-9 && total <= 1.0 + 1e-12, "{total}");
    }

    #[test]
    fn apply_examples() {
        let l = default_layout(4);
        let mid = l.bad_region_end + 0.5 * l.piece_width();
        assert!((gouezel_apply(&l, mid).unwrap() - 0.5).abs() < 1e-12);
        assert!((l.lower_branch(1, 0.5) - 0.01).abs() < 1e-17);
        assert!((gouezel_apply(&l, 0.01).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(gouezel_apply(&l, 1.0), Err(Error::Domain(_))));
        assert!(matches!(gouezel_apply(&l, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn branches_strictly_increasing() {
        let l = default_layout(4);
        for n in [1, 2, 3, 7, 50] {
            let mut prev_v = f64::NEG_INFINITY;
            let mut prev_w = f64::NEG_INFINITY;
            for i in 0..=2000 {
                let u = i as f64 / 2000.0;
                let (v, w) = (l.lower_branch(n, u), l.upper_branch(n, u));
                assert!(v > prev_v && w > prev_w, "n={n} u={u}");
                prev_v = v;
                prev_w = w;
            }
        }
    }

    #[test]
    fn round_trip_through_branches() {
        let l = default_layout(4);
        for (i, n) in [1usize, 2, 3, 5, 10, 40, 1000, 20000].iter().enumerate() {
            // representing x = v_n(u) costs ulp(x) / a_n in u
            let a = l.coefficient(*n);
            let tol = 1e-9f64.max(4.0 * f64::EPSILON * 0.05 / a);
            for j in 0..50 {
                let u = ((j * 37 + i * 11) % 100) as f64 / 100.0 + 0.003;
                let x = l.lower_branch(*n, u);
                assert!((gouezel_apply(&l, x).unwrap() - u).abs() < tol, "n={n} u={u}");
                let x = l.upper_branch(*n, u);
                assert!((gouezel_apply(&l, x).unwrap() - u).abs() < tol, "n={n} u={u}");
            }
        }
    }

    #[test]
    fn constraint_and_precision_errors() {
        let r = CoefficientRule { scale: 0.01, exponent: 1.0 };
        assert!(matches!(gouezel_layout(r, 4, None), Err(Error::Constraint(_))));
        assert!(matches!(
            gouezel_layout(CoefficientRule::default(), 4, Some(100)),
            Err(Error::Precision(_))
        ));
    }
}
