//! Lipschitz chaining approximation of the empirical process: quantile
//! partitions, ramp kernels, dyadic refinements, the smoothed process
//! `U_n^(m)` and the telescoping decomposition of `F_n − F_n^(m)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distmodel::DistributionModel;
use crate::empproc::{ecdf_from_values, StepFunction};
use crate::error::{param, Error, Result};
use crate::pl::PiecewiseLinear;
use crate::stats::NeumaierSum;

/// Consecutive quantile points closer than this are treated as coincident.
pub const MIN_GAP: f64 = 1e-12;

/// Tolerance for the pointwise kernel orderings and the sandwich bounds.
pub const ORDER_TOL: f64 = 1e-12;

/// `φ(u) = 1` for `u <= −1`, `−u` on `(−1, 0]`, `0` for `u > 0`.
pub fn phi(u: f64) -> f64 {
    if u <= -1.0 {
        1.0
    } else if u <= 0.0 {
        -u
    } else {
        0.0
    }
}

/// Lower approximations to indicators used along a chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    /// `φ_1 ≡ 0` and `ψ_0 ≡ 0` in the first cell.
    Zero,
    /// `φ((x − right) / (right − left))`: 1 up to `left`, 0 from `right`.
    Ramp { left: f64, right: f64 },
    /// `1_{(−∞, at]}`; only used to close the sandwich at a support end.
    Indicator { at: f64 },
}

impl Kernel {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Kernel::Zero => 0.0,
            Kernel::Ramp { left, right } => phi((x - right) / (right - left)),
            Kernel::Indicator { at } => {
                if x <= at {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `E k(X)`. A ramp's mean is the average of `F` over the ramp.
    pub fn mean(&self, model: &DistributionModel) -> f64 {
        match *self {
            Kernel::Zero => 0.0,
            Kernel::Ramp { left, right } => model.cdf_integral(left, right) / (right - left),
            Kernel::Indicator { at } => model.cdf(at),
        }
    }

    /// Lipschitz constant, infinite for indicators.
    pub fn slope(&self) -> f64 {
        match *self {
            Kernel::Zero => 0.0,
            Kernel::Ramp { left, right } => 1.0 / (right - left),
            Kernel::Indicator { .. } => f64::INFINITY,
        }
    }

    pub fn as_piecewise_linear(&self) -> Result<PiecewiseLinear> {
        match *self {
            Kernel::Zero => PiecewiseLinear::new(vec![0.0], vec![0.0]),
            Kernel::Ramp { left, right } => PiecewiseLinear::ramp(left, right),
            Kernel::Indicator { .. } => param("an indicator is not Lipschitz"),
        }
    }
}

/// Ramp from `left` to `right`, or a named error if it has no usable width.
fn ramp(left: f64, right: f64, what: impl FnOnce() -> String) -> Result<Kernel> {
    let width = right - left;
    if !(width.is_finite() && width >= MIN_GAP) {
        return Err(Error::DegeneratePartition(format!(
            "{}: ramp [{left}, {right}] has width {width}",
            what()
        )));
    }
    Ok(Kernel::Ramp { left, right })
}

/// Quantile partition `t_j = F⁻¹(j / m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub m: usize,
    pub h: f64,
    pub primed: Vec<f64>,
    pub points: Vec<f64>,
    pub model: DistributionModel,
}

/// Primed grid point `(a) / (m 2^k)`. Identical rationals at different
/// levels produce bitwise identical floats, which makes refinements nest.
fn primed_point(numerator: i64, m: usize, k: u32) -> f64 {
    numerator as f64 / (m as f64 * (k as f64).exp2())
}

fn clamped_quantile(model: &DistributionModel, u: f64) -> Result<f64> {
    let (lo, hi) = model.support();
    if u <= 0.0 {
        return Ok(if u < 0.0 { lo } else { model.quantile(0.0)? });
    }
    if u > 1.0 {
        return Ok(hi);
    }
    model.quantile(u)
}

pub fn build_partition(model: &DistributionModel, m: usize) -> Result<Partition> {
    model.validate()?;
    if m < 2 {
        return param(format!("partition needs m >= 2 cells, got {m}"));
    }
    let primed: Vec<f64> = (0..=m).map(|j| primed_point(j as i64, m, 0)).collect();
    let points = primed
        .iter()
        .map(|&u| clamped_quantile(model, u))
        .collect::<Result<Vec<f64>>>()?;
    for j in 1..=m {
        let gap = points[j] - points[j - 1];
        if gap < MIN_GAP {
            return Err(Error::DegeneratePartition(format!(
                "t_{} = {} and t_{j} = {} coincide",
                j - 1,
                points[j - 1],
                points[j]
            )));
        }
    }
    Ok(Partition {
        m,
        h: 1.0 / m as f64,
        primed,
        points,
        model: model.clone(),
    })
}

impl Partition {
    /// Cell `j` in `1..=m` with `t_{j−1} <= t < t_j`; `t_m` belongs to the
    /// last cell.
    pub fn cell_of(&self, t: f64) -> Result<usize> {
        let p = &self.points;
        if !(t >= p[0] && t <= p[self.m]) {
            return Err(Error::Domain(format!(
                "t = {t} outside [{}, {}]",
                p[0], p[self.m]
            )));
        }
        Ok(p[1..self.m].partition_point(|&b| b <= t) + 1)
    }

    /// `φ_j`, a ramp from `t_{j−2}` to `t_{j−1}`; `φ_1 ≡ 0`.
    pub fn cell_kernel(&self, j: usize) -> Result<Kernel> {
        if j == 0 || j > self.m {
            return param(format!("cell index {j} outside 1..={}", self.m));
        }
        if j == 1 {
            return Ok(Kernel::Zero);
        }
        ramp(self.points[j - 2], self.points[j - 1], || format!("phi_{j}"))
    }

    /// Refinement point `s_l^(k)` of cell `j` for `l` in `−1..=2^k+1`.
    pub fn refinement_point(&self, j: usize, k: u32, l: i64) -> Result<f64> {
        let numerator = (j as i64 - 1) * (1i64 << k) + l;
        clamped_quantile(&self.model, primed_point(numerator, self.m, k))
    }

    /// `ψ_l^(k)` of cell `j`, the ramp from `s_{l−1}^(k)` to `s_l^(k)`.
    pub fn chain_kernel(&self, j: usize, k: u32, l: i64) -> Result<Kernel> {
        if j == 1 && l == 0 {
            return Ok(Kernel::Zero);
        }
        let left = self.refinement_point(j, k, l - 1)?;
        let right = self.refinement_point(j, k, l)?;
        ramp(left, right, || format!("psi_{l}^({k}) in cell {j}"))
    }

    /// `max{l in 0..=2^k : s_l^(k) <= t}` for `t` in cell `j`, by bisection
    /// over the nondecreasing refinement points.
    pub fn chain_index(&self, j: usize, k: u32, t: f64) -> Result<i64> {
        self.check_in_cell(j, t)?;
        let (mut lo, mut hi) = (0i64, 1i64 << k);
        if self.refinement_point(j, k, hi)? <= t {
            return Ok(hi);
        }
        // invariant: s_lo <= t < s_hi
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.refinement_point(j, k, mid)? <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    fn check_in_cell(&self, j: usize, t: f64) -> Result<()> {
        if j == 0 || j > self.m {
            return param(format!("cell index {j} outside 1..={}", self.m));
        }
        let (a, b) = (self.points[j - 1], self.points[j]);
        let inside = t >= a && (t < b || (j == self.m && t == b));
        if !inside {
            return Err(Error::Domain(format!("t = {t} outside cell {j} = [{a}, {b})")));
        }
        Ok(())
    }

    pub fn refine_level(&self, j: usize, k: u32) -> Result<DyadicRefinement> {
        if j == 0 || j > self.m {
            return param(format!("cell index {j} outside 1..={}", self.m));
        }
        if k > 40 {
            return param(format!("refinement level {k} exceeds 40"));
        }
        let count = (1i64 << k) + 1;
        let primed = (-1..=count)
            .map(|l| primed_point((j as i64 - 1) * (1i64 << k) + l, self.m, k))
            .collect();
        let points = (-1..=count)
            .map(|l| self.refinement_point(j, k, l))
            .collect::<Result<Vec<f64>>>()?;
        Ok(DyadicRefinement {
            j,
            k,
            cell: (self.points[j - 1], self.points[j]),
            last_cell: j == self.m,
            primed,
            points,
        })
    }
}

/// Materialized level-`k` refinement of one cell; `points[l + 1]` holds
/// `s_l^(k)` for `l = −1..=2^k+1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicRefinement {
    pub j: usize,
    pub k: u32,
    pub cell: (f64, f64),
    pub last_cell: bool,
    pub primed: Vec<f64>,
    pub points: Vec<f64>,
}

impl DyadicRefinement {
    pub fn point(&self, l: i64) -> f64 {
        self.points[(l + 1) as usize]
    }

    pub fn chain_index(&self, t: f64) -> Result<i64> {
        let (a, b) = self.cell;
        if !(t >= a && (t < b || (self.last_cell && t == b))) {
            return Err(Error::Domain(format!(
                "t = {t} outside cell {} = [{a}, {b})",
                self.j
            )));
        }
        let top = 1i64 << self.k;
        // l = 0..=2^k sit at indices 1..=2^k+1
        let inner = &self.points[1..=(top as usize + 1)];
        Ok(inner.partition_point(|&s| s <= t) as i64 - 1)
    }
}

pub fn build_refinement(partition: &Partition, j: usize, k: u32) -> Result<DyadicRefinement> {
    partition.refine_level(j, k)
}

/// `F_n^(m)` and `U_n^(m)` for one path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedProcess {
    pub partition: Partition,
    pub n: usize,
    /// `(1/n) Σ φ_j(X_i)` for `j = 1..=m`.
    pub cell_values: Vec<f64>,
    /// `E φ_j(X_0)`.
    pub cell_means: Vec<f64>,
}

pub fn smoothed_process(values: &[f64], partition: &Partition) -> Result<SmoothedProcess> {
    if values.is_empty() {
        return param("path is empty");
    }
    let n = values.len();
    let mut cell_values = Vec::with_capacity(partition.m);
    let mut cell_means = Vec::with_capacity(partition.m);
    for j in 1..=partition.m {
        let kernel = partition.cell_kernel(j)?;
        let mut s = NeumaierSum::default();
        for &x in values {
            s.add(kernel.eval(x));
        }
        cell_values.push(s.value() / n as f64);
        cell_means.push(kernel.mean(&partition.model));
    }
    Ok(SmoothedProcess {
        partition: partition.clone(),
        n,
        cell_values,
        cell_means,
    })
}

impl SmoothedProcess {
    /// `F_n^(m)(t)`; zero left of `t_0`.
    pub fn fnm(&self, t: f64) -> f64 {
        self.fnm_step().eval(t)
    }

    fn step_with(&self, f: impl Fn(usize) -> f64) -> StepFunction {
        let p = &self.partition.points;
        let mut breakpoints = Vec::with_capacity(self.partition.m);
        let mut values = vec![0.0];
        for j in 1..=self.partition.m {
            if p[j - 1].is_finite() {
                breakpoints.push(p[j - 1]);
                values.push(f(j - 1));
            } else {
                values[0] = f(j - 1);
            }
        }
        StepFunction::new(breakpoints, values).expect("partition points increase")
    }

    pub fn fnm_step(&self) -> StepFunction {
        self.step_with(|i| self.cell_values[i])
    }

    /// `U_n^(m) = √n (F_n^(m) − F^(m))`, constant on each cell and extended
    /// past `t_m` with the last cell's value.
    pub fn unm_step(&self) -> StepFunction {
        let r = (self.n as f64).sqrt();
        self.step_with(|i| r * (self.cell_values[i] - self.cell_means[i]))
    }

    /// Number of cells `j >= 2` breaking
    /// `F_n(t_{j−2}) <= F_n^(m)(t) <= F_n(t_{j−1})`.
    pub fn sandwich_violations(&self, values: &[f64]) -> Result<usize> {
        let ecdf = ecdf_from_values(values)?;
        let p = &self.partition.points;
        Ok((2..=self.partition.m)
            .filter(|&j| {
                let v = self.cell_values[j - 1];
                v < ecdf.eval(p[j - 2]) - ORDER_TOL || v > ecdf.eval(p[j - 1]) + ORDER_TOL
            })
            .count())
    }
}

/// `K = 4 + ⌊log₂(√n h / ε)⌋`, adjusted so that
/// `ε/16 <= √n h / 2^K <= ε/8` holds in floating point.
pub fn choose_chain_depth(n: usize, h: f64, eps: f64) -> Result<u32> {
    if n == 0 || !(h > 0.0 && h.is_finite()) || !(eps > 0.0 && eps.is_finite()) {
        return param(format!("need n >= 1, h > 0, eps > 0 (got n={n}, h={h}, eps={eps})"));
    }
    let c = (n as f64).sqrt() * h;
    if !(c / eps >= 1.0) {
        return Err(Error::CoarsePartition(format!(
            "sqrt(n) h / eps = {} < 1; refine eps or enlarge n",
            c / eps
        )));
    }
    let mut k = 4 + (c / eps).log2().floor() as i32;
    let scaled = |k: i32| c * (-(k as f64)).exp2();
    while scaled(k) > eps / 8.0 {
        k += 1;
    }
    while scaled(k) < eps / 16.0 {
        k -= 1;
    }
    if k < 4 {
        return Err(Error::Numeric(format!("depth {k} below 4 for n={n}, h={h}, eps={eps}")));
    }
    Ok(k as u32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainLevel {
    pub k: u32,
    pub l: i64,
    pub kernel: Kernel,
    /// `(1/n) Σ_i (ψ^(k) − ψ^(k−1))(X_i)`
    pub term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainTerms {
    pub t: f64,
    pub cell: usize,
    pub depth: u32,
    pub levels: Vec<ChainLevel>,
    /// `(1/n) Σ_i (1_{X_i <= t} − ψ^(K)(X_i))`
    pub boundary: f64,
    /// `F_n(t) − F_n^(m)(t)`
    pub lhs: f64,
    pub residual: f64,
    /// Sample points where `φ_j <= ψ^(1) <= … <= ψ^(K) <= 1_{(−∞,t]} <= ψ_{l+2}^(K)` fails.
    pub monotone_violations: usize,
}

/// Upper kernel `ψ_{l+2}^(K)`, replaced by an indicator when its ramp has no
/// width (at the right support end).
fn upper_kernel(partition: &Partition, j: usize, k: u32, l: i64) -> Result<Kernel> {
    let top = (1i64 << k) + 1;
    let at = partition.refinement_point(j, k, (l + 1).min(top))?;
    if l + 2 > top {
        return Ok(Kernel::Indicator { at });
    }
    let right = partition.refinement_point(j, k, l + 2)?;
    let width = right - at;
    if width.is_finite() && width >= MIN_GAP {
        Ok(Kernel::Ramp { left: at, right })
    } else {
        Ok(Kernel::Indicator { at })
    }
}

pub fn chain_decomposition(values: &[f64], partition: &Partition, t: f64, depth: u32) -> Result<ChainTerms> {
    if values.is_empty() {
        return param("path is empty");
    }
    if depth == 0 {
        return param("chain depth must be at least 1");
    }
    let n = values.len() as f64;
    let j = partition.cell_of(t)?;
    let mut kernels = Vec::with_capacity(depth as usize + 1);
    let mut indices = Vec::with_capacity(depth as usize + 1);
    kernels.push(partition.cell_kernel(j)?);
    indices.push(0i64);
    for k in 1..=depth {
        let l = partition.chain_index(j, k, t)?;
        kernels.push(partition.chain_kernel(j, k, l)?);
        indices.push(l);
    }
    let upper = upper_kernel(partition, j, depth, indices[depth as usize])?;

    let mut level_sums = vec![NeumaierSum::default(); depth as usize];
    let mut boundary = NeumaierSum::default();
    let mut fn_t = NeumaierSum::default();
    let mut fnm_t = NeumaierSum::default();
    let mut monotone_violations = 0;
    let mut chain = vec![0.0; depth as usize + 1];
    for &x in values {
        for (slot, kernel) in chain.iter_mut().zip(&kernels) {
            *slot = kernel.eval(x);
        }
        for k in 1..=depth as usize {
            level_sums[k - 1].add(chain[k] - chain[k - 1]);
        }
        let ind = if x <= t { 1.0 } else { 0.0 };
        boundary.add(ind - chain[depth as usize]);
        fn_t.add(ind);
        fnm_t.add(chain[0]);
        let ordered = chain.windows(2).all(|w| w[0] <= w[1] + ORDER_TOL)
            && chain[depth as usize] <= ind + ORDER_TOL
            && ind <= upper.eval(x) + ORDER_TOL;
        if !ordered {
            monotone_violations += 1;
        }
    }
    let levels: Vec<ChainLevel> = (1..=depth)
        .map(|k| ChainLevel {
            k,
            l: indices[k as usize],
            kernel: kernels[k as usize],
            term: level_sums[k as usize - 1].value() / n,
        })
        .collect();
    let boundary = boundary.value() / n;
    let lhs = fn_t.value() / n - fnm_t.value() / n;
    let mut total = NeumaierSum::default();
    for level in &levels {
        total.add(level.term);
    }
    total.add(boundary);
    Ok(ChainTerms {
        t,
        cell: j,
        depth,
        levels,
        boundary,
        lhs,
        residual: (total.value() - lhs).abs(),
        monotone_violations,
    })
}

/// `E|ψ_l^(k)(X) − ψ_{⌊l/2⌋}^(k−1)(X)|`, computed exactly through the
/// piecewise-linear difference of the two kernels.
pub fn psi_difference_l1(partition: &Partition, j: usize, k: u32, l: i64) -> Result<f64> {
    if k == 0 {
        return param("level must be at least 1");
    }
    let fine = partition.chain_kernel(j, k, l)?.as_piecewise_linear()?;
    let coarse = partition.chain_kernel(j, k - 1, l.div_euclid(2))?.as_piecewise_linear()?;
    Ok(fine.combine(&coarse, |a, b| a - b).abs().expectation(&partition.model))
}

/// Shapes of the two summands bounding `P(sup |U_n − U_n^(m)| >= ε)`, with
/// the unknown universal constant set to 1:
/// `D^{α/γ} n^{α/(2γ)−1} ε^{−4−α/γ} (4 + log(√n h/ε))^9` and
/// `D^{β/γ} h^{1−β/γ} ε^{−4}`.
pub fn bound_shape(n: usize, h: f64, eps: f64, alpha: f64, beta: f64, gamma: f64, d: f64) -> Result<(f64, f64)> {
    if !(gamma > (alpha / 2.0).max(beta)) {
        return param(format!(
            "gamma = {gamma} must exceed max(alpha/2, beta) = {}",
            (alpha / 2.0).max(beta)
        ));
    }
    if n == 0 || !(h > 0.0) || !(eps > 0.0) || !(d > 0.0) || alpha < 0.0 || beta < 0.0 {
        return param("bound_shape needs n >= 1, h > 0, eps > 0, D > 0, alpha, beta >= 0");
    }
    let nf = n as f64;
    let log_term = 4.0 + (nf.sqrt() * h / eps).ln().max(0.0);
    let term1 = d.powf(alpha / gamma) * nf.powf(alpha / (2.0 * gamma) - 1.0) / eps.powf(4.0 + alpha / gamma)
        * log_term.powi(9);
    let term2 = d.powf(beta / gamma) * h.powf(1.0 - beta / gamma) / eps.powi(4);
    Ok((term1, term2))
}

/// Chain diagnostics over a set of evaluation points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    #[serde(rename = "K")]
    pub depth: u32,
    pub max_residual: f64,
    pub sup_deviation: f64,
    pub sandwich_violations: usize,
    pub monotone_violations: usize,
    #[serde(skip)]
    pub cases: Vec<ChainTerms>,
}

impl ChainReport {
    /// Columns `t, k, l, term, residual`; the boundary term is written with
    /// `k = K + 1` and `l` the upper index `l(K, t) + 2`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "k", "l", "term", "residual"])?;
        for case in &self.cases {
            for level in &case.levels {
                w.write_record([
                    crate::fmt_f64(case.t),
                    level.k.to_string(),
                    level.l.to_string(),
                    crate::fmt_f64(level.term),
                    crate::fmt_f64(case.residual),
                ])?;
            }
            let last = case.levels.last().map_or(0, |l| l.l);
            w.write_record([
                crate::fmt_f64(case.t),
                (case.depth + 1).to_string(),
                (last + 2).to_string(),
                crate::fmt_f64(case.boundary),
                crate::fmt_f64(case.residual),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the decomposition at every `t` in `ts` with `K` from
/// [`choose_chain_depth`], plus the smoothed-process diagnostics.
pub fn chain_report(values: &[f64], partition: &Partition, eps: f64, ts: &[f64]) -> Result<ChainReport> {
    let n = values.len();
    let depth = choose_chain_depth(n, partition.h, eps)?;
    let smoothed = smoothed_process(values, partition)?;
    let process = crate::empproc::EmpiricalProcess::from_values(values, partition.model.clone())?;
    let sup_deviation = crate::empproc::sup_distance(&process, &smoothed.unm_step());
    let sandwich_violations = smoothed.sandwich_violations(values)?;
    let cases = ts
        .iter()
        .map(|&t| chain_decomposition(values, partition, t, depth))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChainReport {
        n,
        m: partition.m,
        eps,
        depth,
        max_residual: cases.iter().map(|c| c.residual).fold(0.0, f64::max),
        sup_deviation,
        sandwich_violations,
        monotone_violations: cases.iter().map(|c| c.monotone_violations).sum(),
        cases,
    })
}
