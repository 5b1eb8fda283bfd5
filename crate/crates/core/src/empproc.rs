//! Empirical distribution functions and empirical processes as exact
//! right-continuous step functions.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distmodel::DistributionModel;
use crate::error::{param, Result};
use crate::procgen::ProcessPath;

/// Right-continuous piecewise-constant function.
///
/// `values[0]` applies left of the first breakpoint and `values[i]` on
/// `[breakpoints[i - 1], breakpoints[i])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return param(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            ));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return param("breakpoints must be finite");
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return param("breakpoints must be strictly increasing");
        }
        Ok(Self { breakpoints, values })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            values: vec![value],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b <= t)]
    }

    /// `lim_{s ↑ t} f(s)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b < t)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise `op(self, other)` on the merged breakpoints.
    pub fn combine(&self, other: &StepFunction, op: impl Fn(f64, f64) -> f64) -> Self {
        let (a, b) = (&self.breakpoints, &other.breakpoints);
        let mut breakpoints = Vec::with_capacity(a.len() + b.len());
        let mut values = Vec::with_capacity(a.len() + b.len() + 1);
        values.push(op(self.values[0], other.values[0]));
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&y)) => x.min(y),
                (Some(&x), None) => x,
                (None, Some(&y)) => y,
                (None, None) => unreachable!(),
            };
            if a.get(i) == Some(&next) {
                i += 1;
            }
            if b.get(j) == Some(&next) {
                j += 1;
            }
            breakpoints.push(next);
            values.push(op(self.values[i], other.values[j]));
        }
        Self { breakpoints, values }
    }

    /// Drops breakpoints where the value does not change.
    pub fn simplify(&self) -> Self {
        let mut breakpoints = Vec::with_capacity(self.breakpoints.len());
        let mut values = vec![self.values[0]];
        for (i, &b) in self.breakpoints.iter().enumerate() {
            let v = self.values[i + 1];
            if v != *values.last().unwrap() {
                breakpoints.push(b);
                values.push(v);
            }
        }
        Self { breakpoints, values }
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Columns `breakpoint, value`; the first row carries the value left of
    /// all breakpoints at `-inf`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["breakpoint", "value"])?;
        w.write_record(["-inf".to_string(), crate::fmt_f64(self.values[0])])?;
        for (b, v) in self.breakpoints.iter().zip(&self.values[1..]) {
            w.write_record([crate::fmt_f64(*b), crate::fmt_f64(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// ECDF of raw values; ties share one breakpoint.
pub fn ecdf_from_values(values: &[f64]) -> Result<StepFunction> {
    if values.is_empty() {
        return param("cannot build an ECDF from an empty sample");
    }
    if values.iter().any(|x| x.is_nan()) {
        return param("sample contains NaN");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut breakpoints = Vec::with_capacity(sorted.len());
    let mut out = vec![0.0];
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        while i < sorted.len() && sorted[i] == x {
            i += 1;
        }
        breakpoints.push(x);
        out.push(i as f64 / n);
    }
    StepFunction::new(breakpoints, out)
}

pub fn ecdf_build(path: &ProcessPath) -> Result<StepFunction> {
    ecdf_from_values(&path.values)
}

/// `g(t) = step(t) + coeff * F(t)` for a continuous nondecreasing `F`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepPlusCdf {
    pub step: StepFunction,
    pub coeff: f64,
}

impl StepPlusCdf {
    pub fn eval(&self, model: &DistributionModel, t: f64) -> f64 {
        self.step.eval(t) + self.coeff * model.cdf(t)
    }

    /// Exact `sup_t |g(t)|`.
    ///
    /// On every constancy interval of the step part `g` is monotone in
    /// `F(t)`, so the supremum is reached at an interval end or as a limit
    /// there.
    pub fn sup_abs(&self, model: &DistributionModel) -> f64 {
        let b = self.step.breakpoints();
        let v = self.step.values();
        let mut f_left = 0.0;
        let mut best: f64 = 0.0;
        for i in 0..v.len() {
            let f_right = if i < b.len() { model.cdf(b[i]) } else { 1.0 };
            best = best
                .max((v[i] + self.coeff * f_left).abs())
                .max((v[i] + self.coeff * f_right).abs());
            f_left = f_right;
        }
        best
    }
}

/// `U_n(t) = √n (F_n(t) − F(t))`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalProcess {
    pub ecdf: StepFunction,
    pub model: DistributionModel,
    pub n: usize,
}

impl EmpiricalProcess {
    pub fn new(path: &ProcessPath, model: DistributionModel) -> Result<Self> {
        Self::from_values(&path.values, model)
    }

    pub fn from_values(values: &[f64], model: DistributionModel) -> Result<Self> {
        Ok(Self {
            ecdf: ecdf_from_values(values)?,
            model,
            n: values.len(),
        })
    }

    pub fn root_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.root_n() * (self.ecdf.eval(t) - self.model.cdf(t))
    }

    pub fn left_limit(&self, t: f64) -> f64 {
        self.root_n() * (self.ecdf.left_limit(t) - self.model.cdf(t))
    }

    /// `U_n` as step part plus a multiple of `F`.
    pub fn as_step_plus_cdf(&self) -> StepPlusCdf {
        let r = self.root_n();
        StepPlusCdf {
            step: self.ecdf.map(|v| r * v),
            coeff: -r,
        }
    }

    /// `sup_t |U_n(t)|`.
    pub fn sup_abs(&self) -> f64 {
        self.as_step_plus_cdf().sup_abs(&self.model)
    }
}

/// Exact `sup_t |U_n(t) − approx(t)|`.
pub fn sup_distance(process: &EmpiricalProcess, approx: &StepFunction) -> f64 {
    let own = process.as_step_plus_cdf();
    StepPlusCdf {
        step: own.step.combine(approx, |a, b| a - b),
        coeff: own.coeff,
    }
    .sup_abs(&process.model)
}

/// Exact `sup_t |U_n(t) − V_k(t)|` for two empirical processes over the
/// same model.
pub fn sup_distance_between(a: &EmpiricalProcess, b: &EmpiricalProcess) -> f64 {
    let (pa, pb) = (a.as_step_plus_cdf(), b.as_step_plus_cdf());
    StepPlusCdf {
        step: pa.step.combine(&pb.step, |x, y| x - y),
        coeff: pa.coeff - pb.coeff,
    }
    .sup_abs(&a.model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecdf_examples() {
        let f = ecdf_from_values(&[0.2, 0.8, 0.5]).unwrap();
        assert!((f.eval(0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.eval(0.8), 1.0);
        assert_eq!(f.eval(0.1), 0.0);
        let tie = ecdf_from_values(&[0.5, 0.5]).unwrap();
        assert_eq!(tie.breakpoints(), &[0.5]);
        assert_eq!(tie.values(), &[0.0, 1.0]);
        assert_eq!(tie.left_limit(0.5), 0.0);
        assert!(ecdf_from_values(&[]).is_err());
    }

    #[test]
    fn u_process_examples() {
        let m = DistributionModel::Uniform01;
        let half = EmpiricalProcess::from_values(&[0.1, 0.4, 0.6, 0.9], m.clone()).unwrap();
        assert_eq!(half.eval(0.5), 0.0);
        let three = EmpiricalProcess::from_values(&[0.1, 0.2, 0.4, 0.9], m.clone()).unwrap();
        assert!((three.eval(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(three.eval(-1.0), 0.0);
    }

    #[test]
    fn sup_distance_examples() {
        let m = DistributionModel::Uniform01;
        let p = EmpiricalProcess::from_values(&[0.5], m.clone()).unwrap();
        assert!((sup_distance(&p, &StepFunction::constant(0.0)) - 0.5).abs() < 1e-15);
        assert_eq!(sup_distance_between(&p, &p), 0.0);
        let shifted = sup_distance(&p, &StepFunction::constant(0.3));
        assert!((shifted - 0.5).abs() <= 0.3 + 1e-15);
    }

    #[test]
    fn combine_merges_breakpoints() {
        let a = StepFunction::new(vec![0.0, 1.0], vec![0.0, 1.0, 2.0]).unwrap();
        let b = StepFunction::new(vec![0.5, 1.0], vec![10.0, 20.0, 30.0]).unwrap();
        let c = a.combine(&b, |x, y| x + y);
        assert_eq!(c.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(c.values(), &[10.0, 11.0, 21.0, 32.0]);
        for t in [-1.0, 0.0, 0.2, 0.5, 0.7, 1.0, 3.0] {
            assert_eq!(c.eval(t), a.eval(t) + b.eval(t));
        }
    }

    #[test]
    fn csv_dump() {
        let f = ecdf_from_values(&[0.25, 0.75]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("breakpoint,value\n-inf,0.0000000000000000e0\n"));
    }
}
