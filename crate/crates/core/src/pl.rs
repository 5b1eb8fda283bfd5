//! Piecewise-linear functions and their exact expectations under a model.

use serde::{Deserialize, Serialize};

use crate::distmodel::DistributionModel;
use crate::error::{param, Result};

/// Continuous piecewise-linear function through `(nodes[i], values[i])`,
/// constant beyond the outer nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != values.len() {
            return param("piecewise-linear function needs matching, nonempty nodes and values");
        }
        if nodes.iter().chain(&values).any(|x| !x.is_finite()) {
            return param("piecewise-linear nodes and values must be finite");
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return param("piecewise-linear nodes must be strictly increasing");
        }
        Ok(Self { nodes, values })
    }

    /// `1` left of `left`, `0` right of `right`, linear in between.
    pub fn ramp(left: f64, right: f64) -> Result<Self> {
        Self::new(vec![left, right], vec![1.0, 0.0])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (xs, ys) = (&self.nodes, &self.values);
        let last = xs.len() - 1;
        if x <= xs[0] {
            return ys[0];
        }
        if x >= xs[last] {
            return ys[last];
        }
        let i = xs.partition_point(|&b| b <= x);
        let (a, b) = (xs[i - 1], xs[i]);
        ys[i - 1] + (ys[i] - ys[i - 1]) * ((x - a) / (b - a))
    }

    /// Largest absolute slope.
    pub fn lipschitz(&self) -> f64 {
        (1..self.nodes.len())
            .map(|i| ((self.values[i] - self.values[i - 1]) / (self.nodes[i] - self.nodes[i - 1])).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise `op(self, other)` on the union of nodes. Exact when `op` is
    /// affine in each argument.
    pub fn combine(&self, other: &PiecewiseLinear, op: impl Fn(f64, f64) -> f64) -> Self {
        let mut nodes: Vec<f64> = self.nodes.iter().chain(&other.nodes).copied().collect();
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let values = nodes.iter().map(|&x| op(self.eval(x), other.eval(x))).collect();
        Self { nodes, values }
    }

    /// `|f|`, with the zero crossings inserted as nodes.
    pub fn abs(&self) -> Self {
        let mut nodes = Vec::with_capacity(self.nodes.len() * 2);
        let mut values = Vec::with_capacity(self.nodes.len() * 2);
        for i in 0..self.nodes.len() {
            if i > 0 {
                let (y0, y1) = (self.values[i - 1], self.values[i]);
                if (y0 < 0.0 && y1 > 0.0) || (y0 > 0.0 && y1 < 0.0) {
                    let (x0, x1) = (self.nodes[i - 1], self.nodes[i]);
                    let z = x0 + (x1 - x0) * (y0 / (y0 - y1));
                    if z > x0 && z < x1 {
                        nodes.push(z);
                        values.push(0.0);
                    }
                }
            }
            nodes.push(self.nodes[i]);
            values.push(self.values[i].abs());
        }
        Self { nodes, values }
    }

    /// `E f(X)` for `X ~ F`, by parts on every linear piece:
    /// `∫_p^q f dF = f(q) F(q) − f(p) F(p) − slope ∫_p^q F(x) dx`.
    pub fn expectation(&self, model: &DistributionModel) -> f64 {
        let (xs, ys) = (&self.nodes, &self.values);
        let last = xs.len() - 1;
        let mut total = ys[0] * model.cdf(xs[0]);
        for i in 1..xs.len() {
            let (p, q) = (xs[i - 1], xs[i]);
            let slope = (ys[i] - ys[i - 1]) / (q - p);
            total += ys[i] * model.cdf(q) - ys[i - 1] * model.cdf(p) - slope * model.cdf_integral(p, q);
        }
        total + ys[last] * (1.0 - model.cdf(xs[last]))
    }
}
