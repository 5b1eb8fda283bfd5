use serde::{Deserialize, Serialize};

use crate::distmodel::DistributionModel;
use crate::error::{param, Result};
use crate::pl::PiecewiseLinear;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FnDescriptor {
    Identity,
    /// `x − center`
    Centered { center: f64 },
    Constant { value: f64 },
    /// `φ((x − right) / (right − left))`
    Ramp { left: f64, right: f64 },
    PiecewiseLinear { nodes: Vec<f64>, values: Vec<f64> },
}

/// Bounded Lipschitz test function on a closed domain.
///
/// Norms follow `‖f‖ = sup|f| + Lip(f)` and `m_f = max(1, sup|f|)`, with the
/// supremum taken over `domain`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzFn {
    pub descriptor: FnDescriptor,
    pub domain: (f64, f64),
}

impl LipschitzFn {
    pub fn new(descriptor: FnDescriptor, domain: (f64, f64)) -> Result<Self> {
        let (a, b) = domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return param(format!("domain [{a}, {b}] must be finite and nonempty"));
        }
        match &descriptor {
            FnDescriptor::Ramp { left, right } if !(left < right) => {
                return param(format!("ramp needs left < right, got [{left}, {right}]"))
            }
            FnDescriptor::PiecewiseLinear { nodes, values } => {
                PiecewiseLinear::new(nodes.clone(), values.clone())?;
            }
            _ => {}
        }
        Ok(Self { descriptor, domain })
    }

    pub fn identity(domain: (f64, f64)) -> Result<Self> {
        Self::new(FnDescriptor::Identity, domain)
    }

    pub fn constant(value: f64, domain: (f64, f64)) -> Result<Self> {
        Self::new(FnDescriptor::Constant { value }, domain)
    }

    /// Finite domain for functions of a process with marginal `model`:
    /// the support, or the central `1 − 2e-12` mass for unbounded ends.
    pub fn domain_for(model: &DistributionModel) -> Result<(f64, f64)> {
        crate::reduction::default_scan_range(model)
    }

    /// Parses `identity`, `centered`, `constant:c`, `ramp:a,b` or
    /// `pl:x1,y1;x2,y2;...`.
    pub fn parse(text: &str, model: &DistributionModel) -> Result<Self> {
        let domain = Self::domain_for(model)?;
        let (head, rest) = text.split_once(':').unwrap_or((text, ""));
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|v| v.trim().parse::<f64>().or_else(|_| param(format!("bad number '{v}' in '{text}'"))))
                .collect()
        };
        match head.trim() {
            "identity" | "id" => Self::identity(domain),
            "centered" => Self::identity(domain)?.centered(model),
            "constant" => {
                let v = nums(rest)?;
                if v.len() != 1 {
                    return param("constant needs one value");
                }
                Self::constant(v[0], domain)
            }
            "ramp" => {
                let v = nums(rest)?;
                if v.len() != 2 {
                    return param("ramp needs left,right");
                }
                Self::new(FnDescriptor::Ramp { left: v[0], right: v[1] }, domain)
            }
            "pl" => {
                let mut nodes = Vec::new();
                let mut values = Vec::new();
                for pair in rest.split(';') {
                    let v = nums(pair)?;
                    if v.len() != 2 {
                        return param(format!("piecewise-linear node '{pair}' needs x,y"));
                    }
                    nodes.push(v[0]);
                    values.push(v[1]);
                }
                Self::new(FnDescriptor::PiecewiseLinear { nodes, values }, domain)
            }
            other => param(format!("unknown test function '{other}'")),
        }
    }

    pub fn label(&self) -> String {
        match &self.descriptor {
            FnDescriptor::Identity => "identity".into(),
            FnDescriptor::Centered { center } => format!("centered({center})"),
            FnDescriptor::Constant { value } => format!("constant({value})"),
            FnDescriptor::Ramp { left, right } => format!("ramp({left},{right})"),
            FnDescriptor::PiecewiseLinear { nodes, .. } => format!("pl({} nodes)", nodes.len()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.descriptor {
            FnDescriptor::Identity => x,
            FnDescriptor::Centered { center } => x - center,
            FnDescriptor::Constant { value } => *value,
            FnDescriptor::Ramp { left, right } => crate::chaining::phi((x - right) / (right - left)),
            FnDescriptor::PiecewiseLinear { nodes, values } => {
                PiecewiseLinear::new(nodes.clone(), values.clone()).expect("validated").eval(x)
            }
        }
    }

    /// The function restricted to `domain` as a piecewise-linear function.
    pub fn on_domain(&self) -> PiecewiseLinear {
        let (a, b) = self.domain;
        let mut nodes = vec![a, b];
        match &self.descriptor {
            FnDescriptor::Ramp { left, right } => nodes.extend([*left, *right]),
            FnDescriptor::PiecewiseLinear { nodes: ns, .. } => nodes.extend(ns.iter().copied()),
            _ => {}
        }
        nodes.retain(|x| *x >= a && *x <= b);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let values = nodes.iter().map(|&x| self.eval(x)).collect();
        PiecewiseLinear::new(nodes, values).expect("sorted finite nodes")
    }

    pub fn is_constant(&self) -> bool {
        self.lip() == 0.0
    }

    pub fn lip(&self) -> f64 {
        self.on_domain().lipschitz()
    }

    pub fn sup_bound(&self) -> f64 {
        self.on_domain().sup_abs()
    }

    pub fn m_f(&self) -> f64 {
        self.sup_bound().max(1.0)
    }

    pub fn norm(&self) -> f64 {
        self.sup_bound() + self.lip()
    }

    /// `E f(X)` for `X ~ model`, assuming the model's mass lies in `domain`.
    pub fn expectation(&self, model: &DistributionModel) -> f64 {
        self.on_domain().expectation(model)
    }

    /// `E|f(X)|`.
    pub fn l1_norm(&self, model: &DistributionModel) -> f64 {
        self.on_domain().abs().expectation(model)
    }

    /// `f − E f(X)`.
    pub fn centered(&self, model: &DistributionModel) -> Result<Self> {
        self.shifted(self.expectation(model))
    }

    /// `f − c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let descriptor = match &self.descriptor {
            FnDescriptor::Identity => FnDescriptor::Centered { center: c },
            FnDescriptor::Centered { center } => FnDescriptor::Centered { center: center + c },
            FnDescriptor::Constant { value } => FnDescriptor::Constant { value: value - c },
            _ => {
                let pl = self.on_domain();
                FnDescriptor::PiecewiseLinear {
                    nodes: pl.nodes().to_vec(),
                    values: pl.values().iter().map(|v| v - c).collect(),
                }
            }
        };
        Self::new(descriptor, self.domain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_centered_identity() {
        let f = LipschitzFn::identity((0.0, 1.0)).unwrap().centered(&DistributionModel::Uniform01).unwrap();
        assert_eq!(f.descriptor, FnDescriptor::Centered { center: 0.5 });
        assert!((f.sup_bound() - 0.5).abs() < 1e-15);
        assert!((f.lip() - 1.0).abs() < 1e-15);
        assert_eq!(f.m_f(), 1.0);
        assert!((f.norm() - 1.5).abs() < 1e-15);
        assert!((f.l1_norm(&DistributionModel::Uniform01) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn parse_variants() {
        let m = DistributionModel::Uniform01;
        assert_eq!(LipschitzFn::parse("identity", &m).unwrap().descriptor, FnDescriptor::Identity);
        let r = LipschitzFn::parse("ramp:0.2,0.4", &m).unwrap();
        assert!((r.eval(0.3) - 0.5).abs() < 1e-15);
        assert!((r.lip() - 5.0).abs() < 1e-12);
        let p = LipschitzFn::parse("pl:0,0;0.5,1;1,0", &m).unwrap();
        assert_eq!(p.eval(0.25), 0.5);
        assert!(LipschitzFn::parse("constant:2", &m).unwrap().is_constant());
        assert!(LipschitzFn::parse("wave", &m).is_err());
    }

    #[test]
    fn slope_never_exceeds_lip_on_grid() {
        let m = DistributionModel::Uniform01;
        for text in ["identity", "centered", "ramp:0.1,0.35", "pl:0,0;0.3,0.9;0.6,-0.2;1,0.4"] {
            let f = LipschitzFn::parse(text, &m).unwrap();
            let lip = f.lip();
            for i in 0..1000 {
                let (x, y) = (i as f64 / 1000.0, (i + 1) as f64 / 1000.0);
                assert!((f.eval(y) - f.eval(x)).abs() <= lip * (y - x) + 1e-12);
                assert!(f.eval(x).abs() <= f.sup_bound() + 1e-15);
            }
        }
    }
}
