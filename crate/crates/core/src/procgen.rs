//! Stationary process generators with per-replicate deterministic streams.

mod gouezel;

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::distmodel::{DistributionModel, EmpiricalReference};
use crate::error::{param, Error, Result};
use crate::rng::{derive_seed, replicate_rng};

pub use gouezel::{gouezel_apply, gouezel_layout, IntervalLayout};

pub const DEFAULT_TRUNC_DEPTH: usize = 40;
pub const DEFAULT_NAR_BURN_IN: usize = 1000;
/// Number of i.i.d. draws behind an empirical reference marginal.
pub const REFERENCE_SAMPLE_SIZE: usize = 50_000;

/// Gouëzel coefficients `a_n = scale * n^(-exponent)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRule {
    pub scale: f64,
    pub exponent: f64,
}

impl CoefficientRule {
    pub fn coefficient(&self, n: usize) -> f64 {
        self.scale * (n as f64).powf(-self.exponent)
    }
}

impl Default for CoefficientRule {
    fn default() -> Self {
        Self {
            scale: 0.01,
            exponent: 3.0,
        }
    }
}

/// Autoregression function of the nonlinear AR model, `X_n = f(X_{n-1}) + Y_n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// `f(x) = ρ x`
    #[default]
    Linear,
    /// `f(x) = ρ sin x`
    Sine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessKind {
    IidUniform,
    /// `X_k = Σ_{i>=1} 2 e_{k-i} / 3^i` with fair bits `e`.
    CantorLinear,
    /// `X_k = scale Σ_{i>=0} θ^i e_{k-i}` with `e` uniform on `[0, 1]`.
    GeometricLinear { theta: f64, scale: f64 },
    /// `X_n = f(X_{n-1}) + Y_n` with `Y_n` uniform on `[0, 2 * noise_half_width]`.
    NonlinearAr {
        rho: f64,
        noise_half_width: f64,
        link: Link,
    },
    GouezelMap {
        n_branches: usize,
        rule: CoefficientRule,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProcessConfig", into = "ProcessConfig")]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub trunc_depth: usize,
    pub burn_in: usize,
}

impl ProcessSpec {
    /// Spec with the default truncation depth and burn-in for `kind`.
    pub fn new(kind: ProcessKind) -> Self {
        let burn_in = match kind {
            ProcessKind::NonlinearAr { .. } => DEFAULT_NAR_BURN_IN,
            _ => 0,
        };
        Self {
            kind,
            trunc_depth: DEFAULT_TRUNC_DEPTH,
            burn_in,
        }
    }

    pub fn iid_uniform() -> Self {
        Self::new(ProcessKind::IidUniform)
    }

    pub fn cantor() -> Self {
        Self::new(ProcessKind::CantorLinear)
    }

    pub fn geometric(theta: f64, scale: f64) -> Self {
        Self::new(ProcessKind::GeometricLinear { theta, scale })
    }

    pub fn nar(rho: f64, noise_half_width: f64, link: Link) -> Self {
        Self::new(ProcessKind::NonlinearAr {
            rho,
            noise_half_width,
            link,
        })
    }

    pub fn gouezel(n_branches: usize, rule: CoefficientRule) -> Self {
        Self::new(ProcessKind::GouezelMap { n_branches, rule })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProcessKind::IidUniform => "iid-uniform",
            ProcessKind::CantorLinear => "cantor",
            ProcessKind::GeometricLinear { .. } => "geometric",
            ProcessKind::NonlinearAr { .. } => "nar",
            ProcessKind::GouezelMap { .. } => "gouezel",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trunc_depth == 0 {
            return param("trunc_depth must be positive");
        }
        match self.kind {
            ProcessKind::IidUniform | ProcessKind::CantorLinear => Ok(()),
            ProcessKind::GeometricLinear { theta, scale } => {
                if !(theta > 0.0 && theta < 1.0) {
                    return param(format!("theta must lie in (0, 1), got {theta}"));
                }
                if !(scale.is_finite() && scale != 0.0) {
                    return param(format!("scale must be finite and nonzero, got {scale}"));
                }
                Ok(())
            }
            ProcessKind::NonlinearAr {
                rho,
                noise_half_width,
                ..
            } => {
                if !(rho > 0.0 && rho < 1.0) {
                    return param(format!("rho must lie in (0, 1), got {rho}"));
                }
                if !(noise_half_width.is_finite() && noise_half_width > 0.0) {
                    return param(format!(
                        "noise_half_width must be positive, got {noise_half_width}"
                    ));
                }
                Ok(())
            }
            ProcessKind::GouezelMap { n_branches, rule } => {
                if n_branches == 0 {
                    return param("n_branches must be at least 1");
                }
                if !(rule.scale.is_finite() && rule.scale > 0.0) {
                    return param(format!("coefficient scale must be positive, got {}", rule.scale));
                }
                if !rule.exponent.is_finite() {
                    return param("coefficient exponent must be finite");
                }
                Ok(())
            }
        }
    }

    /// True for kinds with an explicit one-step Markov transition.
    pub fn is_markov(&self) -> bool {
        matches!(
            self.kind,
            ProcessKind::NonlinearAr { .. } | ProcessKind::GeometricLinear { .. }
        )
    }
}

/// Flat JSON form of [`ProcessSpec`] used by configuration files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessConfig {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link: Option<Link>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_branches: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coef_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coef_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trunc_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
}

impl TryFrom<ProcessConfig> for ProcessSpec {
    type Error = Error;

    fn try_from(c: ProcessConfig) -> Result<Self> {
        let kind = match c.kind.as_str() {
            "iid-uniform" | "iid" | "uniform" => ProcessKind::IidUniform,
            "cantor" => ProcessKind::CantorLinear,
            "geometric" => ProcessKind::GeometricLinear {
                theta: c.theta.unwrap_or(0.5),
                scale: c.scale.unwrap_or(1.0),
            },
            "nar" => ProcessKind::NonlinearAr {
                rho: c.rho.unwrap_or(0.5),
                noise_half_width: c.noise_half_width.unwrap_or(0.25),
                link: c.link.unwrap_or_default(),
            },
            "gouezel" => {
                let d = CoefficientRule::default();
                ProcessKind::GouezelMap {
                    n_branches: c.n_branches.unwrap_or(4),
                    rule: CoefficientRule {
                        scale: c.coef_scale.unwrap_or(d.scale),
                        exponent: c.coef_exponent.unwrap_or(d.exponent),
                    },
                }
            }
            other => return param(format!("unknown process kind '{other}'")),
        };
        let mut spec = ProcessSpec::new(kind);
        if let Some(l) = c.trunc_depth {
            spec.trunc_depth = l;
        }
        if let Some(b) = c.burn_in {
            spec.burn_in = b;
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl From<ProcessSpec> for ProcessConfig {
    fn from(s: ProcessSpec) -> Self {
        let mut c = ProcessConfig {
            kind: s.name().to_string(),
            trunc_depth: Some(s.trunc_depth),
            burn_in: Some(s.burn_in),
            ..Default::default()
        };
        match s.kind {
            ProcessKind::IidUniform | ProcessKind::CantorLinear => {}
            ProcessKind::GeometricLinear { theta, scale } => {
                c.theta = Some(theta);
                c.scale = Some(scale);
            }
            ProcessKind::NonlinearAr {
                rho,
                noise_half_width,
                link,
            } => {
                c.rho = Some(rho);
                c.noise_half_width = Some(noise_half_width);
                c.link = Some(link);
            }
            ProcessKind::GouezelMap { n_branches, rule } => {
                c.n_branches = Some(n_branches);
                c.coef_scale = Some(rule.scale);
                c.coef_exponent = Some(rule.exponent);
            }
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessPath {
    pub values: Vec<f64>,
    pub spec: ProcessSpec,
    pub master_seed: u64,
    pub replicate_id: u64,
}

impl ProcessPath {
    /// Path not tied to a generator, e.g. user-supplied data.
    pub fn from_values(values: Vec<f64>, spec: ProcessSpec) -> Self {
        Self {
            values,
            spec,
            master_seed: 0,
            replicate_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Validated spec plus any precomputed state (the Gouëzel layout).
#[derive(Clone, Debug)]
pub struct Generator {
    spec: ProcessSpec,
    layout: Option<Arc<IntervalLayout>>,
}

impl Generator {
    pub fn new(spec: ProcessSpec) -> Result<Self> {
        spec.validate()?;
        let layout = match spec.kind {
            ProcessKind::GouezelMap { n_branches, rule } => {
                Some(Arc::new(gouezel_layout(rule, n_branches, None)?))
            }
            _ => None,
        };
        Ok(Self { spec, layout })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn layout(&self) -> Option<&IntervalLayout> {
        self.layout.as_deref()
    }

    pub fn generate(&self, n: usize, master_seed: u64, replicate_id: u64) -> Result<ProcessPath> {
        if n == 0 {
            return param("path length n must be at least 1");
        }
        let mut rng = replicate_rng(master_seed, replicate_id);
        let values = self.sample_with(n, &mut rng);
        Ok(ProcessPath {
            values,
            spec: self.spec.clone(),
            master_seed,
            replicate_id,
        })
    }

    /// Path of length `n` drawn from an arbitrary bit source.
    pub fn sample_with<R: RngCore>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        self.fill(n, rng, &mut out);
        out
    }

    /// Clears `out` and fills it with a path of length `n`.
    pub fn fill<R: RngCore>(&self, n: usize, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        let burn = self.spec.burn_in;
        match self.spec.kind {
            ProcessKind::IidUniform => {
                for _ in 0..burn {
                    rng.gen::<f64>();
                }
                out.extend((0..n).map(|_| rng.gen::<f64>()));
            }
            ProcessKind::CantorLinear => {
                let mut bits = BitSource::default();
                // state X_0 from the truncated expansion, then the exact
                // recursion X_k = (X_{k-1} + 2 e_{k-1}) / 3
                let mut x = 0.0;
                for _ in 0..self.spec.trunc_depth {
                    x = (x + 2.0 * bits.next(rng)) / 3.0;
                }
                for _ in 0..burn {
                    x = (x + 2.0 * bits.next(rng)) / 3.0;
                }
                for _ in 0..n {
                    x = (x + 2.0 * bits.next(rng)) / 3.0;
                    out.push(x);
                }
            }
            ProcessKind::GeometricLinear { theta, scale } => {
                let depth = geometric_depth(theta, self.spec.trunc_depth);
                let mut x = 0.0;
                for _ in 0..depth + burn {
                    x = theta * x + scale * rng.gen::<f64>();
                }
                for _ in 0..n {
                    x = theta * x + scale * rng.gen::<f64>();
                    out.push(x);
                }
            }
            ProcessKind::NonlinearAr { .. } => {
                let mut x = 0.0;
                for _ in 0..burn {
                    x = self.markov_step(x, rng);
                }
                for _ in 0..n {
                    x = self.markov_step(x, rng);
                    out.push(x);
                }
            }
            ProcessKind::GouezelMap { .. } => {
                let layout = self.layout.as_ref().expect("layout built in Generator::new");
                let mut x: f64 = rng.gen();
                for _ in 0..burn {
                    x = layout.apply_unchecked(x);
                }
                for _ in 0..n {
                    out.push(x);
                    x = layout.apply_unchecked(x);
                }
            }
        }
    }

    /// One transition of a Markov-representable process. Panics for other
    /// kinds; check [`ProcessSpec::is_markov`] first.
    pub fn markov_step<R: RngCore>(&self, x: f64, rng: &mut R) -> f64 {
        match self.spec.kind {
            ProcessKind::NonlinearAr {
                rho,
                noise_half_width,
                link,
            } => {
                let drift = match link {
                    Link::Linear => rho * x,
                    Link::Sine => rho * x.sin(),
                };
                drift + 2.0 * noise_half_width * rng.gen::<f64>()
            }
            ProcessKind::GeometricLinear { theta, scale } => theta * x + scale * rng.gen::<f64>(),
            _ => panic!("{} has no one-step transition", self.spec.name()),
        }
    }

    /// Number of transitions after which a chain started at 0 is within
    /// 1e-17 of a stationary coupling.
    fn coupling_steps(&self) -> usize {
        match self.spec.kind {
            ProcessKind::NonlinearAr {
                rho,
                noise_half_width,
                ..
            } => {
                let diam = (2.0 * noise_half_width / (1.0 - rho)).max(1.0);
                ((1e-17 / diam).ln() / rho.ln()).ceil() as usize
            }
            ProcessKind::GeometricLinear { theta, .. } => geometric_depth(theta, 0),
            _ => 0,
        }
    }
}

/// Moving-average depth with neglected tail below double precision.
fn geometric_depth(theta: f64, requested: usize) -> usize {
    let needed = ((2f64).powi(-60).ln() / theta.ln()).ceil() as usize;
    requested.max(needed)
}

#[derive(Default)]
struct BitSource {
    word: u64,
    left: u32,
}

impl BitSource {
    fn next<R: RngCore>(&mut self, rng: &mut R) -> f64 {
        if self.left == 0 {
            self.word = rng.next_u64();
            self.left = 64;
        }
        let bit = self.word & 1;
        self.word >>= 1;
        self.left -= 1;
        bit as f64
    }
}

pub fn generate(spec: &ProcessSpec, n: usize, master_seed: u64, replicate_id: u64) -> Result<ProcessPath> {
    Generator::new(spec.clone())?.generate(n, master_seed, replicate_id)
}

/// Marginal distribution of the stationary process.
///
/// Closed forms where known; otherwise an interpolated empirical reference
/// from [`REFERENCE_SAMPLE_SIZE`] independent stationary draws.
pub fn reference_cdf(spec: &ProcessSpec) -> Result<DistributionModel> {
    spec.validate()?;
    match spec.kind {
        ProcessKind::IidUniform | ProcessKind::GouezelMap { .. } => Ok(DistributionModel::Uniform01),
        ProcessKind::CantorLinear => Ok(DistributionModel::CantorCdf),
        ProcessKind::GeometricLinear { .. } | ProcessKind::NonlinearAr { .. } => {
            let sample = stationary_sample(spec, REFERENCE_SAMPLE_SIZE, derive_seed(0x7265_6663_6466, 0))?;
            Ok(DistributionModel::EmpiricalReference(EmpiricalReference::new(sample)?))
        }
    }
}

/// Independent draws from the stationary marginal of a Markov-representable
/// process, one coupled chain per draw.
pub fn stationary_sample(spec: &ProcessSpec, size: usize, seed: u64) -> Result<Vec<f64>> {
    let generator = Generator::new(spec.clone())?;
    if !spec.is_markov() {
        return Err(Error::Applicability(format!(
            "{} has no one-step transition",
            spec.name()
        )));
    }
    let steps = generator.coupling_steps();
    let mut rng = replicate_rng(seed, 0);
    Ok((0..size)
        .map(|_| {
            let mut x = 0.0;
            for _ in 0..steps {
                x = generator.markov_step(x, &mut rng);
            }
            x
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(u64);

    impl RngCore for Constant {
        fn next_u32(&mut self) -> u32 {
            self.0 as u32
        }
        fn next_u64(&mut self) -> u64 {
            self.0
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            dest.fill(self.0 as u8)
        }
        fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
            self.fill_bytes(dest);
            Ok(())
        }
    }

    #[test]
    fn cantor_bit_extremes() {
        let g = Generator::new(ProcessSpec::cantor()).unwrap();
        let ones = g.sample_with(200, &mut Constant(u64::MAX));
        assert!(ones.iter().all(|&x| x == 1.0), "{:?}", &ones[..3]);
        let zeros = g.sample_with(200, &mut Constant(0));
        assert!(zeros.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn generation_is_deterministic() {
        for spec in [
            ProcessSpec::iid_uniform(),
            ProcessSpec::cantor(),
            ProcessSpec::geometric(0.5, 1.0),
            ProcessSpec::nar(0.5, 0.25, Link::Linear),
        ] {
            let a = generate(&spec, 500, 42, 3).unwrap();
            let b = generate(&spec, 500, 42, 3).unwrap();
            let c = generate(&spec, 500, 42, 4).unwrap();
            assert_eq!(a, b);
            assert_ne!(a.values, c.values);
        }
    }

    #[test]
    fn nar_stays_in_fixed_point_set() {
        let spec = ProcessSpec::nar(0.5, 0.25, Link::Linear);
        let p = generate(&spec, 10_000, 1, 0).unwrap();
        assert!(p.values.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn cantor_values_in_unit_interval() {
        let p = generate(&ProcessSpec::cantor(), 10_000, 9, 0).unwrap();
        assert!(p.values.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(
            generate(&ProcessSpec::geometric(1.5, 1.0), 10, 0, 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            generate(&ProcessSpec::nar(0.5, 0.0, Link::Sine), 10, 0, 0),
            Err(Error::Parameter(_))
        ));
        assert!(generate(&ProcessSpec::iid_uniform(), 0, 0, 0).is_err());
        let heavy = ProcessSpec::gouezel(
            4,
            CoefficientRule {
                scale: 0.3,
                exponent: 3.0,
            },
        );
        assert!(matches!(generate(&heavy, 10, 0, 0), Err(Error::Constraint(_))));
    }

    #[test]
    fn reference_models() {
        assert_eq!(reference_cdf(&ProcessSpec::iid_uniform()).unwrap(), DistributionModel::Uniform01);
        assert_eq!(reference_cdf(&ProcessSpec::cantor()).unwrap(), DistributionModel::CantorCdf);
        assert_eq!(
            reference_cdf(&ProcessSpec::gouezel(4, CoefficientRule::default())).unwrap(),
            DistributionModel::Uniform01
        );
        let DistributionModel::EmpiricalReference(r) =
            reference_cdf(&ProcessSpec::nar(0.5, 0.25, Link::Linear)).unwrap()
        else {
            panic!("expected empirical reference");
        };
        assert_eq!(r.size(), REFERENCE_SAMPLE_SIZE);
        assert!(r.error_bound() < 0.01);
        // linear AR(1) with U[0, 0.5] noise has mean 0.25 / (1 - 0.5) = 0.5
        let mean = r.sample().iter().sum::<f64>() / r.size() as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn config_round_trip() {
        let json = r#"{"kind":"nar","rho":0.3,"noise_half_width":0.1,"link":"sine","burn_in":50}"#;
        let spec: ProcessSpec = serde_json::from_str(json).unwrap();
        assert_eq!(
            spec.kind,
            ProcessKind::NonlinearAr {
                rho: 0.3,
                noise_half_width: 0.1,
                link: Link::Sine
            }
        );
        assert_eq!(spec.burn_in, 50);
        let back: ProcessSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<ProcessSpec>(r#"{"kind":"walk"}"#).is_err());
    }
}
