use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use epl_core::distmodel::DistributionModel;
use epl_core::procgen::{reference_cdf, ProcessConfig, ProcessSpec};

const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(name = "epl", version, about = "Empirical processes of dependent sequences: simulation and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one path and compare its marginal with the reference CDF
    Simulate(RunArgs),
    /// Chaining decomposition and smoothed-process diagnostics on one path
    Chain(RunArgs),
    /// Reduction map, transport identity and modulus transfer
    Reduce(RunArgs),
    /// Lipschitz-function CLT over replicates
    VerifyClt(RunArgs),
    /// Fourth-moment bound trend over a list of n
    VerifyMoment4(RunArgs),
    /// Covariance kernel of the empirical process at given points
    VerifyCov(RunArgs),
    /// Exceedance probabilities of the δ-modulus of U_n
    VerifyTightness(RunArgs),
    /// Maximal intervals where F grows at unit rate or faster
    BadIntervals(RunArgs),
    /// Log-modulus condition, bound shapes and ergodicity rate
    Report(RunArgs),
}

impl Command {
    pub fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::Simulate(a) => ("simulate", a),
            Command::Chain(a) => ("chain", a),
            Command::Reduce(a) => ("reduce", a),
            Command::VerifyClt(a) => ("verify-clt", a),
            Command::VerifyMoment4(a) => ("verify-moment4", a),
            Command::VerifyCov(a) => ("verify-cov", a),
            Command::VerifyTightness(a) => ("verify-tightness", a),
            Command::BadIntervals(a) => ("bad-intervals", a),
            Command::Report(a) => ("report", a),
        }
    }
}

/// Every run parameter. A JSON config file supplies the same keys; flags
/// given on the command line win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunArgs {
    /// iid-uniform, cantor, geometric, nar or gouezel
    #[arg(long)]
    pub process: Option<String>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub noise_half_width: Option<f64>,
    /// linear or sine
    #[arg(long)]
    pub link: Option<String>,
    #[arg(long)]
    pub n_branches: Option<usize>,
    #[arg(long)]
    pub coef_scale: Option<f64>,
    #[arg(long)]
    pub coef_exponent: Option<f64>,
    #[arg(long)]
    pub trunc_depth: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,

    /// uniform, cantor, exp or normal; defaults to the process marginal
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub rate: Option<f64>,

    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// One value, or a comma-separated list for verify-tightness
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "one_or_many")]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed; falls back to EPL_SEED, then a fixed default
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Test function: identity, centered, constant:c, ramp:a,b or pl:x,y;...
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub lag: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Known limit variance for verify-clt
    #[arg(long)]
    pub variance: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Path lengths for verify-moment4
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Evaluation points t for chain and verify-cov
    #[arg(long, value_delimiter = ',')]
    pub points: Option<Vec<f64>>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Lags k for the ergodicity probe in report
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long)]
    pub inner: Option<usize>,
}

impl RunArgs {
    /// Overlays these flags on the config file, if one was given.
    pub fn resolve(&self) -> anyhow::Result<RunArgs> {
        let Some(path) = &self.config else {
            return Ok(self.clone());
        };
        let mut base = read_config(path)?;
        let flags = serde_json::to_value(self)?;
        if let (Value::Object(base_map), Value::Object(flag_map)) = (&mut base, flags) {
            for (k, v) in flag_map {
                if !v.is_null() {
                    base_map.insert(k, v);
                }
            }
        }
        let merged: RunArgs = serde_json::from_value(base).context("config file")?;
        Ok(merged)
    }

    pub fn seed(&self) -> anyhow::Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var("EPL_SEED") {
            Ok(v) => v.trim().parse().with_context(|| format!("EPL_SEED = '{v}' is not an unsigned integer")),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn process_spec(&self) -> anyhow::Result<ProcessSpec> {
        let link = match self.link.as_deref() {
            None => None,
            Some(s) => Some(serde_json::from_value(Value::String(s.to_string())).map_err(|_| {
                anyhow::anyhow!("unknown link '{s}', expected linear or sine")
            })?),
        };
        let config = ProcessConfig {
            kind: self.process.clone().unwrap_or_else(|| "iid-uniform".into()),
            theta: self.theta,
            scale: self.scale,
            rho: self.rho,
            noise_half_width: self.noise_half_width,
            link,
            n_branches: self.n_branches,
            coef_scale: self.coef_scale,
            coef_exponent: self.coef_exponent,
            trunc_depth: self.trunc_depth,
            burn_in: self.burn_in,
        };
        Ok(ProcessSpec::try_from(config)?)
    }

    /// `--model` if given, otherwise the marginal of the process.
    pub fn model(&self) -> anyhow::Result<DistributionModel> {
        match self.model.as_deref() {
            Some(name) => parse_model(name, self.rate),
            None => Ok(reference_cdf(&self.process_spec()?)?),
        }
    }

    pub fn single_eps(&self, default: f64) -> anyhow::Result<f64> {
        match self.eps.as_deref() {
            None => Ok(default),
            Some([e]) => Ok(*e),
            Some(list) => bail!("expected a single --eps value, got {}", list.len()),
        }
    }
}

fn read_config(path: &Path) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    if !value.is_object() {
        bail!("config {} must be a JSON object", path.display());
    }
    Ok(value)
}

pub fn parse_model(name: &str, rate: Option<f64>) -> anyhow::Result<DistributionModel> {
    Ok(match name {
        "uniform" | "uniform01" => DistributionModel::Uniform01,
        "cantor" => DistributionModel::CantorCdf,
        "exp" | "exponential" => DistributionModel::exponential(rate.unwrap_or(1.0))?,
        "normal" | "std-normal" => DistributionModel::StdNormal,
        other => bail!("unknown model '{other}', expected uniform, cantor, exp or normal"),
    })
}

/// Accepts `0.1` as well as `[0.1, 0.2]` in config files.
fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(Option::<OneOrMany>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}
