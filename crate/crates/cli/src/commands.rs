use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use epl_core::chaining::{bound_shape, build_partition, chain_report};
use epl_core::distmodel::{log_modulus_report, DistributionModel};
use epl_core::procgen::{generate, reference_cdf, ProcessConfig};
use epl_core::reduction::{
    build_reduction, default_scan_range, find_bad_intervals, modulus_transfer, verify_transport, DEFAULT_GRID_SIZE,
    DEFAULT_TOL,
};
use epl_core::rng::{derive_seed, replicate_rng};
use epl_core::stats;
use epl_core::verify::{
    clt_check, cov_kernel_grid, ergodicity_probe, ks_statistic, moment4_scan, tightness_probe, CltOptions,
    ErgodicityOptions, KsReference, LipschitzFn, TestFn,
};

use crate::args::RunArgs;

pub struct Outcome {
    pub summary: Value,
    pub csv: Vec<u8>,
    pub pass: bool,
}

/// Module that owns each command, used to prefix error messages.
pub fn owner(command: &str) -> &'static str {
    match command {
        "simulate" => "procgen",
        "chain" => "chaining",
        "reduce" | "bad-intervals" => "reduction",
        "report" => "distmodel",
        _ => "verify",
    }
}

pub fn run(command: &str, args: &RunArgs, seed: u64) -> Result<Outcome> {
    match command {
        "simulate" => simulate(args, seed),
        "chain" => chain(args, seed),
        "reduce" => reduce(args, seed),
        "verify-clt" => verify_clt(args, seed),
        "verify-moment4" => verify_moment4(args, seed),
        "verify-cov" => verify_cov(args, seed),
        "verify-tightness" => verify_tightness(args, seed),
        "bad-intervals" => bad_intervals(args),
        "report" => report(args, seed),
        other => bail!("unknown command '{other}'"),
    }
}

fn merged(report: &impl Serialize, extra: Value) -> Result<Value> {
    let mut v = serde_json::to_value(report)?;
    if let (Value::Object(map), Value::Object(more)) = (&mut v, extra) {
        map.extend(more);
    }
    Ok(v)
}

fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner().context("flushing csv")?)
}

fn test_function(args: &RunArgs, model: &DistributionModel) -> Result<LipschitzFn> {
    Ok(LipschitzFn::parse(args.f.as_deref().unwrap_or("identity"), model)?)
}

fn simulate(args: &RunArgs, seed: u64) -> Result<Outcome> {
    let spec = args.process_spec()?;
    let n = args.n.unwrap_or(1000);
    let path = generate(&spec, n, seed, 0)?;
    let model = reference_cdf(&spec)?;
    let ks = ks_statistic(&path.values, &KsReference::Model(model.clone()))?;
    let (lo, hi) = path.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let summary = json!({
        "process": ProcessConfig::from(spec),
        "n": n,
        "replicate": 0,
        "reference": model.name(),
        "mean": stats::mean(&path.values),
        "variance": stats::variance(&path.values),
        "min": lo,
        "max": hi,
        "ks_vs_reference": ks,
    });
    let csv = csv_rows(
        &["i", "x"],
        path.values.iter().enumerate().map(|(i, x)| vec![(i + 1).to_string(), epl_core::fmt_f64(*x)]),
    )?;
    Ok(Outcome { summary, csv, pass: true })
}

fn chain(args: &RunArgs, seed: u64) -> Result<Outcome> {
    let spec = args.process_spec()?;
    let model = args.model()?;
    let n = args.n.unwrap_or(1000);
    let m = args.m.unwrap_or(10);
    let eps = args.single_eps(0.1)?;
    let partition = build_partition(&model, m)?;
    let path = generate(&spec, n, seed, 0)?;
    let (a, b) = (partition.points[0], partition.points[m]);
    let ts: Vec<f64> = match &args.points {
        Some(ts) => ts.clone(),
        None => (0..=100)
            .map(|i| model.quantile(i as f64 / 100.0).map(|t| t.clamp(a, b)))
            .collect::<epl_core::Result<_>>()?,
    };
    let r = chain_report(&path.values, &partition, eps, &ts)?;
    let tolerance = 1e-12;
    let pass = r.max_residual < tolerance && r.sandwich_violations == 0 && r.monotone_violations == 0;
    let mut csv = Vec::new();
    r.write_csv(&mut csv)?;
    let summary = merged(
        &r,
        json!({"process": ProcessConfig::from(spec), "model": model.name(), "points": ts.len(), "residual_tolerance": tolerance}),
    )?;
    Ok(Outcome { summary, csv, pass })
}

fn bad_intervals(args: &RunArgs) -> Result<Outcome> {
    let model = args.model()?;
    let set = find_bad_intervals(
        &model,
        None,
        args.grid_size.unwrap_or(DEFAULT_GRID_SIZE),
        args.tol.unwrap_or(DEFAULT_TOL),
    )?;
    let csv = csv_rows(
        &["x", "y", "lemma_residual"],
        set.intervals.iter().map(|iv| {
            vec![epl_core::fmt_f64(iv.x), epl_core::fmt_f64(iv.y), epl_core::fmt_f64(iv.lemma_residual)]
        }),
    )?;
    let summary = merged(&set, json!({"model": model}))?;
    Ok(Outcome { summary, csv, pass: true })
}

fn reduce(args: &RunArgs, seed: u64) -> Result<Outcome> {
    let model = args.model()?;
    let n = args.n.unwrap_or(100);
    let set = find_bad_intervals(
        &model,
        None,
        args.grid_size.unwrap_or(DEFAULT_GRID_SIZE),
        args.tol.unwrap_or(DEFAULT_TOL),
    )?;
    let g = build_reduction(&model, &set)?;
    // i.i.d. draws from the model by inversion of a uniform path
    let uniform = generate(&epl_core::ProcessSpec::iid_uniform(), n, seed, 0)?;
    let xs = uniform
        .values
        .iter()
        .map(|&u| model.quantile(u))
        .collect::<epl_core::Result<Vec<f64>>>()?;
    let (lo, hi) = default_scan_range(&model)?;
    let grid: Vec<f64> = (0..1000).map(|i| lo + (hi - lo) * i as f64 / 999.0).collect();
    let transport_residual = verify_transport(&xs, &g, &grid)?;

    let mut rng = replicate_rng(derive_seed(seed, 1), 0);
    let span = hi - lo;
    let lipschitz_excess = (0..100_000)
        .map(|_| {
            use rand::Rng;
            let s = lo - 0.1 * span + 1.2 * span * rng.gen::<f64>();
            let t = lo - 0.1 * span + 1.2 * span * rng.gen::<f64>();
            (g.eval(s) - g.eval(t)).abs() - (s - t).abs()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let deltas = [1e-3, 1e-2, 0.05, 0.1, 0.25, 0.5];
    let transfer = modulus_transfer(&g, &deltas, 20_000)?;
    let transfer_ok = transfer.iter().all(|r| r.omega_g <= r.bound + 1e-9);
    let pass = transport_residual < 1e-10 && lipschitz_excess <= 1e-12 && transfer_ok;

    let mut csv = Vec::new();
    g.write_csv(&mut csv, (lo, hi), 1001)?;
    let summary = json!({
        "model": model,
        "intervals": set.intervals,
        "total_length": set.total_length,
        "n": n,
        "transport_residual": transport_residual,
        "transport_tolerance": 1e-10,
        "lipschitz_pairs": 100_000,
        "lipschitz_max_excess": lipschitz_excess,
        "modulus_transfer": transfer,
    });
    Ok(Outcome { summary, csv, pass })
}

fn verify_clt(args: &RunArgs, seed: u64) -> Result<Outcome> {
    let spec = args.process_spec()?;
    let model = reference_cdf(&spec)?;
    let f = test_function(args, &model)?;
    let options = CltOptions {
        threshold: args.threshold.unwrap_or(CltOptions::default().threshold),
        lag: args.lag,
        variance: args.variance,
    };
    let r = clt_check(&spec, &f, args.n.unwrap_or(4096), args.reps.unwrap_or(2000), &options, seed)?;
    let mut csv = Vec::new();
    r.write_csv(&mut csv)?;
    let pass = r.pass;
    Ok(Outcome { summary: serde_json::to_value(&r)?, csv, pass })
}

fn verify_moment4(args: &RunArgs, seed: u64) -> Result<Outcome> {
    let spec = args.process_spec()?;
    let model = reference_cdf(&spec)?;
    let f = test_function(args, &model)?;
    let ns = args.ns.clone().unwrap_or_else(|| (6..=12).map(|p| 1usize << p).collect());
    let r = moment4_scan(
        &spec,
        &f,
        &ns,
        args.reps.unwrap_or(2000),
        args.alpha.unwrap_or(3.0),
        args.beta.unwrap_or(2.0),
        seed,
    )?;
    let mut csv = Vec::new();
    r.write_csv(&mut csv)?;
    let pass = r.bounded;
    Ok(Outcome { summary: serde_json::to_value(&r)?, csv, pass })
}

fn verify_cov(args: &RunArgs, seed: u64) -> Result<Outcome> {
    let spec = args.process_spec()?;
    let model = reference_cdf(&spec)?;
    let ts: Vec<f64> = match &args.points {
        Some(ts) => ts.clone(),
        None => [0.25, 0.5, 0.75]
            .iter()
            .map(|&u| model.quantile(u))
            .collect::<epl_core::Result<_>>()?,
    };
    let mut fns: Vec<TestFn> = ts.iter().map(|&at| TestFn::Indicator { at }).collect();
    if args.f.is_some() {
        fns.push(TestFn::Lipschitz(test_function(args, &model)?));
    }
    let r = cov_kernel_grid(&spec, &fns, args.n.unwrap_or(2048), args.reps.unwrap_or(1000), args.lag, seed)?;
    let threshold = args.threshold.unwrap_or(0.03);
    let pass = r.max_discrepancy <= threshold;
    let mut csv = Vec::new();
    r.write_csv(&mut csv)?;
    let summary = merged(&r, json!({"threshold": threshold, "pass": pass}))?;
    Ok(Outcome { summary, csv, pass })
}

fn verify_tightness(args: &RunArgs, seed: u64) -> Result<Outcome> {
    let spec = args.process_spec()?;
    let eps = args.eps.clone().unwrap_or_else(|| vec![3.0]);
    let r = tightness_probe(
        &spec,
        args.n.unwrap_or(4096),
        args.delta.unwrap_or(0.1),
        &eps,
        args.reps.unwrap_or(200),
        args.eta.unwrap_or(0.05),
        seed,
    )?;
    let mut csv = Vec::new();
    r.write_csv(&mut csv)?;
    let pass = r.pass;
    Ok(Outcome { summary: serde_json::to_value(&r)?, csv, pass })
}

fn report(args: &RunArgs, seed: u64) -> Result<Outcome> {
    let spec = args.process_spec()?;
    let model = args.model()?;
    let gamma = args.gamma.unwrap_or(2.0);
    // log-spaced δ from 1e-8 to 1/2
    let grid: Vec<f64> = (0..=200).map(|i| 0.5 * (1.6e-8f64).powf(1.0 - i as f64 / 200.0)).collect();
    let modulus = log_modulus_report(&model, gamma, &grid)?;
    let d = args.d.unwrap_or(modulus.minimal_d);
    let mut pass = modulus.satisfied && modulus.minimal_d <= d;
    let mut summary = json!({
        "process": ProcessConfig::from(spec.clone()),
        "modulus": {
            "model": modulus.model,
            "gamma": gamma,
            "minimal_d": modulus.minimal_d,
            "d": d,
            "satisfied": modulus.satisfied,
            "d_sufficient": modulus.minimal_d <= d,
        },
    });
    let (alpha, beta) = (args.alpha.unwrap_or(3.0), args.beta.unwrap_or(2.0));
    if let (Some(n), Some(m)) = (args.n, args.m) {
        let eps = args.single_eps(0.1)?;
        summary["bound_shape"] = match bound_shape(n, 1.0 / m as f64, eps, alpha, beta, gamma, d) {
            Ok((t1, t2)) => json!({"n": n, "h": 1.0 / m as f64, "eps": eps, "alpha": alpha, "beta": beta, "term1": t1, "term2": t2}),
            Err(e) => json!({"skipped": e.to_string()}),
        };
    }
    if spec.is_markov() {
        let marginal = reference_cdf(&spec)?;
        let f = test_function(args, &marginal)?;
        let ks = args.ks.clone().unwrap_or_else(|| (1..=12).collect());
        let options = ErgodicityOptions {
            inner: args.inner.unwrap_or(ErgodicityOptions::default().inner),
            ..Default::default()
        };
        let probe = ergodicity_probe(&spec, &f, &ks, &options, seed)?;
        pass &= !probe.degenerate && probe.theta_hat.is_some_and(|t| t < 1.0);
        summary["ergodicity"] = serde_json::to_value(&probe)?;
    }
    let mut csv = Vec::new();
    modulus.write_csv(&mut csv)?;
    Ok(Outcome { summary, csv, pass })
}
