mod args;
mod commands;

use std::fs;
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::Parser;
use serde_json::{json, Value};

use args::Cli;

const EXIT_PASS: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_FAIL: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let (command, raw) = cli.command.parts();
    match execute(command, raw) {
        Ok(true) => ExitCode::from(EXIT_PASS),
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("epl {command}: {}: {e:#}", commands::owner(command));
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn execute(command: &str, raw: &args::RunArgs) -> anyhow::Result<bool> {
    let args = raw.resolve()?;
    let seed = args.seed()?;
    eprintln!("epl {command}: seed = {seed}");
    let threads = args.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    let outcome = pool.install(|| commands::run(command, &args, seed))?;

    let dir = args.out_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = command.replace('-', "_");
    let mut summary = outcome.summary;
    if let Value::Object(map) = &mut summary {
        map.insert("command".into(), json!(command));
        map.insert("seed".into(), json!(seed));
        map.insert("pass".into(), json!(outcome.pass));
    }
    let summary_path = dir.join(format!("{stem}_summary.json"));
    let series_path = dir.join(format!("{stem}_series.csv"));
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", summary_path.display()))?;
    fs::write(&series_path, &outcome.csv).with_context(|| format!("writing {}", series_path.display()))?;
    println!(
        "{} {command}: {} {}",
        if outcome.pass { "PASS" } else { "FAIL" },
        summary_path.display(),
        series_path.display()
    );
    Ok(outcome.pass)
}
