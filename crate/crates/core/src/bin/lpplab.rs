use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use lpplab::harness::{self, ExperimentConfig, Kind, RunOptions};
use lpplab::tracy_widom::{TwReference, DEFAULT_GRID_STEP, DEFAULT_ORDER, TW_MAX_S, TW_MIN_S};
use lpplab::{LppError, Result};

#[derive(Parser)]
#[command(name = "lpplab", version, about = "Near-axis last-passage percolation experiments")]
struct Cli {
    /// Worker threads for replica execution.
    #[arg(long, global = true, env = harness::run::WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config; prints the summary block as JSON.
    Simulate {
        config: PathBuf,
        /// Write the record here instead of the config's `output`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Summarize and compare record files; prints the report as JSON.
    Analyze {
        #[arg(required = true)]
        records: Vec<PathBuf>,
    },
    /// Tabulate the Tracy-Widom GUE distribution function as `s,F`.
    TwTable {
        #[arg(long, default_value_t = TW_MIN_S, allow_negative_numbers = true)]
        min: f64,
        #[arg(long, default_value_t = TW_MAX_S, allow_negative_numbers = true)]
        max: f64,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        step: f64,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
    },
    /// Run a `coupling` config.
    Couple {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write report tables and plot data for a set of records.
    Report {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn simulate(cli_workers: Option<usize>, config: PathBuf, output: Option<PathBuf>, only: Option<Kind>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(kind) = only.filter(|&k| k != cfg.kind) {
        return Err(LppError::InvalidParameter(format!(
            "{} holds a {} experiment, expected {kind}",
            config.display(),
            cfg.kind
        )));
    }
    if let Some(out) = output {
        cfg.output = out;
    }
    let opts = RunOptions {
        workers: cli_workers,
        ..RunOptions::default()
    };
    let outcome = harness::run_with(&cfg, &opts)?;
    let line = json!({
        "record": outcome.record_path,
        "summary_file": outcome.summary_path,
        "complete": outcome.complete,
        "summary": outcome.summary,
    });
    println!("{}", serde_json::to_string_pretty(&line).expect("json"));
    Ok(())
}

fn tw_table(min: f64, max: f64, step: f64, order: usize) -> Result<()> {
    if !(step > 0.0) || !(min < max) {
        return Err(LppError::InvalidParameter(format!(
            "tw-table needs min < max and step > 0, got min={min}, max={max}, step={step}"
        )));
    }
    let table = TwReference::build(order, DEFAULT_GRID_STEP)?;
    let count = ((max - min) / step + 1e-9).floor() as usize;
    let mut out = String::from("s,F\n");
    for i in 0..=count {
        let s = min + i as f64 * step;
        out.push_str(&format!("{},{}\n", sig12(s), sig12(table.cdf(s))));
    }
    print!("{out}");
    Ok(())
}

/// Shortest decimal form of `v` rounded to 12 significant digits.
fn sig12(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().expect("float round-trips");
    if rounded == 0.0 {
        "0".into()
    } else {
        rounded.to_string()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate { config, output } => simulate(cli.workers, config, output, None),
        Command::Couple { config, output } => simulate(cli.workers, config, output, Some(Kind::Coupling)),
        Command::Analyze { records } => harness::analyze(&records).map(|r| println!("{}", r.to_json())),
        Command::TwTable { min, max, step, order } => tw_table(min, max, step, order),
        Command::Report { records, out } => harness::analyze(&records)
            .and_then(|r| r.write_dir(&out))
            .map(|files| {
                for f in files {
                    println!("{}", f.display());
                }
            }),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.code(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
