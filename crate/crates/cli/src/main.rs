mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Output, Status};
use config::{Format, RunConfig};

const AFTER_HELP: &str = "\
Durations in the config and in all files are in seconds.

Outputs (written to the output directory):
  stats        pulses_<mode>.csv  n,probability
               photons.csv        n,probability
               stats.json         mean, variance and Mandel Q per mode
  simulate     histogram.csv      n,count,frequency
               counts.csv         window,count
               tau2_cdf.csv       t,empirical,uniform   (cw mode)
               gaps.csv           gap                   (record_gaps)
               simulation.json
  fit          fit_cdf.csv        t,empirical,model
               fit.json           fitted parameters in seconds and in ns
  reconstruct  reconstruct.csv    alpha,estimate,stderr,mismatch,analytic
               reconstruct.json
  validate     validate.json      (only with --out)

Fit input: one number per line, '#' starts a comment, a header line is
skipped. A strictly increasing column is read as timestamps and differenced.
A .json file must hold a gap_samples array (simulate --format json).

Exit codes: 0 success, 1 validation failure, 2 invalid config or input,
3 fit did not converge.";

#[derive(Parser)]
#[command(name = "photocount", version, about = "Photocount statistics of dead-time detectors", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; overrides the config.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic pulse-number distributions.
    Stats,
    /// Monte Carlo simulation of the detector.
    Simulate,
    /// Fit the inter-pulse time distribution.
    Fit {
        /// Gap or timestamp file; overrides task.fit.input.
        input: Option<PathBuf>,
    },
    /// Phase-space reconstruction from pulse statistics.
    Reconstruct,
    /// Run the built-in acceptance checks.
    Validate,
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<photocount::Error>() {
            return match err {
                photocount::Error::Config(_) => "config",
                photocount::Error::Domain(_) => "domain",
                photocount::Error::Unsupported(_) => "unsupported",
                photocount::Error::IllConditioned(_) => "ill_conditioned",
                photocount::Error::Input(_) => "input",
            };
        }
        if cause.is::<serde_json::Error>() {
            return "config";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "input"
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let explicit_out = cli.out.is_some();
    let out = Output {
        dir: cli.out.unwrap_or_else(|| cfg.output.dir.clone()),
        format: cli.format.unwrap_or(cfg.output.format),
    };
    match cli.command {
        Command::Stats => commands::stats(&cfg, &out),
        Command::Simulate => commands::simulate_cmd(&cfg, &out),
        Command::Fit { input } => commands::fit(&cfg, input.as_deref(), &out),
        Command::Reconstruct => commands::reconstruct(&cfg, &out),
        Command::Validate => commands::validate(&cfg, explicit_out.then_some(&out)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::ValidationFailed) => ExitCode::from(1),
        Ok(Status::NotConverged) => {
            eprintln!("{}", serde_json::json!({"error": "not_converged", "message": "fit did not converge"}));
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({"error": error_kind(&e), "message": format!("{e:#}")}));
            ExitCode::from(2)
        }
    }
}
