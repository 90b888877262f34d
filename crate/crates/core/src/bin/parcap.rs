//! `parcap`: command-line driver. Prints a one-line JSON summary on stdout and
//! exits 0 on success, 1 when some rows failed or the run errored, 2 on
//! configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use parcap::cli::{execute, Command, ConfigError, Format, RunConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "parcap", version, about = "Fractional heat kernels, s-parabolic Cantor sets and capacity estimates")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory (default: output.dir from the config, else ./out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// seed for every sampled quantity (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads (default: available cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Materialise the generation-k cubes
    Gen,
    /// Audit kernel values against their model bounds
    KernelAudit,
    /// Evaluate the field at configured points
    Field,
    /// L² norm, cancellation and cube averages of the field of μ
    L2norm,
    /// The averaged pair matrix and operator-norm bounds
    Matrix,
    /// Stopping scales, classification and the inequality suite
    Scales,
    /// Capacity report over a sweep of constructions
    CapacitySweep,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Gen => Command::Gen,
            Cmd::KernelAudit => Command::KernelAudit,
            Cmd::Field => Command::Field,
            Cmd::L2norm => Command::L2norm,
            Cmd::Matrix => Command::Matrix,
            Cmd::Scales => Command::Scales,
            Cmd::CapacitySweep => Command::CapacitySweep,
        }
    }
}

fn config_error(command: Command, violations: Vec<String>) -> ExitCode {
    for v in &violations {
        eprintln!("config error: {v}");
    }
    println!("{}", json!({ "command": command.name(), "status": "config_error", "violations": violations }));
    ExitCode::from(2)
}

fn run(cli: &Cli, cfg: &RunConfig, workers: usize) -> anyhow::Result<(i32, serde_json::Value)> {
    let out = cli.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().context("building the worker pool")?;
    let outcome = pool.install(|| execute(cfg, &out, cli.format, workers)).context("running the command")?;
    Ok((outcome.exit_code, outcome.summary))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command: Command = cli.command.into();
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return config_error(command, vec![format!("cannot read {}: {e}", path.display())]),
        },
        None => String::new(),
    };
    if cli.workers == Some(0) {
        return config_error(command, vec!["--workers must be at least 1".into()]);
    }
    let cfg = match RunConfig::parse(&text, command, cli.seed) {
        Ok(c) => c,
        Err(ConfigError::Invalid(v)) => return config_error(command, v),
        Err(e @ ConfigError::Malformed(_)) => return config_error(command, vec![e.to_string()]),
    };
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    match run(&cli, &cfg, workers) {
        Ok((code, summary)) => {
            println!("{summary}");
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            println!("{}", json!({ "command": command.name(), "status": "error", "message": format!("{e:#}") }));
            ExitCode::from(1)
        }
    }
}
