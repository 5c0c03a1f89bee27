mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::output::{OutputDir, RunManifest};

/// Failures, grouped by exit code.
#[derive(Debug, Clone, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<intermap::Error> for CliError {
    fn from(e: intermap::Error) -> Self {
        use intermap::Error::*;
        match e {
            InvalidParams(_) | Config(_) | InvalidInput(_) | GlueNotMonotone { .. } | A2Violation { .. }
            | AxiomFailure(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "intermap", version, about = "Experiments on doubly intermittent full-branch interval maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides run.out).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (overrides run.workers).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Master seed (overrides run.master_seed).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Suppress the one-line report.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Class label, stickiness exponents, regularity exponents and axiom checks.
    Classify,
    /// Occupation statistics and empirical measures along orbits.
    Simulate,
    /// Return-time tail exponents on the inducing interval.
    Tails,
    /// Partition, induced orbits, induced density and the sigma-finite measure.
    Induced,
    /// Perturb the map into a target family within a C^r distance.
    Perturb,
    /// Occupation statistics over a grid of one parameter.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Simulate => "simulate",
            Command::Tails => "tails",
            Command::Induced => "induced",
            Command::Perturb => "perturb",
            Command::Sweep => "sweep",
        }
    }
}

pub const DEFAULT_OUT: &str = "intermap-out";

fn run(cli: Cli) -> Result<i32, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.run.master_seed = s;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        cfg.run.workers = Some(w);
    }
    let out_path = cli.out.clone().unwrap_or_else(|| PathBuf::from(cfg.run.out.as_deref().unwrap_or(DEFAULT_OUT)));
    if cli.command.name() == "sweep" && cfg.sweep.is_none() {
        return Err(CliError::Validation("the sweep command needs a [sweep] section".into()));
    }
    // Output location and worker count do not change results, so they are
    // left out of the configuration hash.
    let hashed = ExperimentConfig {
        run: config::RunOptions { out: None, workers: None, ..cfg.run.clone() },
        ..cfg.clone()
    };
    let config_sha256 = output::sha256_hex(&output::json_bytes(&hashed)?);

    let workers = cfg.run.workers.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let out = OutputDir::create(&out_path)?;
    let start = Instant::now();
    let outcome = pool.install(|| match cli.command {
        Command::Classify => commands::classify_cmd(&cfg, &out),
        Command::Simulate => commands::simulate_cmd(&cfg, &out),
        Command::Tails => commands::tails_cmd(&cfg, &out),
        Command::Induced => commands::induced_cmd(&cfg, &out),
        Command::Perturb => commands::perturb_cmd(&cfg, &out),
        Command::Sweep => commands::sweep_cmd(&cfg, &out),
    })?;
    let manifest = RunManifest {
        tool: "intermap",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().into(),
        config_sha256,
        tasks: outcome.tasks,
        files: outcome.files,
    };
    out.finish(manifest, start.elapsed().as_secs_f64(), workers)?;
    if !cli.quiet {
        println!("{}: {}", cli.command.name(), outcome.message);
    }
    Ok(outcome.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
