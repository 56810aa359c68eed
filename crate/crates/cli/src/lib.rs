//! The `dsod` command line: reproducible experiment runs over `dsod-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{Context, Outcome};
use crate::config::Params;
use crate::error::CliError;
use crate::output::{destination, emit_snapshot, emit_table, output_dir_from_env, Header};

#[derive(Debug, Parser)]
#[command(name = "dsod", version, about = "Divisible sandpile and bilaplacian field experiments on the discrete torus")]
pub struct Cli {
    /// TOML config with top-level keys and per-command sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Record the wall-clock time in the output header.
    #[arg(long, global = true)]
    pub stamp: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Topple a configuration until stable; writes final state and odometer.
    Stabilize(Params),
    /// Dynamic versus closed-form odometer over seeded runs.
    OdometerCompare(Params),
    /// Exact sample of chi, eta or the w-field.
    SampleField(Params),
    /// Pairings of the rescaled field with a test function.
    Pair(Params),
    /// Monte Carlo moments of the pairing against their Gaussian targets.
    Moments(Params),
    /// Exact and Monte Carlo pairing variances across a list of n.
    Sweep(Params),
    /// Negative Sobolev norm of field samples across a list of n.
    Sobolev(Params),
    /// Continuum kernel on a grid of points.
    Kernel(Params),
    /// Exhaustive check of the Laplacian eigenvalue bounds.
    VerifyBounds(Params),
    /// Expected hitting times and the constant L.
    Hitting(Params),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stabilize(_) => "stabilize",
            Command::OdometerCompare(_) => "odometer-compare",
            Command::SampleField(_) => "sample-field",
            Command::Pair(_) => "pair",
            Command::Moments(_) => "moments",
            Command::Sweep(_) => "sweep",
            Command::Sobolev(_) => "sobolev",
            Command::Kernel(_) => "kernel",
            Command::VerifyBounds(_) => "verify-bounds",
            Command::Hitting(_) => "hitting",
        }
    }

    pub fn params(&self) -> &Params {
        match self {
            Command::Stabilize(p)
            | Command::OdometerCompare(p)
            | Command::SampleField(p)
            | Command::Pair(p)
            | Command::Moments(p)
            | Command::Sweep(p)
            | Command::Sobolev(p)
            | Command::Kernel(p)
            | Command::VerifyBounds(p)
            | Command::Hitting(p) => p,
        }
    }
}

/// Flags over config file.
pub fn resolve_params(cli: &Cli) -> Result<Params, CliError> {
    let flags = cli.command.params().clone();
    Ok(match &cli.config {
        Some(path) => config::load_config(path, cli.command.name())?.overlay(flags),
        None => flags,
    })
}

pub fn dispatch(command: &str, p: &Params, ctx: &Context) -> Result<Outcome, CliError> {
    match command {
        "stabilize" => commands::run_stabilize(p, ctx),
        "odometer-compare" => commands::run_odometer_compare(p, ctx),
        "sample-field" => commands::run_sample_field(p, ctx),
        "pair" => commands::run_pair(p, ctx),
        "moments" => commands::run_moments(p, ctx),
        "sweep" => commands::run_sweep(p, ctx),
        "sobolev" => commands::run_sobolev(p, ctx),
        "kernel" => commands::run_kernel(p, ctx),
        "verify-bounds" => commands::run_verify_bounds(p, ctx),
        "hitting" => commands::run_hitting(p, ctx),
        other => Err(CliError::Usage(format!("unknown command {other}"))),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli, ctx: &Context) -> Result<i32, CliError> {
    let params = resolve_params(cli)?;
    let command = cli.command.name();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = params.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    let outcome = pool.install(|| dispatch(command, &params, ctx))?;

    let header = Header { command: command.into(), seed: params.seed, echo: params.echo(), stamp: cli.stamp };
    let binary = match params.format.as_deref().unwrap_or("csv") {
        "csv" => false,
        "bin" => true,
        f => return Err(CliError::Usage(format!("unknown format '{f}'"))),
    };
    let out_dir = output_dir_from_env();
    if binary {
        let snap = outcome
            .snapshot
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("{command} has no binary output")))?;
        let path = destination(params.out.as_deref(), out_dir.as_deref(), command, "dsod")
            .ok_or_else(|| CliError::Usage("binary output needs --out or OUTPUT_DIR".into()))?;
        emit_snapshot(&header, &outcome.table, snap, &path)?;
    } else {
        let path = destination(params.out.as_deref(), out_dir.as_deref(), command, "csv");
        emit_table(&header, &outcome.table, path.as_deref())?;
    }
    Ok(outcome.exit)
}
