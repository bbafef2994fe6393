mod commands;
mod config;
mod error;
mod ingest;
mod output;

use anyhow::Context as _;
use clap::{Parser, Subcommand};
use commands::Context;
use config::Config;
use error::{validation, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Smooth sum-of-trees regression and model mixing.
#[derive(Parser, Debug)]
#[command(name = "rpbart", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Random seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out` in the config (default: the
    /// config file's directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for prediction and Monte-Carlo integration.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a regression or mixing model; writes posterior.rpbart and fit_report.txt.
    Fit(Common),
    /// Posterior predictions from an archive; writes predictions.csv.
    Predict(Common),
    /// Theoretical, mixing or empirical semivariogram; writes semivariogram.csv.
    Semivariogram(Common),
    /// Simplex projection of mixing weights; writes projection.csv.
    Project(Common),
    /// Bilinear interpolation of simulator grids; writes regrid.csv.
    Regrid(Common),
}

fn context(common: &Common) -> Result<Context, CliError> {
    let config = Config::load(&common.config)?;
    let seed = match common.seed {
        Some(s) => s,
        None => config.parse_or("seed", 0u64)?,
    };
    let out = match (&common.out, config.get("out")) {
        (Some(dir), _) => dir.clone(),
        (None, Some(_)) => config.path("out")?,
        (None, None) => config.base_dir(),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(error::runtime)?;
    }
    let hash = config.hash(seed);
    Ok(Context { config, seed, out, hash })
}

#[allow(clippy::type_complexity)]
fn run(cli: Cli) -> anyhow::Result<()> {
    let (name, common, command): (&str, &Common, fn(&Context) -> Result<(), CliError>) = match &cli.command {
        Command::Fit(c) => ("fit", c, commands::fit::run),
        Command::Predict(c) => ("predict", c, commands::predict::run),
        Command::Semivariogram(c) => ("semivariogram", c, commands::semivariogram::run),
        Command::Project(c) => ("project", c, commands::project::run),
        Command::Regrid(c) => ("regrid", c, commands::regrid::run),
    };
    let ctx = context(common)?;
    std::fs::create_dir_all(&ctx.out)
        .map_err(|e| error::runtime(format!("cannot create {}: {e}", ctx.out.display())))?;
    command(&ctx).with_context(|| format!("{name} failed"))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(4, CliError::exit_code);
            ExitCode::from(code)
        }
    }
}
