//! `hapsim`: lumped and tissue-scale prodrug simulations, surrogate fits
//! and sensitivity screens from the command line.

mod commands;
mod error;
mod json;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Backend, MorrisArgs};
use error::CliError;
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "hapsim", version, about = "Hypoxia-activated prodrug transport simulator")]
struct Cli {
    /// Parameter config (TOML). Falls back to $HAPSIM_CONFIG, then to the
    /// built-in baseline.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for model evaluations (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lumped model time series and QoI summary.
    Run0d,
    /// Fit the surviving-fraction and rate surrogates.
    Fit {
        /// Time series CSV with columns `t`, `sf` and optionally `c_t_tpz`,
        /// `r_eff`. Without it the lumped model is run from the config.
        #[arg(long)]
        timeseries: Option<PathBuf>,
    },
    /// Morris elementary-effects screening.
    Morris {
        #[arg(long, value_enum, default_value = "0d")]
        backend: Backend,
        #[arg(long, default_value_t = 70)]
        trajectories: usize,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Vessel network JSON for the 3d backend.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Drug transport time step for the 3d backend, s.
        #[arg(long, default_value_t = 10.0)]
        dt: f64,
    },
    /// Sobol first-order and total-effect indices of the lumped model.
    Sobol {
        /// Base sample size; the model is evaluated samples * (k + 2) times.
        #[arg(long, default_value_t = 1024)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Analyse `y = sum_i i x_i` on the unit cube instead of the model.
        #[arg(long)]
        linear_test: bool,
    },
    /// One tissue-scale simulation with field snapshots.
    Run3d {
        /// Vessel network JSON; the shipped network when absent.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Drug transport time step, s.
        #[arg(long, default_value_t = 10.0)]
        dt: f64,
    },
}

fn run(cli: &Cli) -> Result<RunManifest, CliError> {
    let config = cli.config.as_deref();
    let out = cli.out.as_path();
    match &cli.command {
        Command::Run0d => commands::cmd_run0d(config, out),
        Command::Fit { timeseries } => commands::cmd_fit_surrogates(timeseries.as_deref(), config, out),
        Command::Morris {
            backend,
            trajectories,
            levels,
            seed,
            network,
            dt,
        } => commands::cmd_morris(
            &MorrisArgs {
                config,
                backend: *backend,
                network: network.as_deref(),
                r: *trajectories,
                p: *levels,
                seed: *seed,
                dt: *dt,
            },
            out,
        ),
        Command::Sobol {
            samples,
            seed,
            linear_test,
        } => commands::cmd_sobol(config, *samples, *seed, *linear_test, out),
        Command::Run3d { network, dt } => commands::cmd_run3d(config, network.as_deref(), *dt, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))
        .and_then(|pool| pool.install(|| run(&cli)));
    match result {
        Ok(manifest) => {
            println!(
                "{}: {} artifacts in {} ({:.2} s)",
                manifest.command,
                manifest.artifacts.len(),
                manifest.out_dir.display(),
                manifest.wall_clock_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
