//! Command-line front end: validate profiles, run modes, sweep parameters,
//! dump multiplier tables, and fit decay rates.
//!
//! Exit codes: 0 success, 1 admissibility failure, 2 numerical-check
//! failure, 3 IO/config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stratshear::config::load_config;
use stratshear::run::{
    cmd_fit, cmd_multiplier_table, cmd_run, cmd_sweep, cmd_validate, exit_code_for, RunStatus,
};

#[derive(Parser)]
#[command(
    name = "stratshear",
    about = "Per-mode simulator for shear flows with stratified viscosity",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Proceed even when the profile fails the admissibility checks.
    #[arg(long)]
    override_admissibility: bool,
    /// Worker threads for parallel sweeps (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Score the profile's admissibility conditions and report the partition.
    Validate(CommonArgs),
    /// March the configured modes and write traces, checkpoints, manifest.
    Run(CommonArgs),
    /// Run the cross product of [sweep] values, one directory per case.
    Sweep(CommonArgs),
    /// Dump m(t, k, xi) on a rectangular grid.
    MultiplierTable {
        #[command(flatten)]
        common: CommonArgs,
        /// Wavenumber of the table.
        #[arg(long, default_value_t = 1)]
        k: i64,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, default_value_t = 20.0)]
        t1: f64,
        #[arg(long, default_value_t = 201)]
        nt: usize,
        #[arg(long, default_value_t = -10.0)]
        xi0: f64,
        #[arg(long, default_value_t = 10.0)]
        xi1: f64,
        #[arg(long, default_value_t = 201)]
        nxi: usize,
    },
    /// Least-squares decay rate of one column of a trace CSV.
    Fit {
        /// Trace CSV produced by `run`.
        #[arg(long)]
        csv: PathBuf,
        /// Column to fit (e.g. l2, ea, e_loc_0).
        #[arg(long, default_value = "l2")]
        column: String,
        /// Window start time.
        #[arg(long)]
        t0: f64,
        /// Window end time.
        #[arg(long)]
        t1: f64,
    },
}

fn configure_workers(workers: usize) {
    if workers > 0 {
        // ignore failure: the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
}

fn dispatch(cli: Cli) -> Result<RunStatus, stratshear::Error> {
    match cli.command {
        Command::Validate(common) => {
            let (config, hash) = load_config(&common.config)?;
            cmd_validate(config, hash, &common.out)
        }
        Command::Run(common) => {
            configure_workers(common.workers);
            let (config, hash) = load_config(&common.config)?;
            cmd_run(config, hash, &common.out, common.override_admissibility)
        }
        Command::Sweep(common) => {
            configure_workers(common.workers);
            let (config, hash) = load_config(&common.config)?;
            cmd_sweep(config, hash, &common.out, common.override_admissibility)
        }
        Command::MultiplierTable {
            common,
            k,
            t0,
            t1,
            nt,
            xi0,
            xi1,
            nxi,
        } => {
            let (config, hash) = load_config(&common.config)?;
            cmd_multiplier_table(config, hash, &common.out, k, (t0, t1, nt), (xi0, xi1, nxi))
        }
        Command::Fit { csv, column, t0, t1 } => {
            let fit = cmd_fit(&csv, &column, (t0, t1))?;
            println!(
                "{{\"rate\": {:.12e}, \"r_squared\": {:.12e}, \"samples\": {}}}",
                fit.rate, fit.r_squared, fit.samples
            );
            Ok(RunStatus::Success)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(status) => {
            if status != RunStatus::Success {
                eprintln!("stratshear: finished with status {:?}", status);
            }
            ExitCode::from(status.code() as u8)
        }
        Err(err) => {
            eprintln!("stratshear: error: {err}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
