//! `twotime`: run two-time measurement and entropy production experiments
//! described by a JSON scenario file.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;
mod qrm_compare;
mod scenario;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, Report, Settings};
use scenario::load_scenario;

#[derive(Debug, Parser)]
#[command(
    name = "twotime",
    version,
    about = "Two-time measurement statistics of Lindblad dynamics"
)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Write the CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Detailed balance tolerance, overriding the scenario's.
    #[arg(long, global = true, env = "TWOTIME_TOL")]
    tol: Option<f64>,

    /// Seed for the randomized checks of `verify`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Steady states of the total generator and whether it is relaxing.
    Steady,
    /// State, entropy and entropy production along the time grid.
    Evolve,
    /// Detailed balance reports for every reservoir at s = 0, 1/2, 1.
    DbCheck,
    /// Laws and expectations of the entropy variation per reservoir and time.
    Ttm,
    /// Moment generating functions on the (t, alpha) grid.
    Mgf,
    /// Rate matrix of the classical chain of one reservoir.
    Chain {
        /// Reservoir label or index (default: the first).
        #[arg(long)]
        reservoir: Option<String>,
    },
    /// Closed forms of reset models against the generic engine.
    QrmDemo,
    /// Full invariant suite; exits 0 iff every check passes.
    Verify,
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| Failure::Usage("--scenario <PATH> is required".into()))?;
    let sc = load_scenario(path)?;
    let db_tol = match cli.tol {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Failure::Usage(format!("--tol must be positive, got {t}"))),
        None => sc.tolerances.db,
    };
    let settings = Settings { db_tol, seed: cli.seed };
    match &cli.command {
        Command::Steady => commands::steady(&sc),
        Command::Evolve => commands::evolve(&sc),
        Command::DbCheck => commands::db_check(&sc, &settings),
        Command::Ttm => commands::ttm(&sc),
        Command::Mgf => commands::mgf_grid(&sc),
        Command::Chain { reservoir } => commands::chain(&sc, reservoir.as_deref()),
        Command::QrmDemo => qrm_compare::qrm_demo(&sc),
        Command::Verify => verify::verify(&sc, &settings),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = cli.out.as_deref();
    match run(&cli) {
        Ok(report) => {
            if let Err(e) = report.table.emit(out) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(report.code)
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            if let Failure::Hypothesis(message) = &failure {
                if let Err(e) = commands::hypothesis_table(message).emit(out) {
                    eprintln!("error: cannot write output: {e}");
                }
            }
            ExitCode::from(failure.code())
        }
    }
}
