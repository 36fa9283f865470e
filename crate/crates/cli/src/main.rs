//! `dwig`: batch driver for the deformed Wigner edge toolkit.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use config::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "dwig", version, about = "Spectral edge of deformed Wigner matrices H = lambda0 V + W")]
pub struct Cli {
    /// Worker threads for Monte Carlo runs (default: all cores).
    #[arg(long, global = true, env = "DWIG_WORKERS")]
    workers: Option<usize>,
    /// JSON file with subcommand settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Where to write the JSON run summary when the main output is CSV.
    #[arg(long, global = true)]
    summary: Option<PathBuf>,
    /// Output format of the main output.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    /// Little-endian binary spectra (`sample` only).
    Binary,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the free-convolution equation on an energy grid.
    ///
    /// CSV columns: E, re_m, im_m, density.
    FcSolve(commands::FcSolveArgs),
    /// Edge scaling constants and their identity residuals (JSON).
    EdgeScaling(commands::EdgeScalingArgs),
    /// Draw deformed Wigner matrices and write their spectra.
    ///
    /// CSV columns: sample_index, k, mu (descending, k from 1).
    Sample(commands::SampleArgs),
    /// Monte Carlo of the rescaled top eigenvalues.
    ///
    /// CSV columns: sample, k, value, e_plus_hat, gamma0. `value` is
    /// N^{2/3} (gamma0 mu_k - E_plus_hat).
    McEdge(commands::McEdgeArgs),
    /// Edge statistics at lambda0 = sigma0 N^{-delta} against the candidate limit laws (JSON).
    Regime(commands::RegimeArgs),
    /// Dyson Brownian motion trajectories.
    ///
    /// CSV columns: trajectory, t, value (observable `edge`), or
    /// trajectory, t, re_m, im_m (observable `m`).
    Dbm(commands::DbmArgs),
    /// Numerical self-checks; exits with status 3 when a check fails (JSON report).
    Verify(commands::VerifyArgs),
    /// Tracy-Widom distribution functions.
    ///
    /// CSV columns: s, F1, F2.
    TwTable(commands::TwTableArgs),
}

/// Settings shared by every subcommand after merging flags with the config file.
#[derive(Clone, Debug, Serialize)]
pub struct Common {
    pub seed: u64,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }
    let file = config::read_config_value(cli.config.as_deref())?;
    let (seed, format, file) = config::split_common(file)?;
    let common = Common {
        seed: cli.seed.or(seed).unwrap_or(0),
        format: cli.format.or(format),
        out: cli.out,
        summary: cli.summary,
    };
    match cli.command {
        Command::FcSolve(a) => commands::fc_solve(a, config::from_value(file)?, &common),
        Command::EdgeScaling(a) => commands::edge_scaling(a, config::from_value(file)?, &common),
        Command::Sample(a) => commands::sample(a, config::from_value(file)?, &common),
        Command::McEdge(a) => commands::mc_edge(a, config::from_value(file)?, &common),
        Command::Regime(a) => commands::regime(a, config::from_value(file)?, &common),
        Command::Dbm(a) => commands::dbm(a, config::from_value(file)?, &common),
        Command::Verify(a) => commands::verify(a, config::from_value(file)?, &common),
        Command::TwTable(a) => commands::tw_table(a, config::from_value(file)?, &common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dwig: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
