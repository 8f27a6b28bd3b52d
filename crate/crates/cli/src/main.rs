//! `thinfilm`: run, sweep and analyze the regularized spherical thin-film model.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thinfilm_core::continuation::{Coupling, SweepParameter};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "thinfilm", version, about = "Thin-film flow on a sphere: simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Eps,
    Delta,
}

#[derive(Clone, Copy, ValueEnum)]
enum CouplingArg {
    Square,
    Fixed,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write diagnostics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a decreasing sequence of eps or delta values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: Param,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Concurrent member runs (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// How eps follows delta in a delta sweep.
        #[arg(long, value_enum, default_value = "square")]
        coupling: CouplingArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Standalone analyses.
    Analyze {
        #[command(subcommand)]
        what: Analyze,
    },
}

#[derive(Subcommand)]
enum Analyze {
    /// Hardy quotient minima and functional gap constants over a ladder of N.
    Hardy {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long = "N", value_delimiter = ',', default_value = "64,128,256")]
        cells: Vec<usize>,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exponential fit to the energy column of a diag.csv.
    Decay {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, requires = "t_end")]
        t_start: Option<f64>,
        #[arg(long, requires = "t_start")]
        t_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operator residual of a logarithmic steady state.
    Steady {
        #[arg(long, allow_hyphen_values = true)]
        c1: f64,
        #[arg(long, allow_hyphen_values = true)]
        c2: f64,
        #[arg(long, allow_hyphen_values = true)]
        c3: f64,
        #[arg(long = "N", default_value_t = 256)]
        cells: usize,
        #[arg(long, default_value_t = 1.0)]
        n: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Distance from the endpoints excluded from the residual (default 4h).
        #[arg(long)]
        margin: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weak-form residual of a finished run directory.
    Weak {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 6)]
        k: usize,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out } => commands::cmd_run(&config, out),
        Command::Sweep { config, param, values, workers, coupling, out } => commands::cmd_sweep(commands::SweepArgs {
            config,
            param: match param {
                Param::Eps => SweepParameter::Eps,
                Param::Delta => SweepParameter::Delta,
            },
            values,
            workers,
            coupling: match coupling {
                CouplingArg::Square => Coupling::Square,
                CouplingArg::Fixed => Coupling::Fixed,
            },
            out,
        }),
        Command::Analyze { what } => match what {
            Analyze::Hardy { gamma, cells, delta, out } => commands::cmd_hardy(gamma, &cells, delta, out),
            Analyze::Decay { input, t_start, t_end, out } => {
                commands::cmd_decay(&input, t_start.zip(t_end), out)
            }
            Analyze::Steady { c1, c2, c3, cells, n, eps, delta, margin, out } => {
                commands::cmd_steady(commands::SteadyArgs { c1, c2, c3, cells, n, eps, delta, margin, out })
            }
            Analyze::Weak { input, k } => commands::cmd_weak(&input, k),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("thinfilm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
