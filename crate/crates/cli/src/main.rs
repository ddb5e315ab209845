use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use tudsim::qsp::Parity;

mod commands;
mod config;
mod figures;
mod output;
mod phases;

use commands::{ChannelMethod, Method, SolveOutcome, Target};
use config::{CommonArgs, Settings};
use figures::Figure;

/// Unitary decompositions of block-encoded operators and quantum channels.
#[derive(Parser, Debug)]
#[command(name = "tudsim", version, about)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose the matrix in a JSON file (nested rows of [re, im])
    Decompose {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "tud")]
        method: Method,
    },
    /// Phase factors
    Qsp {
        #[command(subcommand)]
        action: QspAction,
    },
    /// Generalized amplitude damping channel
    Channel {
        #[command(subcommand)]
        action: ChannelAction,
    },
    /// Reproduce figure data as CSV plus a checked JSON summary
    Figures {
        #[arg(value_enum)]
        id: Figure,
    },
}

#[derive(Subcommand, Debug)]
enum QspAction {
    /// Solve for phases and cache them in the `--out` file
    Solve {
        #[arg(long, value_enum, default_value = "odd")]
        target: Target,
    },
    /// Scalar response of a phase list against its target
    Eval {
        /// Phase file written by `qsp solve`, or a JSON array of angles
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, value_enum)]
        fixture: Option<FixtureArg>,
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FixtureArg {
    Odd,
    Even,
}

#[derive(Subcommand, Debug)]
enum ChannelAction {
    /// Estimate Pauli expectations after one channel step over the γ grid
    Simulate {
        #[arg(long, value_enum, default_value = "fud")]
        method: ChannelMethod,
        /// Initial state: 1, +x or +y
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        state: String,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    let settings = Settings::resolve(&cli.common)?;
    match cli.command {
        Command::Decompose { input, method } => commands::decompose(&input, method, &settings)?,
        Command::Qsp { action } => match action {
            QspAction::Solve { target } => {
                let out = settings
                    .out
                    .clone()
                    .ok_or_else(|| anyhow::anyhow!("qsp solve needs --out <file>"))?;
                if commands::qsp_solve(target, &out, &settings)? == SolveOutcome::NotConverged {
                    return Ok(ExitCode::from(2));
                }
            }
            QspAction::Eval {
                file,
                fixture,
                points,
            } => {
                let parity = fixture.map(|f| match f {
                    FixtureArg::Odd => Parity::Odd,
                    FixtureArg::Even => Parity::Even,
                });
                commands::qsp_eval(file.as_ref(), parity, points, &settings)?;
            }
        },
        Command::Channel { action } => match action {
            ChannelAction::Simulate { method, state } => {
                let rows = commands::channel_simulate(method, &state, &settings)?;
                commands::write_channel(&rows, &settings)?;
            }
        },
        Command::Figures { id } => {
            if !figures::run(id, &settings)? {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
