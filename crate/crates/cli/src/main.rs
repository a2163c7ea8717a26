//! `smeared`: figure data and Monte Carlo verification for spread-particle
//! cloud transmittance.
//!
//! Exit status: 0 on success, 2 on a usage or config error, 3 when a
//! verification check fails.

mod commands;
mod config;
mod format;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] smeared_core::Error),
}

#[derive(Parser)]
#[command(
    version,
    about = "Transmittance of dilute clouds of spatially spread particles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print all four forms of an opacity as JSON
    Convert {
        /// one of g, tr_cl, tau, abs
        kind: String,
        #[arg(allow_hyphen_values = true)]
        value: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One particle seen by a detector sliding across it (CSV: offset,p_v,tr)
    Single {
        #[arg(long, conflicts_with = "table")]
        stdev: Option<f64>,
        /// two-column CSV density table (x, density)
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long)]
        g: f64,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        offset_min: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        offset_max: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transmittance against spread for a configured cloud (CSV)
    Curve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo cross-check of the analytic laws (JSON)
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cmd: &Command) -> Result<(commands::Output, Option<&Path>), CliError> {
    Ok(match cmd {
        Command::Convert { kind, value, out } => (commands::convert(kind, *value)?, out.as_deref()),
        Command::Single {
            stdev,
            table,
            r,
            g,
            offset_min,
            offset_max,
            points,
            out,
        } => {
            let args = commands::SingleArgs {
                stdev: *stdev,
                table: table.as_deref(),
                r: *r,
                g: *g,
                offset_min: *offset_min,
                offset_max: *offset_max,
                points: *points,
            };
            (commands::single(&args)?, out.as_deref())
        }
        Command::Curve { config, out } => {
            (commands::curve(&config::load(config)?)?, out.as_deref())
        }
        Command::Verify { config, out } => {
            (commands::verify(&config::load(config)?)?, out.as_deref())
        }
    })
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    let res = match out {
        Some(path) => std::fs::write(path, text).map_err(|e| (path.display().to_string(), e)),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| ("stdout".to_string(), e)),
    };
    res.map_err(|(dest, e)| CliError::Usage(format!("cannot write {dest}: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = run(&cli.command).and_then(|(output, out)| {
        emit(&output.text, out)?;
        Ok(output.failed)
    });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("verification failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
