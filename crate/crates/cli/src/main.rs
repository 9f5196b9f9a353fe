//! `shotarc`: simulate, fit, model and evaluate shot trajectories from the
//! command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

mod args;
mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::args::{EffectsArgs, EvaluateArgs, FitArgs, PredictArgs, SimulateArgs, TrainArgs};
use crate::config::{merge, ConfigFile, UsageError};

#[derive(Debug, Parser)]
#[command(name = "shotarc", version, about = "Shot trajectory reconstruction and perimeter-defense metrics")]
struct Cli {
    /// TOML config with one table per subcommand; its values win over flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Where to write the run manifest (stdout when absent).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic season with planted ground truth.
    Simulate(SimulateArgs),
    /// Fit trajectories, filter and extract shot factors.
    Fit(FitArgs),
    /// Train the logistic make-probability model on a factors file.
    TrainMakeprob(TrainArgs),
    /// Add modeled make probabilities to a factors file.
    Predict(PredictArgs),
    /// Estimate defender impact or shooter resilience.
    Effects(EffectsArgs),
    /// Run the evaluation analyses.
    Evaluate(EvaluateArgs),
}

fn take<T>((args, warnings): (T, Vec<String>)) -> T {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    args
}

/// Dispatch one parsed invocation and emit its manifest.
fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let manifest = match cli.command {
        Command::Simulate(a) => commands::simulate(take(merge("simulate", a, file.simulate)?)),
        Command::Fit(a) => commands::fit(take(merge("fit", a, file.fit)?)),
        Command::TrainMakeprob(a) => commands::train_makeprob(take(merge("train_makeprob", a, file.train_makeprob)?)),
        Command::Predict(a) => commands::predict(take(merge("predict", a, file.predict)?)),
        Command::Effects(a) => commands::effects(take(merge("effects", a, file.effects)?)),
        Command::Evaluate(a) => commands::evaluate(take(merge("evaluate", a, file.evaluate)?)),
    }?;
    manifest.emit(cli.manifest.as_deref())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}

/// Parse `args` (program name first), run, and map the outcome to an exit code.
fn run_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version go to stdout and count as success.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run_args(std::env::args_os()))
}
