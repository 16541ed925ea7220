//! `alearn`: run, compare and inspect active learning experiments.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage or configuration error,
//! 3 data error, 4 training diverged, 5 gradient check failed.

mod error;
mod experiment;
mod tools;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use experiment::{CompareArgs, RunArgs};
use tools::{GradcheckArgs, InspectArgs, ServeArgs};

#[derive(Parser, Debug)]
#[command(name = "alearn", version, about = "Pool-based active learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One run with one query metric
    Run(RunArgs),
    /// Several metrics over replicate seeds, with a summary table
    Compare(CompareArgs),
    /// Check backpropagated gradients against finite differences
    Gradcheck(GradcheckArgs),
    /// Parse an MNIST IDX pair and report its contents
    Inspect(InspectArgs),
    /// Serve the HTTP labeling API
    Serve(ServeArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => experiment::cmd_run(a),
        Command::Compare(a) => experiment::cmd_compare(a),
        Command::Gradcheck(a) => tools::cmd_gradcheck(a),
        Command::Inspect(a) => tools::cmd_inspect(a),
        Command::Serve(a) => tools::cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
