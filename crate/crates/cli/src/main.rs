//! `toolthink`: run tasks through the planner/tool-agent loop, score the
//! resulting traces, and analyze tool usage and failure modes.

mod analyze;
mod config;
mod run;
mod score;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit code for usage, configuration and input errors.
const EXIT_USAGE: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "toolthink", version, about = "Agentic reasoning runs, scoring and analysis over one shared chat model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every selected task and write one trace per task plus a manifest.
    ///
    /// Settings are layered: config file, then TOOLTHINK_* environment
    /// variables, then flags. Exits 2 when any task ended in a backend error.
    Run(run::RunArgs),
    /// Score run directories or prediction files and print an accuracy table.
    Score(score::ScoreArgs),
    /// Write usage statistics, failure labels and paired findings for runs.
    Analyze(analyze::AnalyzeArgs),
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("TOOLTHINK_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).with_target(false).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start async runtime: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let result = match cli.command {
        Command::Run(args) => runtime.block_on(run::run(args)),
        Command::Score(args) => score::score(args),
        Command::Analyze(args) => analyze::analyze(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

/// Directory name used as a fallback run label.
fn dir_label(path: &std::path::Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn create_out_dir(out: &PathBuf) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", out.display()))
}
