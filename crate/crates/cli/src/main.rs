mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;

#[derive(Parser)]
#[command(name = "focal", version, about = "Pool-based active learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the experiment pool and write its container and manifest.
    GenData {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one acquisition method end to end.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every config for every seed and aggregate the results.
    Compare {
        /// Glob matching config files.
        #[arg(long)]
        configs: String,
        /// Comma-separated seeds; `a-b` ranges are inclusive.
        #[arg(long)]
        seeds: String,
        /// Run independent runs concurrently.
        #[arg(long)]
        parallel: bool,
        /// Output root (defaults to FOCAL_OUT, then the first config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render per-metric tables from a comparison file.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        metric: Option<String>,
        /// Where to write the JSON tables (defaults to report.json next to the input).
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData { config } => commands::gen_data(&config),
        Command::Run { config } => commands::run(&config),
        Command::Compare {
            configs,
            seeds,
            parallel,
            out,
        } => commands::compare(&configs, &seeds, parallel, out),
        Command::Report { input, metric, json } => report::report(&input, metric.as_deref(), json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
