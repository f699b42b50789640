//! `spde-heavy`: batch front end for the heavy-tailed SPDE simulation library.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use commands::{Run, StudyKind, VERSION};
use error::CliError;

#[derive(Parser)]
#[command(name = "spde-heavy", version = VERSION, about = "Mild solutions of SPDEs driven by heavy-tailed Lévy noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created when missing.
    #[arg(long)]
    out: PathBuf,
    /// Master seed; overrides `ensemble.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for realizations and grid nodes.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Admissible (p, q) region and kernel norms.
    AnalyzeKernel(Common),
    /// Sample atom clouds.
    Sample(Common),
    /// Solve one realization.
    Solve(Common),
    /// Run an ensemble study.
    Study {
        #[arg(value_enum)]
        kind: StudyKind,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::AnalyzeKernel(c) | Command::Sample(c) | Command::Solve(c) => c,
        Command::Study { common, .. } => common,
    };
    if let Some(n) = common.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let run = Run::load(&common.config, common.out.clone(), common.seed)?;
    match cli.command {
        Command::AnalyzeKernel(_) => commands::cmd_analyze_kernel(&run),
        Command::Sample(_) => commands::cmd_sample(&run),
        Command::Solve(_) => commands::cmd_solve(&run),
        Command::Study { kind, .. } => commands::cmd_study(&run, kind),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPDE_HEAVY_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
