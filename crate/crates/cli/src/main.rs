use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tangent_cli::report::write_output;
use tangent_cli::suite::load_config;
use tangent_cli::{emit, run, run_suite, validate, CliError, Format, RunOptions, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};

#[derive(Parser)]
#[command(name = "tangent", version, about = "Run Jacobian, degree and inversion experiments on jump-driven shifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, global = true, default_value = "json")]
    format: Format,
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Include wall-clock duration in reports.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config and emit its report.
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Run every `*.json` config in a directory and emit a summary table.
    Suite { directory: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}

fn load(path: &Path, seed: Option<u64>) -> Result<tangent_cli::ExperimentConfig, CliError> {
    let mut config = load_config(path)?;
    if seed.is_some() {
        config.seed = seed;
    }
    Ok(config)
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let options = RunOptions { workers, timing: cli.timing };
    match &cli.command {
        Command::Run { config } => {
            let report = run(&load(config, cli.seed)?, &options)?;
            emit(&report, cli.format, cli.out.as_deref())?;
            Ok(if report.passed { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::Validate { config } => {
            let plan = validate(&load(config, cli.seed)?)?;
            eprintln!("{}: ok ({})", config.display(), plan.experiment.name());
            Ok(EXIT_PASS)
        }
        Command::Suite { directory } => {
            let (summary, _) = run_suite(directory, cli.seed, &options)?;
            write_output(&summary.render(cli.format)?, cli.out.as_deref())?;
            Ok(summary.exit_code())
        }
    }
}
