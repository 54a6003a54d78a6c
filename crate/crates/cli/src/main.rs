use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use topophase_cli::bundled::{self, BUNDLED};
use topophase_cli::{parse_scenario, run_scenario, Diagnostic, RunOptions};

const EXIT_VALIDATION: u8 = 1;
const EXIT_TASK: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "topophase", version, about = "Run topological-phase scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario file (or a bundled scenario by name).
    Run {
        file: PathBuf,
        /// Output directory for report.json and sidecars.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Leave out wall-clock timings.
        #[arg(long)]
        normalized_report: bool,
    },
    /// Check a scenario without running it.
    Validate { file: PathBuf },
    /// Print the bundled scenarios.
    ListScenarios,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{} problem(s) in the scenario", .0.len())]
    Invalid(Vec<Diagnostic>),
    #[error("{0} task(s) failed")]
    Tasks(usize),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => EXIT_VALIDATION,
            CliError::Tasks(_) => EXIT_TASK,
            CliError::Read { .. } | CliError::Write { .. } => EXIT_IO,
        }
    }
}

/// Scenario text and the directory that relative references resolve from.
fn load(file: &Path) -> Result<(String, PathBuf), CliError> {
    if !file.exists() {
        if let Some(b) = file.to_str().and_then(bundled::find) {
            return Ok((b.source.to_string(), PathBuf::from(".")));
        }
    }
    let text = std::fs::read_to_string(file).map_err(|source| CliError::Read { path: file.into(), source })?;
    let base = file.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((text, base))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ListScenarios => {
            for b in BUNDLED {
                let description = parse_scenario(b.source, Path::new(".")).map(|s| s.description).unwrap_or_default();
                println!("{:<14} {description}", b.name);
            }
            Ok(())
        }
        Command::Validate { file } => {
            let (text, base) = load(&file)?;
            parse_scenario(&text, &base).map(|_| ()).map_err(CliError::Invalid)
        }
        Command::Run { file, out, seed, normalized_report } => {
            let (text, base) = load(&file)?;
            let scenario = parse_scenario(&text, &base).map_err(CliError::Invalid)?;
            let output = run_scenario(&scenario, &text, RunOptions { seed, normalized: normalized_report });
            output.write(&out).map_err(|source| CliError::Write { path: out.clone(), source })?;
            println!("{}", out.join("report.json").display());
            match output.failed_tasks() {
                0 => Ok(()),
                n => Err(CliError::Tasks(n)),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let CliError::Invalid(diags) = &e {
                for d in diags {
                    eprintln!("{d}");
                }
            }
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
