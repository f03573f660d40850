mod config;
mod output;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use nitsche::analysis::convergence_study;
use nitsche::energy::{classify, Problem};

use config::{ConfigError, StudyConfig};
use plot::PlotError;

#[derive(Parser)]
#[command(name = "nitsche", version, about = "Finite-element convergence studies for convex energies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the convergence study described by a TOML configuration file.
    Run { config: PathBuf },
    /// List the built-in problems with their energies and classification.
    ListProblems,
    /// Write gnuplot data files and a script from a rates.csv table.
    Plot {
        rates: PathBuf,
        /// Polynomial order for the reference slopes (inferred when absent).
        #[arg(long)]
        order: Option<usize>,
        /// Directory for the generated files (defaults to the table's directory).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("study failed: {0}")]
    Solver(#[from] nitsche::Error),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("checks failed")]
    ChecksFailed,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::ChecksFailed => 1,
            CliError::Config(_) | CliError::Plot(_) => 2,
            CliError::Solver(_) | CliError::Output { .. } => 3,
        }
    }
}

fn configure_threads() {
    let Ok(value) = std::env::var("NITSCHE_THREADS") else { return };
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not configure {n} worker threads: {e}");
            }
        }
        _ => log::warn!("ignoring NITSCHE_THREADS={value:?}: expected a positive integer"),
    }
}

fn write_all(dir: &Path, files: &[(&str, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.into(), source })?;
    for (name, content) in files {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|source| CliError::Output { path, source })?;
    }
    Ok(())
}

fn run(config_path: &Path) -> Result<(), CliError> {
    let config = StudyConfig::load(config_path)?;
    let problem = config.problem.manufactured(config.dim)?;
    log::info!("running {} d={} m={} with {} levels", problem.name, config.dim, config.order, config.levels);
    let report = convergence_study(&problem, config.order, &config.study_options())?;
    let files = [
        ("rates.csv", output::rates_csv(&report)),
        ("diagnostics.csv", output::diagnostics_csv(&report)),
        ("report.txt", output::report_text(&report)),
    ];
    write_all(&config.output_dir, &files)?;
    print!("{}", files[2].1);
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed)
    }
}

fn list_problems() -> Result<(), CliError> {
    for p in Problem::ALL {
        let model = p.manufactured(1)?.model;
        println!("{:<16} {:<40} {}", p.name(), p.energy_formula(), classify(model.as_ref()));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(config),
        Command::ListProblems => list_problems(),
        Command::Plot { rates, order, out_dir } => plot::plot(rates, *order, out_dir.as_deref())
            .map(|paths| {
                for p in paths {
                    println!("wrote {}", p.display());
                }
            })
            .map_err(CliError::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
