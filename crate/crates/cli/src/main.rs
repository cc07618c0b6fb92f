//! `odl`: run opinion-dynamics simulations, sweep parameter grids, classify
//! attitude distributions, and fit update-rule estimators to trial data.
//!
//! Exit codes: 0 success, 1 validation (bad config, arguments, or input
//! data), 2 runtime (I/O or engine failure). `ODL_LOG` picks the log level
//! (error, warn, info, debug); logs go to stderr.

use odl_cli::{analyze, config, run, sweep};

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::{RunConfig, SweepConfig};

#[derive(Parser)]
#[command(name = "odl", version, about = "Opinion dynamics: simulate, sweep, classify, fit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write trajectory.csv plus classification.json.
    Simulate {
        /// Run config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's out_dir, then `.`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter grid and write sweep.csv.
    Sweep {
        /// Sweep config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Worker count; defaults to the config's jobs, then 1.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Classify attitudes from a trajectory or plain-list CSV.
    Classify {
        #[arg(long)]
        input: PathBuf,
        /// Classification half-width: attitudes live in [-bound, bound].
        #[arg(long)]
        bound: f64,
        /// Absolute extremity threshold; defaults to 0.8 * bound.
        #[arg(long = "eps-ext")]
        eps_ext: Option<f64>,
    },
    /// Fit an estimator to a trial table.
    Fit {
        #[command(subcommand)]
        estimator: FitCommand,
    },
}

#[derive(Subcommand)]
enum FitCommand {
    /// Susceptibility per subject from `subject,a_initial,m_avg,a_updated`.
    Alpha {
        #[arg(long)]
        input: PathBuf,
    },
    /// Trust curve from two-source trials `subject,a_initial,m_m,m_n,a_final`.
    Hew {
        #[arg(long)]
        input: PathBuf,
    },
}

enum AppError {
    Validation(String),
    Runtime(String),
}

fn validation(e: impl std::fmt::Display) -> AppError {
    AppError::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> AppError {
    AppError::Runtime(e.to_string())
}

fn read_input(path: &Path) -> Result<String, AppError> {
    fs::read_to_string(path).map_err(|e| runtime(format!("read {}: {e}", path.display())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ODL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Simulate { config, seed, out } => simulate_cmd(&config, seed, out),
        Command::Sweep { config, jobs } => sweep_cmd(&config, jobs),
        Command::Classify {
            input,
            bound,
            eps_ext,
        } => classify_cmd(&input, bound, eps_ext),
        Command::Fit { estimator } => match estimator {
            FitCommand::Alpha { input } => fit_cmd(&input, analyze::fit_alpha),
            FitCommand::Hew { input } => fit_cmd(&input, analyze::fit_hew),
        },
    }
}

fn simulate_cmd(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), AppError> {
    let mut cfg = RunConfig::from_json(&read_input(path)?).map_err(validation)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let out_dir = out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let outcome = run::execute(&cfg).map_err(run_error)?;
    let paths = run::write_outputs(&outcome, &out_dir).map_err(runtime)?;
    log::info!(
        "wrote {} and {}",
        paths.trajectory.display(),
        paths.classification.display()
    );
    println!("{}", run::classification_json(&outcome));
    Ok(())
}

fn run_error(e: run::RunError) -> AppError {
    match e {
        // Topology parameters are config data; everything else at this
        // point is a failure of the run itself.
        run::RunError::Topology(_) => validation(e),
        _ => runtime(e),
    }
}

fn sweep_cmd(path: &Path, jobs: Option<usize>) -> Result<(), AppError> {
    let cfg = SweepConfig::from_json(&read_input(path)?).map_err(validation)?;
    let jobs = match jobs.or(cfg.jobs) {
        Some(0) => return Err(AppError::Validation("jobs must be at least 1".into())),
        Some(j) => j,
        None => 1,
    };
    let rows = sweep::run_sweep(&cfg, jobs).map_err(runtime)?;
    let out_dir = cfg
        .base
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir).map_err(runtime)?;
    let table = out_dir.join("sweep.csv");
    sweep::write_table(&cfg, &rows, &table).map_err(runtime)?;
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    println!(
        "wrote {} ({} rows, {} failed)",
        table.display(),
        rows.len(),
        failed
    );
    Ok(())
}

fn classify_cmd(input: &Path, bound: f64, eps_ext: Option<f64>) -> Result<(), AppError> {
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(AppError::Validation(format!(
            "--bound must be positive, got {bound}"
        )));
    }
    let attitudes = analyze::read_attitudes(&read_input(input)?).map_err(validation)?;
    let doc = analyze::classify_attitudes(&attitudes, bound, eps_ext).map_err(validation)?;
    println!("{}", serde_json::to_string_pretty(&doc).map_err(runtime)?);
    Ok(())
}

fn fit_cmd(
    input: &Path,
    fitter: fn(&str) -> Result<serde_json::Value, analyze::AnalyzeError>,
) -> Result<(), AppError> {
    let doc = fitter(&read_input(input)?).map_err(validation)?;
    println!("{}", serde_json::to_string_pretty(&doc).map_err(runtime)?);
    Ok(())
}
