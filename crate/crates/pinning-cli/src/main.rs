//! `pinning` — exact computation and sampling for one-dimensional pinning
//! models on renewal processes.
//!
//! Subcommands:
//! - `validate`    check a configuration without running it
//! - `run`         run an experiment and write its CSV artifact
//! - `pure-curves` tabulate closed-form pure-model curves
//! - `dp-dump`     dump every table the engine computes for one environment
//!
//! Exit codes: 0 success, 1 invalid input or refused overwrite, 2 runtime
//! failure.

mod config;
mod csvout;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use runner::RunError;

#[derive(Parser)]
#[command(
    name = "pinning",
    version,
    about = "Exact computation and sampling for one-dimensional pinning models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate an experiment configuration.
    Validate {
        /// Experiment configuration (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an experiment and write `<name>.csv` into the output directory.
    Run {
        /// Experiment configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Directory for CSV artifacts.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Replace an existing artifact even if it came from a different
        /// configuration.
        #[arg(long)]
        force: bool,
        /// Worker threads (default: PINNING_WORKERS, then the number of
        /// CPUs). Artifact bytes do not depend on this.
        #[arg(long)]
        workers: Option<usize>,
        /// Directory for cached dynamic-programming tables.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Tabulate free energy, contact density, variance coefficient, and
    /// rate function of the pure model.
    PureCurves {
        /// Gap-law description (TOML).
        #[arg(long)]
        law: PathBuf,
        /// Evaluation grid: `h = [...]` and optional `r = [...]` (TOML).
        #[arg(long)]
        grid: PathBuf,
        /// Directory for CSV artifacts.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Replace existing artifacts from a different input.
        #[arg(long)]
        force: bool,
    },
    /// Dump partition values, suffix weights, contact marginals, and the
    /// contact-number law for one environment.
    DpDump {
        /// Dump configuration (TOML): law, disorder, `n`, `h`.
        #[arg(long)]
        config: PathBuf,
        /// Directory for CSV artifacts.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Replace an existing artifact from a different configuration.
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                RunError::Invalid(_) | RunError::Refused(_) => ExitCode::from(1),
                RunError::Runtime(_) => ExitCode::from(2),
            }
        }
    }
}

fn read_input(path: &PathBuf) -> Result<Vec<u8>, RunError> {
    std::fs::read(path)
        .map_err(|e| RunError::Invalid(vec![format!("cannot read {}: {e}", path.display())]))
}

fn resolve_workers(flag: Option<usize>) -> Result<usize, RunError> {
    if let Some(w) = flag {
        if w == 0 {
            return Err(RunError::Invalid(vec!["--workers must be >= 1".into()]));
        }
        return Ok(w);
    }
    if let Ok(raw) = std::env::var("PINNING_WORKERS") {
        let w: usize = raw.parse().map_err(|_| {
            RunError::Invalid(vec![format!("PINNING_WORKERS={raw} is not a positive integer")])
        })?;
        if w == 0 {
            return Err(RunError::Invalid(vec!["PINNING_WORKERS must be >= 1".into()]));
        }
        return Ok(w);
    }
    Ok(std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1))
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Validate { config } => {
            let bytes = read_input(&config)?;
            let loaded = config::parse_config(&bytes).map_err(|e| RunError::Invalid(vec![e]))?;
            let errors = config::validate(&loaded.config);
            if !errors.is_empty() {
                return Err(RunError::Invalid(errors));
            }
            println!(
                "ok: {} ({}) config_hash={}",
                loaded.config.name,
                experiment_label(&loaded.config),
                loaded.hash
            );
            Ok(())
        }
        Command::Run { config, out_dir, force, workers, cache_dir } => {
            let bytes = read_input(&config)?;
            let loaded = config::parse_config(&bytes).map_err(|e| RunError::Invalid(vec![e]))?;
            let workers = resolve_workers(workers)?;
            let path =
                runner::run_experiment(&loaded, &out_dir, force, workers, cache_dir.as_deref())?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::PureCurves { law, grid, out_dir, force } => {
            let law_bytes = read_input(&law)?;
            let grid_bytes = read_input(&grid)?;
            for path in runner::run_pure_curves(&law_bytes, &grid_bytes, &out_dir, force)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::DpDump { config, out_dir, force } => {
            let bytes = read_input(&config)?;
            let path = runner::run_dp_dump(&bytes, &out_dir, force)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn experiment_label(cfg: &config::ExperimentConfig) -> &'static str {
    use config::Experiment::*;
    match cfg.experiment {
        BigJumpGaps { .. } => "big_jump_gaps",
        LogGaps { .. } => "log_gaps",
        DisorderGapContrast { .. } => "disorder_gap_contrast",
        LcltLadder { .. } => "lclt_ladder",
        RateGrid { .. } => "rate_grid",
        WindowProfile { .. } => "window_profile",
        UmodelCompare { .. } => "umodel_compare",
        SoftConditioning { .. } => "soft_conditioning",
    }
}
