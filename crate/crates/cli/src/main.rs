//! `spinlie` command-line tool.
//!
//! Exit codes: 0 success or affirmative verdict, 2 negative verdict,
//! 3 special outcome (unphysical partner state), 1 error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "spinlie", version, about = "Controllability, observability and identification of a coupled spin-1 pair")]
pub struct Cli {
    /// Seed for every random choice made by the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the run manifest (default: next to the primary output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recompute the su(3) structure tables and subspace relations.
    ///
    /// Reference cells that disagree with direct multiplication are listed with
    /// their recomputed coefficients; they fail the run only with `--strict`.
    VerifyTables {
        #[arg(long, default_value_t = spinlie::su3::TABLE_TOL)]
        tolerance: f64,
        /// Also require every reference cell to match.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check the parity (σ-count) grading relations.
    Cartan {
        #[arg(long, default_value_t = 2)]
        spins: usize,
        /// Check every pair of basis elements, also for three spins.
        #[arg(long)]
        exhaustive: bool,
        /// Random pairs per class pair and operation when sampling.
        #[arg(long, default_value_t = spinlie::cartan::DEFAULT_SAMPLE_PAIRS)]
        pairs: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Dimension of the dynamical Lie algebra of a model.
    Controllability {
        model: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Dimension of the observability space of a model.
    Observability {
        model: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write a Hermitian basis of the unobservable directions as matrix JSON.
        #[arg(long)]
        vperp: Option<PathBuf>,
    },
    /// Propagate a model under a control schedule and write the magnetization trace.
    Simulate {
        model: PathBuf,
        schedule: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = spinlie::dynamics::DEFAULT_SAMPLES_PER_SEGMENT)]
        samples_per_segment: usize,
        /// Also write a long-format `t,component,value` CSV.
        #[arg(long)]
        emit_plot_data: Option<PathBuf>,
    },
    /// Build the J → -J partner model and compare outputs on random schedules.
    Equivalence {
        /// Model file; defaults to (1, 2, 0.5) with the thermal initial state.
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        schedules: usize,
        #[arg(long, default_value = "equivalence")]
        out_dir: PathBuf,
        /// Negate J but keep the initial state (a control run expected to differ).
        #[arg(long)]
        unflipped: bool,
        /// Also write a long-format `schedule,model,t,component,value` CSV.
        #[arg(long)]
        emit_plot_data: Option<PathBuf>,
    },
    /// Fit couplings and initial state to an experiment directory.
    Identify {
        data_dir: PathBuf,
        /// Defaults to `<data_dir>/identification.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random starts in addition to the moment-based ones.
        #[arg(long)]
        starts: Option<usize>,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("SPINLIE_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| format!("SPINLIE_THREADS must be a positive integer, got {value:?}"))?;
    if n == 0 {
        return Err("SPINLIE_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match commands::run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
