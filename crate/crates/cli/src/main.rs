//! Experiment runner. Every subcommand reads one TOML config, runs the
//! corresponding library operation, and writes one CSV table plus one JSON
//! summary into the output directory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.
//! `--threads` resizes the worker pool and can only change wall-clock time;
//! all randomness is counter-based, so outputs are byte-identical for any
//! thread count.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use error::CliError;
use output::OutputWriter;

#[derive(Parser)]
#[command(name = "cbo", version, about = "consensus-optimization experiments")]
struct Cli {
    /// Path to the experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (speed only; results are thread-count independent).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the consensus optimizer and report the candidate minimizer.
    Optimize,
    /// Ensemble-size scaling of the weak-solution residual.
    FphiScaling,
    /// Wasserstein distance of final ensembles to a reference law.
    MeanfieldConverge,
    /// Softmin values against the min/min+log(N)/alpha bracket.
    Laplace,
    /// Final-time histogram distance between particle runs and the grid
    /// solution.
    PdeCompare,
    /// Second-order swarm run with moment diagnostics.
    Pso,
    /// Probe the cost-regularity conditions on random samples.
    Assumptions,
    /// Time-increment moments against the sqrt(delta) + delta envelope.
    IncrementProbe,
}

impl Command {
    fn run(self, cfg: &ExperimentConfig, out: &OutputWriter) -> Result<(), CliError> {
        match self {
            Command::Optimize => commands::cmd_optimize(cfg, out),
            Command::FphiScaling => commands::cmd_fphi_scaling(cfg, out),
            Command::MeanfieldConverge => commands::cmd_meanfield_converge(cfg, out),
            Command::Laplace => commands::cmd_laplace(cfg, out),
            Command::PdeCompare => commands::cmd_pde_compare(cfg, out),
            Command::Pso => commands::cmd_pso(cfg, out),
            Command::Assumptions => commands::cmd_assumptions(cfg, out),
            Command::IncrementProbe => commands::cmd_increment_probe(cfg, out),
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be >= 1".into()));
        }
        // ignore the error when a pool already exists (tests call run twice)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("--config <path> is required".into()))?;
    let cfg = ExperimentConfig::load(config_path)?;
    let writer = OutputWriter::new(&cfg, cli.out.as_deref())?;
    cli.command.run(&cfg, &writer)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
