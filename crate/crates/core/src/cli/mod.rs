//! The `woplab` command line: one JSON config drives data generation,
//! training, evaluation, the retained-modes ablation and solver checks.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::autodiff::{AutodiffError, ModelKind};
use crate::data::{DataError, Split};
use crate::evaluation::EvalError;
use crate::operators::OperatorError;
use crate::solver::{SolverError, TimeStart};
use crate::trainer::TrainError;

mod commands;
mod config;
mod manifest;

pub use commands::{
    checkpoint_name, cmd_ablate, cmd_evaluate, cmd_gen_data, cmd_pipeline, cmd_train, cmd_verify_solver, error_ratios,
    load_all_splits, load_model, load_split, manifest_name, sidecar_path, training_log_name, training_timings_name,
    Console, RunLayout, TrainOutcome, VerifyReport,
};
pub use config::{apply_override, AblationSettings, EvaluationSettings, RunConfig, VerifySettings, THREADS_ENV};
pub use manifest::{sha256_hex, Artifact, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {reason}")]
    Config { path: String, reason: String },
    #[error("{split} split not found at {}", path.display())]
    MissingSplit { split: Split, path: PathBuf },
    #[error("{}: {source}", path.display())]
    Dataset { path: PathBuf, source: DataError },
    #[error("{}: {source}", path.display())]
    Checkpoint { path: PathBuf, source: AutodiffError },
    #[error("{}: {source}", path.display())]
    Model { path: PathBuf, source: OperatorError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("solver verification failed: {0}")]
    VerificationFailed(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything that went wrong
    /// while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "woplab",
    version,
    about = "Operator-learning testbed for the 1D variable-speed wave equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// JSON run config; defaults apply to anything it leaves out.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one field, e.g. `--set train.max_epochs=1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Fno,
    Deeponet,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Fno => ModelKind::Fno,
            ModelArg::Deeponet => ModelKind::DeepOnet,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the five dataset splits.
    GenData {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory [default: <out_dir>/data].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model and write its best checkpoint and logs.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Dataset directory [default: <out_dir>/data].
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory [default: <out_dir>/models].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metrics, modal error curves and representative cases.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Checkpoint to evaluate. Repeatable [default: both models under
        /// <out_dir>/models].
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory [default: <out_dir>/eval].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one FNO per retained-mode setting and tabulate the errors.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory [default: <out_dir>/ablation].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Order of accuracy, energy drift and supercritical blow-up checks.
    VerifySolver {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory [default: <out_dir>/verify].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Horizon of the convergence study.
        #[arg(long)]
        terminal_time: Option<f64>,
        /// Start with u^1 = u^0 (first order) to exercise the failure path.
        #[arg(long, hide = true)]
        inject_first_order: bool,
    },
    /// Verify, generate, train both models, evaluate and ablate.
    Pipeline {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print the default config as JSON.
    DefaultConfig,
}

fn load(args: &ConfigArgs) -> Result<(RunConfig, Console), CliError> {
    let cfg = RunConfig::load(args.config.as_deref(), &args.overrides)?.with_env_threads()?;
    Ok((cfg, Console { quiet: args.quiet }))
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData { cfg, out } => {
            let (cfg, console) = load(&cfg)?;
            let out = out.unwrap_or_else(|| RunLayout::new(&cfg.out_dir).data());
            cmd_gen_data(&cfg, &out, console)?;
        }
        Command::Train { cfg, model, data, out } => {
            let (cfg, console) = load(&cfg)?;
            let layout = RunLayout::new(&cfg.out_dir);
            let data = data.unwrap_or_else(|| layout.data());
            let out = out.unwrap_or_else(|| layout.models());
            cmd_train(&cfg, model.into(), &data, &out, console)?;
        }
        Command::Evaluate {
            cfg,
            checkpoints,
            data,
            out,
        } => {
            let (cfg, console) = load(&cfg)?;
            let layout = RunLayout::new(&cfg.out_dir);
            let checkpoints = if checkpoints.is_empty() {
                vec![
                    layout.checkpoint(ModelKind::Fno),
                    layout.checkpoint(ModelKind::DeepOnet),
                ]
            } else {
                checkpoints
            };
            let data = data.unwrap_or_else(|| layout.data());
            let out = out.unwrap_or_else(|| layout.eval());
            cmd_evaluate(&cfg, &checkpoints, &data, &out, console)?;
        }
        Command::Ablate { cfg, data, out } => {
            let (cfg, console) = load(&cfg)?;
            let layout = RunLayout::new(&cfg.out_dir);
            let data = data.unwrap_or_else(|| layout.data());
            let out = out.unwrap_or_else(|| layout.ablation());
            cmd_ablate(&cfg, &data, &out, console)?;
        }
        Command::VerifySolver {
            cfg,
            out,
            terminal_time,
            inject_first_order,
        } => {
            let (mut cfg, console) = load(&cfg)?;
            if let Some(t) = terminal_time {
                cfg.verify.terminal_time = t;
            }
            let out = out.unwrap_or_else(|| RunLayout::new(&cfg.out_dir).verify());
            let start = if inject_first_order {
                TimeStart::Frozen
            } else {
                TimeStart::Taylor
            };
            cmd_verify_solver(&cfg, start, &out, console)?;
        }
        Command::Pipeline { cfg } => {
            let (cfg, console) = load(&cfg)?;
            cmd_pipeline(&cfg, console)?;
        }
        Command::DefaultConfig => print!("{}", RunConfig::default().to_json()),
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command. Usage errors
/// exit with 2, runtime failures with 1.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
