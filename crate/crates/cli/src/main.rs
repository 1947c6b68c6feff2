mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or ill-formed configuration, unknown task, bad flag value.
    Config(String),
    /// An input file or checkpoint failed validation.
    Validation(String),
    /// Training, evaluation or I/O failed while running.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "cotrack", version, about = "Planar robot-object co-tracking: data, training, evaluation and ablations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every command that builds a run config. Precedence:
/// config file < environment < flags.
#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// TOML run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, env = "COTRACK_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "COTRACK_ASSETS")]
    pub assets: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the task's corrupted reference.
    #[arg(long)]
    pub corrupted: bool,
    #[arg(long)]
    pub total_updates: Option<usize>,
    #[arg(long)]
    pub num_envs: Option<usize>,
    #[arg(long)]
    pub rollout_len: Option<usize>,
    #[arg(long)]
    pub no_residual_action: bool,
    #[arg(long)]
    pub no_interaction_reward: bool,
    #[arg(long)]
    pub no_contact_term: bool,
    #[arg(long)]
    pub no_body_track_term: bool,
}

#[derive(Args, Debug, Default, Clone, Copy)]
pub struct EvalArgs {
    /// Remove contact-based terminations during evaluation.
    #[arg(long)]
    pub eval_disable_contact_term: bool,
    /// Remove the body tracking termination during evaluation.
    #[arg(long)]
    pub eval_disable_body_term: bool,
    /// Keep domain randomisation on during evaluation.
    #[arg(long)]
    pub eval_dr: bool,
    /// Apply RSI start noise during evaluation.
    #[arg(long)]
    pub eval_rsi: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FileKind {
    Auto,
    Motion,
    Robot,
    Object,
    Task,
    Config,
    Ablation,
}

#[derive(Subcommand)]
enum Command {
    /// Write the robot, object and reference motion files for a task.
    GenData {
        #[arg(long)]
        task: String,
        #[arg(long)]
        out: PathBuf,
        /// Apply the task's corruption with this end-effector offset, "x,z" in m.
        #[arg(long, value_name = "X,Z")]
        corrupt: Option<String>,
        #[arg(long, env = "COTRACK_ASSETS")]
        assets: Option<PathBuf>,
    },
    /// Check a data or config file.
    Validate {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        kind: FileKind,
        /// Also check a motion against this task's robot and object.
        #[arg(long)]
        task: Option<String>,
        #[arg(long, env = "COTRACK_ASSETS")]
        assets: Option<PathBuf>,
    },
    /// Train a policy and write a checkpoint and training log.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate a checkpoint and write per-episode metrics.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        n_envs: Option<usize>,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run an ablation grid and write its table.
    Ablate {
        spec: PathBuf,
        /// Comma-separated seeds replacing the spec's.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        eval_envs: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Convert outputs for plotting.
    Export {
        #[command(subcommand)]
        what: ExportCommand,
    },
}

#[derive(Subcommand)]
enum ExportCommand {
    /// Training log (JSON lines) to CSV.
    Log {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Body poses of one evaluation episode, one JSON object per step.
    Frames {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out_file: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        run: RunArgs,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData { task, out, corrupt, assets } => commands::gen_data(&task, &out, corrupt.as_deref(), assets),
        Command::Validate { path, kind, task, assets } => commands::validate(&path, kind, task.as_deref(), assets),
        Command::Train { run } => commands::train(&run).map(|_| ()),
        Command::Eval { checkpoint, n_envs, eval, run } => commands::eval(&checkpoint, n_envs, &eval, &run).map(|_| ()),
        Command::Ablate { spec, seeds, eval_envs, run } => commands::ablate(&spec, seeds, eval_envs, &run).map(|_| ()),
        Command::Export { what } => match what {
            ExportCommand::Log { input, out } => commands::export_log(&input, &out),
            ExportCommand::Frames { checkpoint, out_file, eval, run } => commands::export_frames(&checkpoint, &out_file, &eval, &run),
        },
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cotrack: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
