//! The `emllm` command line: synthesize recordings, train and evaluate the
//! stress classifier, replay a recording through the streaming monitor and
//! run the chat service.
//!
//! Every subcommand prints exactly one JSON document on stdout; logs go to
//! stderr. Exit codes: 0 success, 1 usage, 2 data error, 3 runtime error.

mod commands;
pub mod config;
pub mod data;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emllm_core::Exec;
use serde::{Deserialize, Serialize};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "emllm", version, about = "Wearable stress inference and stress-aware chat")]
pub struct Cli {
    /// TOML or JSON file with one table per subcommand, keys as long flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Repeat for more log output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic recordings with scripted stress intervals.
    Synth(SynthArgs),
    /// Train a model and report metrics on a held-out split.
    Train(TrainArgs),
    /// Score a model on recordings, or run leave-one-subject-out.
    Eval(EvalArgs),
    /// Stream a recording through the monitor and print the stress summary.
    Replay(ReplayArgs),
    /// Run the chat HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SynthArgs {
    /// Scenario file (TOML or JSON): one scenario, or `subjects = [...]`.
    #[arg(long, conflicts_with_all = ["subjects", "duration"])]
    pub spec: Option<PathBuf>,
    /// Number of scripted subjects [default: 4].
    #[arg(long)]
    pub subjects: Option<usize>,
    /// Recording length in seconds [default: 3600].
    #[arg(long)]
    pub duration: Option<f64>,
    /// Base seed; subject i uses seed + i [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; one subdirectory per subject.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Whole subjects when there are at least three, else windows.
    #[default]
    Auto,
    /// Individual windows, pooled over subjects.
    Random,
    /// Whole subjects.
    Subject,
}

/// Training hyperparameters shared by `train` and `eval --loso`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct TrainFlags {
    /// Epochs [default: 30].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: 32].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Seed for initialization, shuffling and splits [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epochs without validation improvement before stopping [default: 5].
    #[arg(long)]
    pub patience: Option<usize>,
    /// Smallest validation-loss drop that resets the patience counter [default: 0.0001].
    #[arg(long)]
    pub min_delta: Option<f64>,
    /// Fraction of training data used for early-stopping validation [default: 0.2].
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Hidden dense units [default: 128].
    #[arg(long)]
    pub hidden: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct TrainArgs {
    /// Recording directories, or directories containing them.
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Window length in seconds [default: 60].
    #[arg(long)]
    pub window: Option<f64>,
    /// Window shift in seconds [default: 5].
    #[arg(long)]
    pub shift: Option<f64>,
    /// Fraction held out for the test report; 0 trains on everything [default: 0.2].
    #[arg(long)]
    pub holdout: Option<f64>,
    /// How the test split is drawn [default: auto].
    #[arg(long, value_enum)]
    pub split: Option<SplitMode>,
    /// Where to write the model.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct EvalArgs {
    /// Model file. With --loso it only supplies the architecture.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Recording directories, or directories containing them.
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Window shift in seconds [default: 5].
    #[arg(long)]
    pub shift: Option<f64>,
    /// Window length when no model is given [default: 60].
    #[arg(long)]
    pub window: Option<f64>,
    /// Leave-one-subject-out: train a fresh model per held-out subject.
    #[arg(long)]
    pub loso: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ReplayArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// One recording directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Window shift in seconds [default: 5].
    #[arg(long)]
    pub shift: Option<f64>,
    /// Seconds of samples pushed per channel between ticks [default: 10].
    #[arg(long)]
    pub batch: Option<f64>,
    /// Consecutive stressed windows that make an episode [default: 3].
    #[arg(long)]
    pub min_episode: Option<usize>,
    /// Print `{summary, records}` instead of the bare summary.
    #[arg(long)]
    pub with_records: bool,
    /// Also score the recording offline and report whether the records match.
    #[arg(long)]
    pub verify_offline: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ServeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Listen address [default: 127.0.0.1:8080].
    #[arg(long)]
    pub bind: Option<String>,
    /// Session storage root [default: data].
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Chat-completion base URL; `/chat/completions` is appended.
    #[arg(long)]
    pub llm_url: Option<String>,
    #[arg(long)]
    pub llm_model: Option<String>,
    /// Per-request timeout in seconds [default: 60].
    #[arg(long)]
    pub llm_timeout: Option<f64>,
    /// Retries after the first failed request [default: 2].
    #[arg(long)]
    pub llm_retries: Option<usize>,
    /// Sampling temperature [default: 0.7].
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Monitor window shift in seconds [default: 5].
    #[arg(long)]
    pub shift: Option<f64>,
    /// Response language tag [default: en].
    #[arg(long)]
    pub locale: Option<String>,
}

fn init_logging(verbose: u8) {
    use tracing_subscriber::EnvFilter;
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Parse `args`, run the subcommand and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    match execute(cli) {
        Ok(report) => match serde_json::to_string_pretty(&report) {
            Ok(text) => {
                println!("{text}");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                3
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<serde_json::Value, CliError> {
    let config = cli.config.as_deref().map(config::read_config).transpose()?;
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let cfg = config.as_ref();
    match cli.command {
        Command::Synth(a) => commands::synth(config::merge(&a, cfg, "synth")?, exec),
        Command::Train(a) => commands::train(config::merge(&a, cfg, "train")?, exec),
        Command::Eval(a) => commands::eval(config::merge(&a, cfg, "eval")?, exec),
        Command::Replay(a) => commands::replay(config::merge(&a, cfg, "replay")?, exec),
        Command::Serve(a) => commands::serve(config::merge(&a, cfg, "serve")?),
    }
}
