//! Command-line surface: `simulate`, `train`, `evaluate`, `sweep`.

mod commands;
mod config;
mod model_spec;

pub use commands::{
    build_physical, cmd_evaluate, cmd_simulate, cmd_sweep, cmd_train, episode_count, episode_seed, evaluate_checkpoint,
    run_dir, simulate_episodes, sweep_experiment, train_experiment, TrainedModel, CHECKPOINT_FILE,
};
pub use config::{parse_config_text, ExperimentConfig, KEYS, OUT_ENV};
pub use model_spec::{ModelSpec, TrainingSchedule};

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "vessel-hybrid", version, about = "Hybrid physics + LSTM motion models for ships and quadcopters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate episodes and train/val/test manifests in the data directory
    Simulate(Settings),
    /// Fit the physical part and train the corrector; writes a checkpoint and history
    Train(Settings),
    /// Score a checkpoint on a manifest (the test split by default)
    Evaluate(Settings),
    /// Relative-threshold sweep of a trained checkpoint
    Sweep(Settings),
}

/// Settings shared by every command. A `--config` file of `key = value` lines is read first;
/// flags override it. The output root defaults to `$VESSEL_HYBRID_OUT`, else `runs`.
#[derive(Args, Debug, Default)]
struct Settings {
    /// flat `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// ship | quad
    #[arg(long)]
    vehicle: Option<String>,
    /// output root
    #[arg(long)]
    out_dir: Option<String>,
    /// dataset directory (default `<out_dir>/data`)
    #[arg(long)]
    data_dir: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// total simulated time in hours
    #[arg(long)]
    hours: Option<String>,
    /// length of one simulated episode in seconds
    #[arg(long)]
    episode_seconds: Option<String>,
    /// recording rate in Hz
    #[arg(long)]
    sample_rate: Option<String>,
    /// train,val,test ratios, e.g. 0.6,0.1,0.3
    #[arg(long)]
    split: Option<String>,
    /// model string FIRSTPRINCIPLES+REGRESSION-PHASE, e.g. Min+Lin-2P, QLag, LSTM-2P
    #[arg(long)]
    model: Option<String>,
    /// initialization window in steps
    #[arg(long)]
    window: Option<String>,
    /// prediction horizon in steps
    #[arg(long)]
    horizon: Option<String>,
    /// stride between training samples
    #[arg(long)]
    train_stride: Option<String>,
    /// stride between validation/test samples (default: the horizon)
    #[arg(long)]
    eval_stride: Option<String>,
    /// LSTM hidden size
    #[arg(long)]
    hidden: Option<String>,
    /// LSTM layers
    #[arg(long)]
    layers: Option<String>,
    /// QLag history length
    #[arg(long)]
    lag: Option<String>,
    #[arg(long)]
    phase1_epochs: Option<String>,
    #[arg(long)]
    phase2_epochs: Option<String>,
    /// initial free-running rollout length
    #[arg(long)]
    truncation: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    clip_norm: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    plateau: Option<String>,
    /// relative thresholds in percent, e.g. 0,5,10,15,25,50,100
    #[arg(long)]
    thresholds: Option<String>,
    /// checkpoint path (default `<out_dir>/<model>/checkpoint.json`)
    #[arg(long)]
    checkpoint: Option<String>,
    /// episode manifest to evaluate (default: the test split)
    #[arg(long)]
    manifest: Option<String>,
}

impl Settings {
    fn overrides(&self) -> [(&'static str, &Option<String>); 26] {
        [
            ("vehicle", &self.vehicle),
            ("out_dir", &self.out_dir),
            ("data_dir", &self.data_dir),
            ("seed", &self.seed),
            ("hours", &self.hours),
            ("episode_seconds", &self.episode_seconds),
            ("sample_rate", &self.sample_rate),
            ("split", &self.split),
            ("model", &self.model),
            ("window", &self.window),
            ("horizon", &self.horizon),
            ("train_stride", &self.train_stride),
            ("eval_stride", &self.eval_stride),
            ("hidden", &self.hidden),
            ("layers", &self.layers),
            ("lag", &self.lag),
            ("phase1_epochs", &self.phase1_epochs),
            ("phase2_epochs", &self.phase2_epochs),
            ("truncation", &self.truncation),
            ("learning_rate", &self.learning_rate),
            ("clip_norm", &self.clip_norm),
            ("batch_size", &self.batch_size),
            ("patience", &self.patience),
            ("plateau", &self.plateau),
            ("thresholds", &self.thresholds),
            ("checkpoint", &self.checkpoint),
        ]
    }

    fn resolve(&self) -> crate::Result<ExperimentConfig> {
        let mut entries = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                parse_config_text(&text, p)?
            }
            None => BTreeMap::new(),
        };
        let mut set = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                entries.insert(k.to_string(), v.clone());
            }
        };
        for (k, v) in self.overrides() {
            set(k, v);
        }
        set("manifest", &self.manifest);
        ExperimentConfig::from_entries(&entries)
    }
}

/// Process exit code for an error: 2 usage/config, 3 divergence, 4 I/O.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } | Error::TrainingDiverged(_) => EXIT_DIVERGENCE,
        Error::Io { .. } | Error::Format { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (program name first), runs the command and returns its exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let (settings, cmd): (&Settings, fn(&ExperimentConfig) -> crate::Result<String>) = match &cli.command {
        Command::Simulate(s) => (s, cmd_simulate),
        Command::Train(s) => (s, cmd_train),
        Command::Evaluate(s) => (s, cmd_evaluate),
        Command::Sweep(s) => (s, cmd_sweep),
    };
    match settings.resolve().and_then(|cfg| cmd(&cfg)) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
