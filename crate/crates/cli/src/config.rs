use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use myoshift::synth::{ShiftKind, SynthSpec};

/// Bad flags, config file or missing inputs; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shift {
    Rotation,
    Permutation,
    Random,
}

impl From<Shift> for ShiftKind {
    fn from(s: Shift) -> Self {
        match s {
            Shift::Rotation => ShiftKind::Rotation,
            Shift::Permutation => ShiftKind::Permutation,
            Shift::Random => ShiftKind::Random,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

/// Every option a command can take. Flags and the JSON config file share
/// this shape; flags win over the file, the file wins over defaults.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// JSON file with any of these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Dataset manifest or directory
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Checkpoint manifest
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub window_ms: Option<f64>,
    #[arg(long)]
    pub stride_ms: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub scenario: Option<u8>,
    /// Share of target trials used for adaptation in scenario 3
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Budget fractions for the sweep, comma separated
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub shift: Option<Shift>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    /// LSTM units per layer
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub head_units: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Only use recordings of this subject
    #[arg(long)]
    pub subject: Option<u32>,
    /// Only use recordings of this session
    #[arg(long)]
    pub session: Option<u32>,
    /// Scalars to sample in gradcheck (all when absent)
    #[arg(long)]
    pub max_params: Option<usize>,
    #[arg(long)]
    pub gestures: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long)]
    pub sessions: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(skip)]
    pub synth: Option<SynthSpec>,
}

macro_rules! prefer {
    ($flags:expr, $file:expr; $($field:ident),* $(,)?) => {
        Options {
            config: $flags.config.clone(),
            $($field: $flags.$field.clone().or_else(|| $file.$field.clone()),)*
        }
    };
}

impl Options {
    fn merged(&self, file: &Options) -> Options {
        prefer!(self, file;
            data, checkpoint, out, seed, epochs, batch, lr, window_ms, stride_ms, scenario,
            fraction, fractions, shift, precision, hidden, layers, head_units, dropout,
            subject, session, max_params, gestures, channels, subjects, sessions, trials,
            frames, noise, synth,
        )
    }
}

/// Effective settings after precedence is applied; echoed next to outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub window_ms: f64,
    pub stride_ms: f64,
    pub scenario: u8,
    pub fraction: f64,
    pub fractions: Vec<f64>,
    pub shift: Option<Shift>,
    pub precision: Precision,
    pub hidden: usize,
    pub layers: usize,
    pub head_units: usize,
    pub dropout: f64,
    pub subject: Option<u32>,
    pub session: Option<u32>,
    pub max_params: Option<usize>,
    pub synth: SynthSpec,
}

impl RunConfig {
    pub fn resolve(command: &str, flags: &Options) -> anyhow::Result<Self> {
        let file = match &flags.config {
            Some(path) => read_config(path)?,
            None => Options::default(),
        };
        let o = flags.merged(&file);
        let mut synth = o.synth.clone().unwrap_or_default();
        macro_rules! synth_override {
            ($($opt:ident => $field:ident),*) => {
                $(if let Some(v) = o.$opt { synth.$field = v; })*
            };
        }
        synth_override!(gestures => gestures, channels => channels, subjects => subjects,
            sessions => sessions, trials => trials, frames => frames, noise => noise_std);
        let default_epochs = if command == "sweep" {
            myoshift::eval::SWEEP_EPOCHS
        } else {
            myoshift::training::DEFAULT_EPOCHS
        };
        let default_scenario = match command {
            "eval" => 1,
            _ => 3,
        };
        Ok(Self {
            command: command.to_string(),
            data: o.data,
            checkpoint: o.checkpoint,
            out: o.out,
            seed: o.seed.unwrap_or(0),
            epochs: o.epochs.unwrap_or(default_epochs),
            batch: o.batch.unwrap_or(myoshift::training::DEFAULT_BATCH),
            lr: o.lr.unwrap_or(myoshift::training::DEFAULT_LR),
            window_ms: o.window_ms.unwrap_or(150.0),
            stride_ms: o.stride_ms.unwrap_or(150.0),
            scenario: o.scenario.unwrap_or(default_scenario),
            fraction: o.fraction.unwrap_or(myoshift::eval::DEFAULT_ADAPT_FRACTION),
            fractions: o.fractions.unwrap_or_else(|| myoshift::eval::SWEEP_FRACTIONS.to_vec()),
            shift: o.shift,
            precision: o.precision.unwrap_or_default(),
            hidden: o.hidden.unwrap_or(512),
            layers: o.layers.unwrap_or(myoshift::model::DEFAULT_LAYERS),
            head_units: o.head_units.unwrap_or(myoshift::model::DEFAULT_HEAD_UNITS),
            dropout: o.dropout.unwrap_or(myoshift::model::DEFAULT_DROPOUT),
            subject: o.subject,
            session: o.session,
            max_params: o.max_params,
            synth,
        })
    }

    pub fn data(&self) -> anyhow::Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| config_error(format!("{} needs --data", self.command)))
    }

    pub fn checkpoint(&self) -> anyhow::Result<&Path> {
        self.checkpoint
            .as_deref()
            .ok_or_else(|| config_error(format!("{} needs --checkpoint", self.command)))
    }

    /// Creates the output directory and writes the effective config into it.
    pub fn out_dir(&self) -> anyhow::Result<&Path> {
        let out = self
            .out
            .as_deref()
            .ok_or_else(|| config_error(format!("{} needs --out", self.command)))?;
        self.echo(out)?;
        Ok(out)
    }

    pub fn echo(&self, dir: &Path) -> anyhow::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn read_config(path: &Path) -> anyhow::Result<Options> {
    let text =
        fs::read_to_string(path).map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("invalid config {}: {e}", path.display())))
}
