//! `myoshift`: synthesize data, pre-train, adapt, fine-tune, evaluate,
//! gradient-check and sweep from the command line.
//!
//! Exit codes: 0 success, 1 failure, 2 invalid configuration, 3 shape or
//! compatibility mismatch between data and checkpoint.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use myoshift::eval::Method;

use crate::config::{ConfigError, Options, RunConfig};

#[derive(Parser)]
#[command(
    name = "myoshift",
    version,
    about = "Two-stage recurrent domain adaptation for sEMG gestures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (and a shifted copy with --shift)
    Synth(Options),
    /// Stage 1: train the classifier with the adaptation layer frozen at identity
    Pretrain(Options),
    /// Stage 2: train only the adaptation layer on target data
    Adapt(Options),
    /// Baseline: fine-tune every parameter on target data
    Finetune(Options),
    /// Score a checkpoint on a dataset
    Eval(Options),
    /// Compare analytic gradients with finite differences
    Gradcheck(Options),
    /// Adaptation vs fine-tuning over growing data budgets
    Sweep(Options),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<myoshift::Error>() {
        Some(myoshift::Error::Shape(_) | myoshift::Error::ChannelMismatch { .. }) => 3,
        Some(myoshift::Error::InvalidArgument(_) | myoshift::Error::UnsupportedMode(_)) => 2,
        _ => 1,
    }
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MYOSHIFT_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| config::config_error(format!("MYOSHIFT_THREADS must be a number, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    init_threads()?;
    let (name, opts) = match &cli.command {
        Command::Synth(o) => ("synth", o),
        Command::Pretrain(o) => ("pretrain", o),
        Command::Adapt(o) => ("adapt", o),
        Command::Finetune(o) => ("finetune", o),
        Command::Eval(o) => ("eval", o),
        Command::Gradcheck(o) => ("gradcheck", o),
        Command::Sweep(o) => ("sweep", o),
    };
    let cfg = RunConfig::resolve(name, opts)?;
    match cli.command {
        Command::Synth(_) => commands::synth(&cfg)?,
        Command::Pretrain(_) => commands::pretrain(&cfg)?,
        Command::Adapt(_) => commands::adapt(&cfg, Method::Adapt)?,
        Command::Finetune(_) => commands::adapt(&cfg, Method::FineTune)?,
        Command::Eval(_) => commands::eval(&cfg)?,
        Command::Gradcheck(_) => return commands::gradcheck(&cfg),
        Command::Sweep(_) => commands::sweep(&cfg)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
