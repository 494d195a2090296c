use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use myoshift::data::{load_dataset, save_dataset, Dataset};
use myoshift::eval::{
    data_budget_sweep, run_scenario, segment_all, EvalReport, Method, Scenario, ScenarioOptions, Windowing,
};
use myoshift::model::checkpoint::{load_checkpoint, save_checkpoint};
use myoshift::model::{Model, ModelConfig};
use myoshift::signal::{Pipeline, Sequence};
use myoshift::synth::{apply_domain_shift, generate_synthetic, make_shift};
use myoshift::training::{grad_check_with, train_stage1, GradCheckOptions, Stage, TrainConfig};
use myoshift::{Matrix, Real};

use crate::config::{config_error, Precision, RunConfig};

pub const CHECKPOINT_NAME: &str = "model.json";

/// Loads, filters and (unless already done) preprocesses a dataset.
fn load(cfg: &RunConfig) -> anyhow::Result<Dataset> {
    let path = cfg.data()?;
    let mut ds = load_dataset(path).with_context(|| format!("loading {}", path.display()))?;
    if cfg.subject.is_some() || cfg.session.is_some() {
        ds = ds.filtered(|r| {
            cfg.subject.is_none_or(|s| r.subject_id == s) && cfg.session.is_none_or(|e| r.session_id == e)
        });
        if ds.recordings.is_empty() {
            return Err(config_error("subject/session filter selects no recordings"));
        }
    }
    if !ds.meta.preprocessed {
        info!("preprocessing {} recordings", ds.recordings.len());
        ds = ds.preprocess(&Pipeline::for_rate(ds.meta.rate_hz))?;
    }
    Ok(ds)
}

fn windowing(cfg: &RunConfig, ds: &Dataset) -> Windowing {
    Windowing::from_ms(cfg.window_ms, cfg.stride_ms, ds.meta.rate_hz)
}

fn train_config(cfg: &RunConfig, stage: Stage) -> TrainConfig {
    TrainConfig::new(stage)
        .epochs(cfg.epochs)
        .batch_size(cfg.batch)
        .seed(cfg.seed)
        .lr(cfg.lr)
}

fn write(path: PathBuf, contents: String) -> anyhow::Result<()> {
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn synth(cfg: &RunConfig) -> anyhow::Result<()> {
    let out = cfg.out_dir()?;
    let ds = generate_synthetic(&cfg.synth, cfg.seed)?;
    let manifest = save_dataset(&ds, &out.join("source"))?;
    println!("{}", manifest.display());
    if let Some(kind) = cfg.shift {
        let shift = make_shift(kind.into(), cfg.synth.channels, cfg.seed)?;
        let shifted = apply_domain_shift(&ds, &shift, None)?;
        let manifest = save_dataset(&shifted, &out.join("shifted"))?;
        let rows: Vec<&[f64]> = shift.a.row_iter().collect();
        write(
            out.join("shift.json"),
            serde_json::to_string_pretty(&json!({ "kind": kind, "a": rows, "c": shift.c }))?,
        )?;
        println!("{}", manifest.display());
    }
    Ok(())
}

pub fn pretrain(cfg: &RunConfig) -> anyhow::Result<()> {
    match cfg.precision {
        Precision::F64 => pretrain_as::<f64>(cfg),
        Precision::F32 => pretrain_as::<f32>(cfg),
    }
}

fn pretrain_as<T: Real>(cfg: &RunConfig) -> anyhow::Result<()> {
    let ds = load(cfg)?;
    let out = cfg.out_dir()?;
    let source = segment_all(&ds.recordings, windowing(cfg, &ds))?;
    let model_cfg = ModelConfig::new(ds.meta.channels, cfg.hidden, ds.meta.gestures, cfg.layers)
        .with_head_units(cfg.head_units)
        .with_dropout(cfg.dropout);
    let init = Model::<T>::init(model_cfg, cfg.seed)?;
    info!(
        "pre-training {} parameters on {} windows",
        init.param_count(None),
        source.len()
    );
    let (model, history) = train_stage1(&init, &source, &train_config(cfg, Stage::Pretrain))?;
    history.write_csv(&out.join("history.csv"))?;
    let manifest = out.join(CHECKPOINT_NAME);
    save_checkpoint(&model, &manifest)?;
    println!(
        "final training accuracy {:.2}%",
        history.accuracy.last().copied().unwrap_or(0.0)
    );
    println!("{}", manifest.display());
    Ok(())
}

pub fn adapt(cfg: &RunConfig, method: Method) -> anyhow::Result<()> {
    if cfg.scenario == 1 {
        return Err(config_error("adaptation runs scenario 2 or 3"));
    }
    match cfg.precision {
        Precision::F64 => adapt_as::<f64>(cfg, method),
        Precision::F32 => adapt_as::<f32>(cfg, method),
    }
}

fn scenario_run<T: Real>(cfg: &RunConfig, method: Method) -> anyhow::Result<myoshift::eval::ScenarioRun<T>> {
    let model: Model<T> = load_checkpoint(cfg.checkpoint()?)?;
    let ds = load(cfg)?;
    let scenario = Scenario::try_from(cfg.scenario)?;
    let opts = ScenarioOptions {
        fraction: cfg.fraction,
        method,
        source_keys: None,
    };
    let w = windowing(cfg, &ds);
    Ok(run_scenario(
        &model,
        &ds,
        scenario,
        &train_config(cfg, method.stage()),
        w,
        &opts,
    )?)
}

fn write_report(dir: &Path, report: &EvalReport) -> anyhow::Result<()> {
    write(dir.join("report.json"), report.to_json()?)?;
    write(dir.join("report.csv"), report.to_csv()?)
}

fn print_report(report: &EvalReport) {
    println!("scenario {} accuracy {:.2}%", report.scenario, report.mean_accuracy);
    if report.train_on_test {
        println!("note: scenario 2 evaluates on its own adaptation data");
    }
}

fn adapt_as<T: Real>(cfg: &RunConfig, method: Method) -> anyhow::Result<()> {
    let out = cfg.out_dir()?;
    let run = scenario_run::<T>(cfg, method)?;
    if let Some(history) = &run.history {
        history.write_csv(&out.join("history.csv"))?;
    }
    write_report(out, &run.report)?;
    let manifest = out.join(CHECKPOINT_NAME);
    save_checkpoint(&run.model, &manifest)?;
    print_report(&run.report);
    println!("{}", manifest.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> anyhow::Result<()> {
    let report = match cfg.precision {
        Precision::F64 => scenario_run::<f64>(cfg, Method::Adapt)?.report,
        Precision::F32 => scenario_run::<f32>(cfg, Method::Adapt)?.report,
    };
    if cfg.out.is_some() {
        write_report(cfg.out_dir()?, &report)?;
    }
    print_report(&report);
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> anyhow::Result<()> {
    let out = cfg.out_dir()?;
    let model: Model<f64> = load_checkpoint(cfg.checkpoint()?)?;
    let ds = load(cfg)?;
    let w = windowing(cfg, &ds);
    let report = data_budget_sweep(
        &model,
        &ds,
        &cfg.fractions,
        cfg.epochs,
        &train_config(cfg, Stage::Adapt),
        w,
    )?;
    let csv = report.to_csv()?;
    write(out.join("sweep.csv"), csv.clone())?;
    write(out.join("sweep.json"), report.to_json()?)?;
    print!("{csv}");
    Ok(())
}

/// Returns whether the check passed.
pub fn gradcheck(cfg: &RunConfig) -> anyhow::Result<bool> {
    if cfg.precision == Precision::F32 {
        // surfaces the library's unsupported-mode error
        let model = Model::<f32>::init(ModelConfig::new(4, 8, 3, 2), cfg.seed)?;
        grad_check_with(&model, &[], &GradCheckOptions::default())?;
    }
    let model: Model<f64> = match &cfg.checkpoint {
        Some(path) => load_checkpoint(path)?,
        None => Model::init(
            ModelConfig::new(4, 8, 3, 2)
                .with_head_units(cfg.head_units)
                .with_dropout(cfg.dropout),
            cfg.seed,
        )?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let f = model.features();
    let batch: Vec<Sequence> = (0..2)
        .map(|_| {
            let data = (0..5 * f).map(|_| rng.gen_range(-2.0..2.0)).collect();
            Ok(Sequence::new(
                Matrix::from_vec(5, f, data)?,
                rng.gen_range(0..model.gestures()) as u32,
            ))
        })
        .collect::<myoshift::Result<_>>()?;
    let report = grad_check_with(
        &model,
        &batch,
        &GradCheckOptions {
            eps: 1e-5,
            max_params: cfg.max_params,
            seed: cfg.seed,
        },
    )?;
    let text = serde_json::to_string_pretty(&report)?;
    if cfg.out.is_some() {
        write(cfg.out_dir()?.join("gradcheck.json"), text.clone())?;
    }
    println!("{text}");
    println!(
        "max relative error {:.3e} over {} scalars: {}",
        report.max_rel_err,
        report.checked,
        if report.passed() { "ok" } else { "FAILED" }
    );
    Ok(report.passed())
}
