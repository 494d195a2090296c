//! Accuracy, the three adaptation scenarios and the data-budget sweep.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{split_adaptation_trials, Dataset};
use crate::error::{Error, Result};
use crate::linalg::Real;
use crate::model::Model;
use crate::par;
use crate::signal::{ms_to_frames, segment, Provenance, Recording, RecordingKey, Sequence};
use crate::training::{adapt_stage2, fine_tune, Stage, TrainConfig, TrainHistory};

/// Share of target trials used for adaptation in scenario 3.
pub const DEFAULT_ADAPT_FRACTION: f64 = 0.5;
pub const SWEEP_FRACTIONS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
pub const SWEEP_EPOCHS: usize = 5;

/// Sliding-window geometry in frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Windowing {
    pub window: usize,
    pub stride: usize,
}

impl Windowing {
    pub fn new(window: usize, stride: usize) -> Self {
        Self { window, stride }
    }

    pub fn from_ms(window_ms: f64, stride_ms: f64, rate_hz: f64) -> Self {
        Self {
            window: ms_to_frames(window_ms, rate_hz),
            stride: ms_to_frames(stride_ms, rate_hz),
        }
    }
}

/// Segments every recording, keeping recording order.
pub fn segment_all<'a, I>(recordings: I, w: Windowing) -> Result<Vec<Sequence>>
where
    I: IntoIterator<Item = &'a Recording>,
{
    let recs: Vec<&Recording> = recordings.into_iter().collect();
    let parts = par::map(&recs, |r| segment(r, w.window, w.stride));
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Eval-mode argmax prediction per sequence.
pub fn predict_all<T: Real>(model: &Model<T>, test: &[Sequence]) -> Result<Vec<usize>> {
    par::map(test, |s| model.predict(s).map(|f| f.predicted()))
        .into_iter()
        .collect()
}

/// Percentage of correctly classified sequences.
pub fn accuracy<T: Real>(model: &Model<T>, test: &[Sequence]) -> Result<f64> {
    Ok(confusion(model, test)?.accuracy())
}

/// `counts[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    pub fn new(gestures: usize) -> Self {
        Self {
            counts: vec![vec![0; gestures]; gestures],
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.counts.len()).map(|g| self.counts[g][g]).sum()
    }

    pub fn class_totals(&self) -> Vec<usize> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn accuracy(&self) -> f64 {
        100.0 * self.correct() as f64 / self.total().max(1) as f64
    }

    fn absorb(&mut self, other: &Confusion) {
        for (row, o) in self.counts.iter_mut().zip(&other.counts) {
            for (v, w) in row.iter_mut().zip(o) {
                *v += w;
            }
        }
    }
}

pub fn confusion<T: Real>(model: &Model<T>, test: &[Sequence]) -> Result<Confusion> {
    if test.is_empty() {
        return Err(Error::input("cannot score an empty test set"));
    }
    let g = model.gestures();
    let mut c = Confusion::new(g);
    for (seq, p) in test.iter().zip(predict_all(model, test)?) {
        let label = seq.gesture_id as usize;
        if label >= g {
            return Err(Error::input(format!("label {label} outside 0..{g}")));
        }
        c.counts[label][p] += 1;
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Pre-trained model evaluated as is.
    None,
    /// Adaptation and evaluation on all target data.
    All,
    /// Adaptation on a share of trials, evaluation on the rest.
    Holdout,
}

impl Scenario {
    pub fn number(self) -> u8 {
        match self {
            Scenario::None => 1,
            Scenario::All => 2,
            Scenario::Holdout => 3,
        }
    }
}

impl TryFrom<u8> for Scenario {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Scenario::None),
            2 => Ok(Scenario::All),
            3 => Ok(Scenario::Holdout),
            _ => Err(Error::arg(format!("scenario must be 1, 2 or 3, got {n}"))),
        }
    }
}

/// What scenarios 2 and 3 train on the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Adapt,
    FineTune,
}

impl Method {
    pub fn stage(self) -> Stage {
        match self {
            Method::Adapt => Stage::Adapt,
            Method::FineTune => Stage::FineTune,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Method::Adapt => "2srnn",
            Method::FineTune => "finetune",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOptions {
    pub fraction: f64,
    pub method: Method,
    /// Recordings the model was pre-trained on; none may reappear in the target.
    pub source_keys: Option<BTreeSet<RecordingKey>>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            fraction: DEFAULT_ADAPT_FRACTION,
            method: Method::Adapt,
            source_keys: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub descriptor: String,
    pub accuracy: f64,
    pub adapt_windows: usize,
    pub test_windows: usize,
    pub epoch_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: u8,
    pub method: Option<Method>,
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub confusion: Confusion,
    /// Scenario 2 scores on the very data it adapted on.
    pub train_on_test: bool,
    pub config: serde_json::Value,
}

impl EvalReport {
    /// Joins single-fold reports of the same scenario (e.g. cross-validation folds).
    pub fn merge(reports: Vec<EvalReport>) -> Result<EvalReport> {
        let mut it = reports.into_iter();
        let mut out = it.next().ok_or_else(|| Error::input("nothing to merge"))?;
        for r in it {
            if r.scenario != out.scenario || r.confusion.counts.len() != out.confusion.counts.len() {
                return Err(Error::input("reports of different scenarios or gesture counts"));
            }
            out.confusion.absorb(&r.confusion);
            out.folds.extend(r.folds);
        }
        out.mean_accuracy = out.folds.iter().map(|f| f.accuracy).sum::<f64>() / out.folds.len() as f64;
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// One row per fold.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scenario",
            "fold",
            "descriptor",
            "accuracy",
            "adapt_windows",
            "test_windows",
            "epoch_seconds",
        ])?;
        for (i, f) in self.folds.iter().enumerate() {
            w.write_record([
                self.scenario.to_string(),
                i.to_string(),
                f.descriptor.clone(),
                f.accuracy.to_string(),
                f.adapt_windows.to_string(),
                f.test_windows.to_string(),
                f.epoch_seconds.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        csv_string(w)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Outcome of one scenario: the report and the model it scored.
#[derive(Clone, Debug)]
pub struct ScenarioRun<T> {
    pub report: EvalReport,
    pub model: Model<T>,
    pub history: Option<TrainHistory>,
}

fn check_target<T: Real>(model: &Model<T>, target: &Dataset, source: Option<&BTreeSet<RecordingKey>>) -> Result<()> {
    if target.meta.channels != model.features() {
        return Err(Error::shape(format!(
            "target data has {} channels, model expects {}",
            target.meta.channels,
            model.features()
        )));
    }
    if let Some(source) = source {
        if let Some(r) = target.recordings.iter().find(|r| source.contains(&r.key())) {
            return Err(Error::contract(format!(
                "target recording {:?} was part of the pre-training source",
                r.key()
            )));
        }
    }
    Ok(())
}

/// Fails when any holdout window's provenance also occurs in the adaptation set.
fn check_disjoint_windows(adapt: &[Sequence], holdout: &[Sequence]) -> Result<()> {
    let seen: BTreeSet<(Provenance, u32)> = adapt.iter().map(|s| (s.provenance, s.gesture_id)).collect();
    match holdout.iter().find(|s| seen.contains(&(s.provenance, s.gesture_id))) {
        Some(s) => Err(Error::contract(format!(
            "holdout window {:?} also used for adaptation",
            s.provenance
        ))),
        None => Ok(()),
    }
}

fn train_method<T: Real>(
    model: &Model<T>,
    data: &[Sequence],
    cfg: &TrainConfig,
    method: Method,
) -> Result<(Model<T>, TrainHistory)> {
    let cfg = cfg.with_stage(method.stage());
    match method {
        Method::Adapt => adapt_stage2(model, data, &cfg),
        Method::FineTune => fine_tune(model, data, &cfg),
    }
}

/// Runs one scenario on `target`; `cfg` supplies epochs, batch, seed and
/// optimizer for the training scenarios (its stage is overridden).
pub fn run_scenario<T: Real>(
    pretrained: &Model<T>,
    target: &Dataset,
    scenario: Scenario,
    cfg: &TrainConfig,
    window: Windowing,
    opts: &ScenarioOptions,
) -> Result<ScenarioRun<T>> {
    check_target(pretrained, target, opts.source_keys.as_ref())?;
    let (adapt, test) = match scenario {
        Scenario::None => (Vec::new(), segment_all(&target.recordings, window)?),
        Scenario::All => {
            let all = segment_all(&target.recordings, window)?;
            (all.clone(), all)
        }
        Scenario::Holdout => {
            let (a, h) = split_adaptation_trials(&target.recordings, opts.fraction)?;
            if h.is_empty() {
                return Err(Error::input("adaptation fraction leaves no holdout trials"));
            }
            let (a, h) = (segment_all(a, window)?, segment_all(h, window)?);
            check_disjoint_windows(&a, &h)?;
            (a, h)
        }
    };
    let (model, history) = match scenario {
        Scenario::None => (pretrained.clone(), None),
        _ => {
            let (m, hist) = train_method(pretrained, &adapt, cfg, opts.method)?;
            (m, Some(hist))
        }
    };
    let conf = confusion(&model, &test)?;
    let acc = conf.accuracy();
    let method = (scenario != Scenario::None).then_some(opts.method);
    let descriptor = match scenario {
        Scenario::None => "no adaptation".to_string(),
        Scenario::All => "adapt on all target data, evaluate on all target data".to_string(),
        Scenario::Holdout => format!(
            "adapt on first {:.0}% of trials per gesture, evaluate on the rest",
            100.0 * opts.fraction
        ),
    };
    let report = EvalReport {
        scenario: scenario.number(),
        method,
        folds: vec![FoldResult {
            descriptor,
            accuracy: acc,
            adapt_windows: adapt.len(),
            test_windows: test.len(),
            epoch_seconds: history.as_ref().map(TrainHistory::mean_epoch_seconds),
        }],
        mean_accuracy: acc,
        confusion: conf,
        train_on_test: scenario == Scenario::All,
        config: json!({
            "dataset": target.meta.name,
            "train": cfg.with_stage(opts.method.stage()),
            "window": window,
            "fraction": opts.fraction,
            "method": method,
        }),
    };
    Ok(ScenarioRun { report, model, history })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    /// `none`, `2srnn` or `finetune`.
    pub method: String,
    pub accuracy: f64,
    pub epoch_seconds: f64,
    pub windows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub fractions: Vec<f64>,
    pub epochs: usize,
    pub holdout_windows: usize,
    pub rows: Vec<SweepRow>,
    pub config: serde_json::Value,
}

impl SweepReport {
    pub fn row(&self, fraction: f64, method: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.fraction == fraction && r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// One row per (fraction, method).
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["fraction", "method", "accuracy", "epoch_seconds", "windows"])?;
        for r in &self.rows {
            w.write_record([
                r.fraction.to_string(),
                r.method.clone(),
                r.accuracy.to_string(),
                r.epoch_seconds.to_string(),
                r.windows.to_string(),
            ])?;
        }
        csv_string(w)
    }
}

/// First `⌈fraction·count⌉` windows of each gesture, original order kept.
pub fn budget_windows(windows: &[Sequence], fraction: f64) -> Vec<Sequence> {
    let mut totals: BTreeMap<u32, usize> = BTreeMap::new();
    for s in windows {
        *totals.entry(s.gesture_id).or_default() += 1;
    }
    let mut taken: BTreeMap<u32, usize> = BTreeMap::new();
    windows
        .iter()
        .filter(|s| {
            let quota = (fraction * totals[&s.gesture_id] as f64).ceil() as usize;
            let t = taken.entry(s.gesture_id).or_default();
            *t += 1;
            *t <= quota
        })
        .cloned()
        .collect()
}

/// Adapts with stage 2 and with fine-tuning on growing shares of the
/// adaptation windows, scoring both and the unadapted model on a fixed
/// holdout (the scenario-3 split at the default fraction).
pub fn data_budget_sweep<T: Real>(
    pretrained: &Model<T>,
    target: &Dataset,
    fractions: &[f64],
    epochs: usize,
    cfg: &TrainConfig,
    window: Windowing,
) -> Result<SweepReport> {
    if fractions.is_empty() {
        return Err(Error::arg("budget sweep needs at least one fraction"));
    }
    if fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) || fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("budget fractions must be strictly increasing within (0, 1]"));
    }
    check_target(pretrained, target, None)?;
    let (a, h) = split_adaptation_trials(&target.recordings, DEFAULT_ADAPT_FRACTION)?;
    let (adapt, holdout) = (segment_all(a, window)?, segment_all(h, window)?);
    if holdout.is_empty() || adapt.is_empty() {
        return Err(Error::input("target data too small for an adaptation/holdout split"));
    }
    check_disjoint_windows(&adapt, &holdout)?;
    let cfg = cfg.clone().epochs(epochs);
    let baseline = accuracy(pretrained, &holdout)?;

    let mut rows = Vec::with_capacity(3 * fractions.len());
    for &fraction in fractions {
        let budget = budget_windows(&adapt, fraction);
        rows.push(SweepRow {
            fraction,
            method: "none".into(),
            accuracy: baseline,
            epoch_seconds: 0.0,
            windows: 0,
        });
        for method in [Method::Adapt, Method::FineTune] {
            let started = Instant::now();
            let (m, hist) = train_method(pretrained, &budget, &cfg, method)?;
            log::info!(
                "budget {fraction}: {} trained in {:.2}s",
                method.label(),
                started.elapsed().as_secs_f64()
            );
            rows.push(SweepRow {
                fraction,
                method: method.label().into(),
                accuracy: accuracy(&m, &holdout)?,
                epoch_seconds: hist.mean_epoch_seconds(),
                windows: budget.len(),
            });
        }
    }
    Ok(SweepReport {
        fractions: fractions.to_vec(),
        epochs,
        holdout_windows: holdout.len(),
        rows,
        config: json!({
            "dataset": target.meta.name,
            "train": cfg,
            "window": window,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, ModelConfig};
    use crate::synth::{generate_synthetic, SynthSpec};

    fn tiny() -> (Model<f64>, Dataset) {
        let spec = SynthSpec {
            subjects: 1,
            sessions: 1,
            trials: 4,
            frames: 40,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 3).unwrap();
        let cfg = ModelConfig::new(8, 4, 5, 1).with_head_units(8);
        (Model::init(cfg, 1).unwrap(), ds)
    }

    fn win() -> Windowing {
        Windowing::new(10, 10)
    }

    #[test]
    fn accuracy_counts() {
        let (m, ds) = tiny();
        let seqs = segment_all(&ds.recordings, win()).unwrap();
        let preds = predict_all(&m, &seqs).unwrap();
        let correct = seqs
            .iter()
            .zip(&preds)
            .filter(|(s, &p)| s.gesture_id as usize == p)
            .count();
        let acc = accuracy(&m, &seqs).unwrap();
        assert_eq!(acc, 100.0 * correct as f64 / seqs.len() as f64);

        // relabel so that exactly 9 of the first 10 match the prediction
        let mut ten: Vec<Sequence> = seqs[..10].to_vec();
        for (s, &p) in ten.iter_mut().zip(&preds) {
            s.gesture_id = p as u32;
        }
        ten[0].gesture_id = ((preds[0] + 1) % 5) as u32;
        assert_eq!(accuracy(&m, &ten).unwrap(), 90.0);
        for (s, &p) in ten.iter_mut().zip(&preds) {
            s.gesture_id = ((p + 1) % 5) as u32;
        }
        assert_eq!(accuracy(&m, &ten).unwrap(), 0.0);
        assert!(matches!(accuracy(&m, &[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn accuracy_is_order_free_and_matches_confusion() {
        let (m, ds) = tiny();
        let mut seqs = segment_all(&ds.recordings, win()).unwrap();
        let c = confusion(&m, &seqs).unwrap();
        let before = accuracy(&m, &seqs).unwrap();
        seqs.reverse();
        seqs.rotate_left(7);
        assert_eq!(accuracy(&m, &seqs).unwrap(), before);
        assert_eq!(c.accuracy(), before);
        let mut per_class = vec![0; 5];
        for s in &seqs {
            per_class[s.gesture_id as usize] += 1;
        }
        assert_eq!(c.class_totals(), per_class);
    }

    #[test]
    fn scenario_one_is_plain_accuracy_and_leaves_model() {
        let (m, ds) = tiny();
        let before = m.clone();
        let run = run_scenario(
            &m,
            &ds,
            Scenario::None,
            &TrainConfig::new(Stage::Adapt),
            win(),
            &Default::default(),
        )
        .unwrap();
        let plain = accuracy(&m, &segment_all(&ds.recordings, win()).unwrap()).unwrap();
        assert_eq!(run.report.mean_accuracy, plain);
        assert_eq!(m, before);
        assert_eq!(run.model, before);
        assert!(!run.report.train_on_test);
    }

    #[test]
    fn scenario_three_uses_half_the_trials() {
        let spec = SynthSpec {
            subjects: 1,
            sessions: 1,
            trials: 10,
            frames: 20,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 1).unwrap();
        let m = Model::<f64>::init(ModelConfig::new(8, 4, 5, 1).with_head_units(8), 0).unwrap();
        let cfg = TrainConfig::new(Stage::Adapt).epochs(1).batch_size(8);
        let run = run_scenario(&m, &ds, Scenario::Holdout, &cfg, win(), &Default::default()).unwrap();
        let fold = &run.report.folds[0];
        // 5 gestures, 5 adapt trials each, 2 windows per trial
        assert_eq!(fold.adapt_windows, 5 * 5 * 2);
        assert_eq!(fold.test_windows, 5 * 5 * 2);
        let (base, adapted) = (m.params(), run.model.params());
        assert_eq!(base.layers, adapted.layers);
        assert_eq!(base.head, adapted.head);
        assert_eq!(run.report.confusion.total(), fold.test_windows);
    }

    #[test]
    fn scenario_two_is_flagged() {
        let (m, ds) = tiny();
        let cfg = TrainConfig::new(Stage::Adapt).epochs(1);
        let run = run_scenario(&m, &ds, Scenario::All, &cfg, win(), &Default::default()).unwrap();
        assert!(run.report.train_on_test);
        assert_eq!(run.report.folds[0].adapt_windows, run.report.folds[0].test_windows);
    }

    #[test]
    fn overlap_and_shape_errors() {
        let (m, ds) = tiny();
        let opts = ScenarioOptions {
            source_keys: Some(ds.recordings.iter().map(|r| r.key()).take(1).collect()),
            ..Default::default()
        };
        let cfg = TrainConfig::new(Stage::Adapt);
        assert!(matches!(
            run_scenario(&m, &ds, Scenario::None, &cfg, win(), &opts),
            Err(Error::Contract(_))
        ));
        let narrow = init_model(3, 4, 5, 1, 0).unwrap();
        assert!(matches!(
            run_scenario(&narrow, &ds, Scenario::None, &cfg, win(), &Default::default()),
            Err(Error::Shape(_))
        ));
        assert!(Scenario::try_from(4).is_err());
    }

    #[test]
    fn holdout_window_in_adapt_set_is_rejected() {
        let (_, ds) = tiny();
        let seqs = segment_all(&ds.recordings, win()).unwrap();
        assert!(check_disjoint_windows(&seqs[..4], &seqs[4..]).is_ok());
        assert!(matches!(
            check_disjoint_windows(&seqs[..4], &seqs[3..]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn budget_keeps_prefix_per_gesture() {
        let mut seqs = Vec::new();
        for i in 0..10u32 {
            let mut s = Sequence::new(crate::linalg::Matrix::zeros(1, 1), i % 2);
            s.provenance.window_index = i;
            seqs.push(s);
        }
        let b = budget_windows(&seqs, 0.4);
        let idx: Vec<u32> = b.iter().map(|s| s.provenance.window_index).collect();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        assert_eq!(budget_windows(&seqs, 1.0), seqs);
        assert_eq!(budget_windows(&seqs, 0.1).len(), 2);
    }

    #[test]
    fn sweep_rows_and_full_budget_matches_scenario_three() {
        let (m, ds) = tiny();
        let cfg = TrainConfig::new(Stage::Adapt).batch_size(8).seed(4);
        let sweep = data_budget_sweep(&m, &ds, &[0.5, 1.0], 2, &cfg, win()).unwrap();
        assert_eq!(sweep.rows.len(), 6);
        let run = run_scenario(
            &m,
            &ds,
            Scenario::Holdout,
            &cfg.clone().epochs(2),
            win(),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(sweep.row(1.0, "2srnn").unwrap().accuracy, run.report.mean_accuracy);
        let csv = sweep.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 7);
        assert_eq!(SweepReport::from_json(&sweep.to_json().unwrap()).unwrap(), sweep);

        assert!(data_budget_sweep(&m, &ds, &[], 1, &cfg, win()).is_err());
        assert!(data_budget_sweep(&m, &ds, &[0.6, 0.4], 1, &cfg, win()).is_err());
        assert!(data_budget_sweep(&m, &ds, &[0.0, 0.4], 1, &cfg, win()).is_err());
        assert!(data_budget_sweep(&m, &ds, &[0.4, 1.2], 1, &cfg, win()).is_err());
    }

    #[test]
    fn reports_round_trip_and_merge() {
        let (m, ds) = tiny();
        let cfg = TrainConfig::new(Stage::Adapt).epochs(1);
        let r = run_scenario(&m, &ds, Scenario::All, &cfg, win(), &Default::default())
            .unwrap()
            .report;
        assert_eq!(EvalReport::from_json(&r.to_json().unwrap()).unwrap(), r);
        let merged = EvalReport::merge(vec![r.clone(), r.clone()]).unwrap();
        assert_eq!(merged.folds.len(), 2);
        assert_eq!(merged.confusion.total(), 2 * r.confusion.total());
        assert_eq!(merged.to_csv().unwrap().lines().count(), 3);
    }
}
