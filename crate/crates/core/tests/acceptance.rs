//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero on a
//! failure only when `MYOSHIFT_ACCEPTANCE_STRICT` is set.
//!
//! Criterion 10 needs a converted CapgMyo DB-b dataset; point
//! `MYOSHIFT_CAPGMYO` at its manifest (or directory) to enable it.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use myoshift::data::{
    load_dataset, loocv_folds, split_adaptation_trials, split_inter_session, split_intra_session, Dataset, DatasetMeta,
    Split,
};
use myoshift::eval::{
    accuracy, data_budget_sweep, run_scenario, segment_all, Scenario, ScenarioOptions, SweepReport, Windowing,
    SWEEP_EPOCHS, SWEEP_FRACTIONS,
};
use myoshift::model::checkpoint::{load_checkpoint, save_checkpoint};
use myoshift::model::{lstm_cell_step, Group, Layer, Model, ModelConfig};
use myoshift::signal::{rectify, segment, standardize, BandStop, Pipeline, Recording, RecordingKey, Sequence};
use myoshift::synth::{apply_domain_shift, generate_synthetic, make_shift, ShiftKind, SynthSpec};
use myoshift::training::{
    adapt_stage2, fine_tune, grad_check_with, train_stage1, trainable_count, GradCheckOptions, GradCheckReport, Stage,
    TrainConfig, GRADCHECK_TOLERANCE,
};
use myoshift::{Matrix, Result};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const HIDDEN: usize = 16;
const BATCH: usize = 8;
const PRETRAIN_EPOCHS: usize = 15;
const ADAPT_EPOCHS: usize = 40;
const FREEZE_EPOCHS: usize = 100;
const TIMING_EPOCHS: usize = 3;

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    id: u32,
    title: &'static str,
    status: Status,
    detail: String,
}

impl Outcome {
    fn new(id: u32, title: &'static str, ok: bool, detail: String) -> Self {
        let status = if ok { Status::Pass } else { Status::Fail };
        Self {
            id,
            title,
            status,
            detail,
        }
    }
}

fn check(id: u32, title: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Outcome {
    let started = Instant::now();
    let (ok, mut detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let _ = write!(detail, " [{:.1}s]", started.elapsed().as_secs_f64());
    Outcome::new(id, title, ok, detail)
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn random_sequence(rng: &mut ChaCha8Rng, steps: usize, features: usize, gestures: usize) -> Sequence {
    let data: Vec<f64> = (0..steps * features).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Sequence::new(
        Matrix::from_vec(steps, features, data).unwrap(),
        rng.gen_range(0..gestures) as u32,
    )
}

// 1
fn gradients() -> Result<(bool, String)> {
    let started = Instant::now();
    let mut worst: Option<(u64, GradCheckReport)> = None;
    let mut max_abs = 0.0f64;
    let mut failing_seeds = 0;
    let mut groups_seen = BTreeSet::new();
    for seed in 0..20u64 {
        let cfg = ModelConfig::new(4, 8, 3, 2);
        let model = Model::<f64>::init(cfg, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch: Vec<Sequence> = (0..2).map(|_| random_sequence(&mut rng, 5, 4, 3)).collect();
        let report = grad_check_with(
            &model,
            &batch,
            &GradCheckOptions {
                eps: 1e-5,
                max_params: None,
                seed,
            },
        )?;
        max_abs = max_abs.max(report.max_abs_err);
        failing_seeds += usize::from(!report.passed());
        groups_seen.extend(report.per_param.keys().cloned());
        if worst.as_ref().is_none_or(|(_, w)| report.max_rel_err > w.max_rel_err) {
            worst = Some((seed, report));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let (seed, report) = worst.expect("20 seeds ran");
    let covers_adapt = groups_seen.contains("adapt.M") && groups_seen.contains("adapt.b");
    let entry = report.worst.as_ref().expect("every run checks some scalar");
    Ok((
        report.max_rel_err < GRADCHECK_TOLERANCE && covers_adapt && secs < 60.0,
        format!(
            "max rel err {:.2e} (seed {seed}, {}[{}]: analytic {:.3e} vs numeric {:.3e}); \
             {failing_seeds}/20 seeds above {GRADCHECK_TOLERANCE:e}; max abs err {max_abs:.1e}; \
             {} arrays incl. adapt.M/adapt.b: {covers_adapt}; {secs:.1}s",
            report.max_rel_err,
            entry.name,
            entry.index,
            entry.analytic,
            entry.numeric,
            groups_seen.len()
        ),
    ))
}

/// Plain stacked-LSTM classifier assembled from the cell step and the head
/// weights, with no adaptation layer.
fn bare_classifier_logits(model: &Model<f64>, seq: &Sequence) -> Vec<f64> {
    let p = model.params();
    let mut xs: Vec<Vec<f64>> = (0..seq.len()).map(|t| seq.data.row(t).to_vec()).collect();
    for layer in &p.layers {
        let Layer::Lstm(l) = layer else { unreachable!() };
        let (mut h, mut c) = (vec![0.0; l.hidden()], vec![0.0; l.hidden()]);
        let mut out = Vec::with_capacity(xs.len());
        for x in &xs {
            (h, c) = lstm_cell_step(l, x, &h, &c).unwrap();
            out.push(h.clone());
        }
        xs = out;
    }
    let last = xs.last().unwrap();
    let mut hidden = p.head.w_fc.matvec(last);
    for (v, b) in hidden.iter_mut().zip(&p.head.b_fc) {
        *v += b;
    }
    let mut logits = p.head.w_out.matvec(&hidden);
    for (v, b) in logits.iter_mut().zip(&p.head.b_out) {
        *v += b;
    }
    logits
}

// 3
fn identity_equivalence() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let models = (0..10)
        .map(|s| Model::<f64>::init(ModelConfig::new(6, 12, 5, 2).with_head_units(32), s))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let model = &models[i / 100];
        let steps = rng.gen_range(1..=25);
        let seq = random_sequence(&mut rng, steps, 6, 5);
        let full = model.predict(&seq)?.logits;
        let bare = bare_classifier_logits(model, &seq);
        let internal = model.classifier_logits(&seq)?;
        for ((a, b), c) in full.iter().zip(&bare).zip(&internal) {
            worst = worst.max((a - b).abs()).max((a - c).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max |Δlogit| {worst:.2e} on 1000 sequences")))
}

// 8
fn signal_pipeline() -> Result<(bool, String)> {
    let bs = BandStop::design(45.0, 55.0, 4, 1000.0)?;
    let att_db = 20.0 * (bs.magnitude(10.0) / bs.magnitude(50.0)).log10();

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut segment_mismatch = 0;
    for _ in 0..500 {
        let n = rng.gen_range(1..200);
        let w = rng.gen_range(1..=n);
        let s = rng.gen_range(1..50);
        let key = RecordingKey {
            subject_id: 0,
            session_id: 1,
            gesture_id: 0,
            trial_id: 1,
        };
        let rec = Recording::new(key, 1000.0, Matrix::zeros(n, 2))?;
        let expected = (n - w) / s + 1;
        if segment(&rec, w, s)?.len() != expected {
            segment_mismatch += 1;
        }
    }

    let mut invariant_failures = 0;
    for case in 0..200 {
        let (n, ch) = (rng.gen_range(2..300), rng.gen_range(1..6));
        let scale = 10f64.powi(rng.gen_range(-3..4));
        let data: Vec<f64> = (0..n * ch).map(|_| scale * rng.gen_range(-5.0..5.0) + 3.0).collect();
        let key = RecordingKey {
            subject_id: 0,
            session_id: 1,
            gesture_id: 0,
            trial_id: case,
        };
        let rec = Recording::new(key, 1000.0, Matrix::from_vec(n, ch, data)?)?;
        let z = standardize(&rec)?;
        for c in 0..ch {
            let x = z.channel(c);
            let m = x.iter().sum::<f64>() / n as f64;
            let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            if m.abs() > 1e-9 || (var.sqrt() - 1.0).abs() > 1e-9 {
                invariant_failures += 1;
            }
        }
        let r = rectify(&rec);
        let abs_ok = r
            .data
            .as_slice()
            .iter()
            .zip(rec.data.as_slice())
            .all(|(a, b)| *a >= 0.0 && *a == b.abs());
        if !abs_ok || rectify(&r) != r {
            invariant_failures += 1;
        }
    }
    Ok((
        att_db >= 20.0 && segment_mismatch == 0 && invariant_failures == 0,
        format!(
            "50 Hz attenuation {att_db:.1} dB vs 10 Hz; segment count mismatches {segment_mismatch}/500; \
             standardize/rectify invariant failures {invariant_failures}/200"
        ),
    ))
}

fn grid(subjects: u32, sessions: u32, gestures: u32, trials: u32) -> Result<Dataset> {
    let mut recs = Vec::new();
    for s in 0..subjects {
        for e in 1..=sessions {
            for g in 0..gestures {
                for t in 1..=trials {
                    let key = RecordingKey {
                        subject_id: s,
                        session_id: e,
                        gesture_id: g,
                        trial_id: t,
                    };
                    recs.push(Recording::new(key, 1000.0, Matrix::zeros(4, 2))?);
                }
            }
        }
    }
    Dataset::new(
        DatasetMeta {
            name: "grid".into(),
            rate_hz: 1000.0,
            channels: 2,
            gestures: gestures as usize,
            subjects: subjects as usize,
            sessions: sessions as usize,
            trials: trials as usize,
            preprocessed: true,
        },
        recs,
    )
}

fn is_partition(split: &Split<'_>, scope: &[&Recording]) -> bool {
    let train: BTreeSet<_> = split.train.iter().map(|r| r.key()).collect();
    let test: BTreeSet<_> = split.test.iter().map(|r| r.key()).collect();
    let all: BTreeSet<_> = scope.iter().map(|r| r.key()).collect();
    train.is_disjoint(&test) && train.union(&test).cloned().collect::<BTreeSet<_>>() == all
}

// 9
fn split_counts() -> Result<(bool, String)> {
    let ds = grid(2, 2, 3, 10)?;
    let intra = split_intra_session(&ds, 0, 1)?;
    let per_gesture_ok = (0..3).all(|g| {
        intra.train.iter().filter(|r| r.gesture_id == g).count() == 5
            && intra.test.iter().filter(|r| r.gesture_id == g).count() == 5
    });

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut fold_errors = 0;
    let mut partition_errors = 0;
    for _ in 0..100 {
        let (n, e, g, t) = (
            rng.gen_range(2..7),
            rng.gen_range(2..4),
            rng.gen_range(1..5),
            rng.gen_range(1..12),
        );
        let ds = grid(n, e, g, t)?;
        let folds = loocv_folds(&ds)?;
        if folds.len() != n as usize {
            fold_errors += 1;
        }
        let everything: Vec<&Recording> = ds.recordings.iter().collect();
        for f in &folds {
            partition_errors += usize::from(!is_partition(f, &everything));
        }
        let s = rng.gen_range(0..n);
        let scope = ds.select(|r| r.subject_id == s && r.session_id == 1);
        partition_errors += usize::from(!is_partition(&split_intra_session(&ds, s, 1)?, &scope));
        let scope = ds.select(|r| r.subject_id == s && r.session_id <= 2);
        partition_errors += usize::from(!is_partition(&split_inter_session(&ds, s)?, &scope));
        let fraction = rng.gen_range(0.05..0.95);
        let (a, h) = split_adaptation_trials(&ds.recordings, fraction)?;
        let sp = Split {
            train: a,
            test: h,
            descriptor: String::new(),
        };
        partition_errors += usize::from(!is_partition(&sp, &everything));
    }
    Ok((
        per_gesture_ok && intra.train.len() == 15 && fold_errors == 0 && partition_errors == 0,
        format!(
            "intra-session 5/5 per gesture: {per_gesture_ok}; LOOCV fold-count errors {fold_errors}/100; \
             non-partitions {partition_errors}"
        ),
    ))
}

/// Everything the synthetic criteria need from one seed.
struct SeedRun {
    source_acc: f64,
    adapt_identity_after_pretrain: bool,
    classifier_frozen: bool,
    s1: f64,
    s2: f64,
    s3: f64,
    stage2_epoch_secs: f64,
    finetune_epoch_secs: f64,
    stage2_trainable: usize,
    sweep: SweepReport,
}

fn classifier_bits(model: &Model<f64>) -> Vec<(String, Vec<u64>)> {
    model
        .params()
        .visit()
        .into_iter()
        .filter(|p| p.group == Group::Classifier)
        .map(|p| (p.name, p.values.iter().map(|v| v.to_bits()).collect()))
        .collect()
}

fn adapt_is_exact_identity(model: &Model<f64>) -> bool {
    let a = model.adapt();
    let f = a.b.len();
    a.b.iter().all(|v| v.to_bits() == 0)
        && (0..f).all(|i| (0..f).all(|j| a.m.get(i, j).to_bits() == if i == j { 1.0f64 } else { 0.0 }.to_bits()))
}

fn windowing() -> Windowing {
    Windowing::from_ms(150.0, 150.0, SynthSpec::default().rate_hz)
}

struct Shifted {
    pretrained: Model<f64>,
    source_test: Vec<Sequence>,
    source_keys: BTreeSet<RecordingKey>,
    target: Dataset,
}

/// Session 1 (odd trials) pre-trains; session 2 under a random rotation is the target.
fn prepare(seed: u64) -> Result<Shifted> {
    let spec = SynthSpec::default();
    let ds = generate_synthetic(&spec, seed)?;
    let w = windowing();
    let source_train = segment_all(ds.select(|r| r.session_id == 1 && r.trial_id % 2 == 1), w)?;
    let source_test = segment_all(ds.select(|r| r.session_id == 1 && r.trial_id % 2 == 0), w)?;
    let source_keys = ds.select(|r| r.session_id == 1).iter().map(|r| r.key()).collect();
    let shift = make_shift(ShiftKind::Rotation, spec.channels, seed)?;
    let target = apply_domain_shift(&ds.filtered(|r| r.session_id == 2), &shift, None)?;
    let init = Model::init(ModelConfig::new(spec.channels, HIDDEN, spec.gestures, 2), seed)?;
    let cfg = TrainConfig::new(Stage::Pretrain)
        .epochs(PRETRAIN_EPOCHS)
        .batch_size(BATCH)
        .seed(seed);
    let (pretrained, _) = train_stage1(&init, &source_train, &cfg)?;
    Ok(Shifted {
        pretrained,
        source_test,
        source_keys,
        target,
    })
}

fn seed_run(seed: u64) -> Result<SeedRun> {
    let started = Instant::now();
    let Shifted {
        pretrained,
        source_test,
        source_keys,
        target,
    } = prepare(seed)?;
    let w = windowing();
    let source_acc = accuracy(&pretrained, &source_test)?;
    let cfg = TrainConfig::new(Stage::Adapt)
        .epochs(ADAPT_EPOCHS)
        .batch_size(BATCH)
        .seed(seed);
    let opts = ScenarioOptions {
        source_keys: Some(source_keys),
        ..Default::default()
    };
    let s1 = run_scenario(&pretrained, &target, Scenario::None, &cfg, w, &opts)?;
    let s2 = run_scenario(&pretrained, &target, Scenario::All, &cfg, w, &opts)?;
    let s3 = run_scenario(&pretrained, &target, Scenario::Holdout, &cfg, w, &opts)?;
    let frozen = classifier_bits(&pretrained);
    let classifier_frozen = classifier_bits(&s2.model) == frozen && classifier_bits(&s3.model) == frozen;

    // identical data, batch and epochs for both methods
    let (adapt_recs, _) = split_adaptation_trials(&target.recordings, 0.5)?;
    let adapt = segment_all(adapt_recs, w)?;
    let timing = cfg.clone().epochs(TIMING_EPOCHS);
    let (_, h_ft) = fine_tune(&pretrained, &adapt, &timing.with_stage(Stage::FineTune))?;
    let (_, h_ad) = adapt_stage2(&pretrained, &adapt, &timing)?;
    let sweep = data_budget_sweep(&pretrained, &target, &SWEEP_FRACTIONS, SWEEP_EPOCHS, &cfg, w)?;
    eprintln!(
        "  seed {seed}: source {source_acc:.1}%  s1 {:.1}%  s2 {:.1}%  s3 {:.1}%  ({:.0}s)",
        s1.report.mean_accuracy,
        s2.report.mean_accuracy,
        s3.report.mean_accuracy,
        started.elapsed().as_secs_f64()
    );
    Ok(SeedRun {
        source_acc,
        adapt_identity_after_pretrain: adapt_is_exact_identity(&pretrained),
        classifier_frozen,
        s1: s1.report.mean_accuracy,
        s2: s2.report.mean_accuracy,
        s3: s3.report.mean_accuracy,
        stage2_epoch_secs: h_ad.mean_epoch_seconds(),
        finetune_epoch_secs: h_ft.mean_epoch_seconds(),
        stage2_trainable: trainable_count(&pretrained, Stage::Adapt),
        sweep,
    })
}

// 2: a checkpointed pre-trained model, 100 stage-2 epochs, blob-by-blob comparison.
fn freeze_exactness(runs: &[SeedRun]) -> Result<(bool, String)> {
    let Shifted { pretrained, target, .. } = prepare(SEEDS[0])?;
    let dir = tempfile::tempdir()?;
    let manifest = dir.path().join("pretrained.json");
    save_checkpoint(&pretrained, &manifest)?;
    let restored: Model<f64> = load_checkpoint(&manifest)?;
    let (adapt_recs, _) = split_adaptation_trials(&target.recordings, 0.5)?;
    let adapt = segment_all(adapt_recs, windowing())?;
    let cfg = TrainConfig::new(Stage::Adapt)
        .epochs(FREEZE_EPOCHS)
        .batch_size(BATCH)
        .seed(SEEDS[0]);
    let (adapted, _) = adapt_stage2(&restored, &adapt, &cfg)?;
    let before = classifier_bits(&restored);
    let after = classifier_bits(&adapted);
    let changed: Vec<&str> = before
        .iter()
        .zip(&after)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    let adapt_moved = !adapt_is_exact_identity(&adapted);
    let identity_all = runs.iter().all(|r| r.adapt_identity_after_pretrain);
    let frozen_all = runs.iter().all(|r| r.classifier_frozen);
    Ok((
        changed.is_empty() && adapt_moved && identity_all && frozen_all,
        format!(
            "{} classifier blobs bitwise unchanged after {FREEZE_EPOCHS} stage-2 epochs (changed: {changed:?}); \
             adaptation moved: {adapt_moved}; (M, b) exact identity after stage 1 on all seeds: {identity_all}; \
             scenario 2/3 classifiers frozen on all seeds: {frozen_all}",
            before.len()
        ),
    ))
}

// 4
fn shift_recovery(runs: &[SeedRun]) -> (bool, String) {
    let a = mean(runs.iter().map(|r| r.source_acc));
    let s1 = mean(runs.iter().map(|r| r.s1));
    let s3 = mean(runs.iter().map(|r| r.s3));
    let ok = a >= 95.0 && a - s1 >= 15.0 && a - s3 <= 5.0;
    (
        ok,
        format!(
            "source holdout {a:.1}% (≥95), unadapted target {s1:.1}% (drop {:.1} ≥15), \
             scenario 3 after {ADAPT_EPOCHS} epochs {s3:.1}% (gap {:.1} ≤5)",
            a - s1,
            a - s3
        ),
    )
}

// 5
fn scenario_ordering(runs: &[SeedRun]) -> (bool, String) {
    let (s1, s2, s3) = (
        mean(runs.iter().map(|r| r.s1)),
        mean(runs.iter().map(|r| r.s2)),
        mean(runs.iter().map(|r| r.s3)),
    );
    (
        s2 >= s3 && s3 >= s1,
        format!("scenario 2 {s2:.2}% ≥ scenario 3 {s3:.2}% ≥ scenario 1 {s1:.2}%"),
    )
}

// 6
fn efficiency(runs: &[SeedRun]) -> (bool, String) {
    let f = SynthSpec::default().channels;
    let counts_ok = runs.iter().all(|r| r.stage2_trainable == f * f + f);
    let ad = mean(runs.iter().map(|r| r.stage2_epoch_secs));
    let ft = mean(runs.iter().map(|r| r.finetune_epoch_secs));
    (
        counts_ok && ad <= ft,
        format!(
            "stage-2 trainable = {} (f²+f = {}), epoch {ad:.3}s vs fine-tune {ft:.3}s, ratio {:.2}x",
            runs[0].stage2_trainable,
            f * f + f,
            ft / ad
        ),
    )
}

// 7
fn budget_sweep(runs: &[SeedRun]) -> Result<(bool, String)> {
    let mut ok = true;
    let mut detail = String::new();
    for &fr in &SWEEP_FRACTIONS {
        let acc = |m: &str| mean(runs.iter().map(|r| r.sweep.row(fr, m).map_or(f64::NAN, |x| x.accuracy)));
        let (none, ad, ft) = (acc("none"), acc("2srnn"), acc("finetune"));
        ok &= ad >= none && ft >= none;
        let _ = write!(detail, "{fr}: base {none:.1} / 2srnn {ad:.1} / ft {ft:.1}; ");
    }
    let mut rows_ok = true;
    for r in runs {
        let csv = r.sweep.to_csv()?;
        rows_ok &= csv.lines().count() - 1 == 15;
    }
    let _ = write!(detail, "15 CSV rows per seed: {rows_ok}");
    Ok((ok && rows_ok, detail))
}

// 10
fn real_data() -> Option<Result<(bool, String)>> {
    let path = PathBuf::from(std::env::var_os("MYOSHIFT_CAPGMYO")?);
    Some((|| {
        let mut ds = load_dataset(&path)?;
        if !ds.meta.preprocessed {
            ds = ds.preprocess(&Pipeline::for_rate(ds.meta.rate_hz))?;
        }
        let w = Windowing::from_ms(150.0, 75.0, ds.meta.rate_hz);
        let (mut s1, mut s3) = (Vec::new(), Vec::new());
        for subject in ds.subjects() {
            let split = split_inter_session(&ds, subject)?;
            let source = segment_all(split.train.iter().copied(), w)?;
            let target = ds.filtered(|r| split.test.iter().any(|t| t.key() == r.key()));
            let init = Model::<f64>::init(
                ModelConfig::new(ds.meta.channels, 128, ds.meta.gestures, 2),
                subject as u64,
            )?;
            let cfg = TrainConfig::new(Stage::Pretrain).epochs(25).seed(subject as u64);
            let (m, _) = train_stage1(&init, &source, &cfg)?;
            let cfg = cfg.with_stage(Stage::Adapt);
            let opts = ScenarioOptions::default();
            s1.push(
                run_scenario(&m, &target, Scenario::None, &cfg, w, &opts)?
                    .report
                    .mean_accuracy,
            );
            s3.push(
                run_scenario(&m, &target, Scenario::Holdout, &cfg, w, &opts)?
                    .report
                    .mean_accuracy,
            );
        }
        let (a, b) = (mean(s1), mean(s3));
        Ok((
            b - a >= 10.0,
            format!("scenario 3 {b:.1}% vs scenario 1 {a:.1}% (needs +10)"),
        ))
    })())
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut outcomes = vec![
        check(1, "gradient correctness", gradients),
        check(3, "identity equivalence", identity_equivalence),
        check(8, "signal pipeline", signal_pipeline),
        check(9, "split protocol counts", split_counts),
    ];

    eprintln!("running the synthetic shift pipeline on {} seeds", SEEDS.len());
    let pipeline_started = Instant::now();
    let runs: Result<Vec<SeedRun>> = SEEDS.iter().map(|&s| seed_run(s)).collect();
    let pipeline_secs = pipeline_started.elapsed().as_secs_f64();
    match runs {
        Ok(runs) => {
            outcomes.push(check(2, "freeze exactness", || freeze_exactness(&runs)));
            let (ok, d) = shift_recovery(&runs);
            outcomes.push(Outcome::new(
                4,
                "synthetic shift recovery",
                ok,
                format!("{d} [{pipeline_secs:.0}s for 5 seeds]"),
            ));
            let (ok, d) = scenario_ordering(&runs);
            outcomes.push(Outcome::new(5, "scenario ordering", ok, d));
            let (ok, d) = efficiency(&runs);
            outcomes.push(Outcome::new(6, "efficiency", ok, d));
            outcomes.push(check(7, "budget sweep", || budget_sweep(&runs)));
        }
        Err(e) => {
            for (id, title) in [
                (2, "freeze exactness"),
                (4, "synthetic shift recovery"),
                (5, "scenario ordering"),
                (6, "efficiency"),
                (7, "budget sweep"),
            ] {
                outcomes.push(Outcome::new(id, title, false, format!("pipeline error: {e}")));
            }
        }
    }
    outcomes.push(match real_data() {
        Some(r) => match r {
            Ok((ok, d)) => Outcome::new(10, "real-data trend (CapgMyo DB-b)", ok, d),
            Err(e) => Outcome::new(10, "real-data trend (CapgMyo DB-b)", false, format!("error: {e}")),
        },
        None => Outcome {
            id: 10,
            title: "real-data trend (CapgMyo DB-b)",
            status: Status::Skip,
            detail: "MYOSHIFT_CAPGMYO not set".into(),
        },
    });

    outcomes.sort_by_key(|o| o.id);
    let mut failed = 0;
    for o in &outcomes {
        let tag = match o.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!("{tag} [{}] {}: {}", o.id, o.title, o.detail);
    }
    println!(
        "acceptance: {} passed, {failed} failed, {} skipped in {:.0}s",
        outcomes.iter().filter(|o| matches!(o.status, Status::Pass)).count(),
        outcomes.iter().filter(|o| matches!(o.status, Status::Skip)).count(),
        started.elapsed().as_secs_f64()
    );
    // Failures are reported above; set MYOSHIFT_ACCEPTANCE_STRICT to turn them into a non-zero exit.
    if failed > 0 && std::env::var_os("MYOSHIFT_ACCEPTANCE_STRICT").is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
