//! Datasets, the portable on-disk format and the evaluation splits.
//!
//! Subject and gesture ids are 0-based; session and trial ids are 1-based,
//! so "odd trials" means trials 1, 3, 5, ...

mod io;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use io::{blob_name, load_dataset, save_dataset, DatasetManifest, TrialEntry, DATASET_FORMAT, DATASET_VERSION};

use crate::error::{Error, Result};
use crate::signal::{Pipeline, Recording};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub rate_hz: f64,
    pub channels: usize,
    pub gestures: usize,
    pub subjects: usize,
    pub sessions: usize,
    pub trials: usize,
    /// Stored values are already in feature space (no preprocessing needed).
    #[serde(default)]
    pub preprocessed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub recordings: Vec<Recording>,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, recordings: Vec<Recording>) -> Result<Self> {
        let ds = Self { meta, recordings };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.recordings {
            r.validate()?;
            if r.channels() != self.meta.channels {
                return Err(Error::input(format!(
                    "recording {:?} has {} channels, dataset declares {}",
                    r.key(),
                    r.channels(),
                    self.meta.channels
                )));
            }
            if r.rate_hz != self.meta.rate_hz {
                return Err(Error::input(format!(
                    "recording {:?} sampled at {} Hz, dataset declares {}",
                    r.key(),
                    r.rate_hz,
                    self.meta.rate_hz
                )));
            }
            if r.gesture_id as usize >= self.meta.gestures {
                return Err(Error::input(format!(
                    "gesture {} outside 0..{}",
                    r.gesture_id, self.meta.gestures
                )));
            }
        }
        Ok(())
    }

    pub fn subjects(&self) -> BTreeSet<u32> {
        self.recordings.iter().map(|r| r.subject_id).collect()
    }

    pub fn sessions(&self, subject: u32) -> BTreeSet<u32> {
        self.recordings
            .iter()
            .filter(|r| r.subject_id == subject)
            .map(|r| r.session_id)
            .collect()
    }

    /// Recordings matching a predicate, as references.
    pub fn select(&self, pred: impl Fn(&Recording) -> bool) -> Vec<&Recording> {
        self.recordings.iter().filter(|r| pred(r)).collect()
    }

    /// New dataset holding clones of the matching recordings.
    pub fn filtered(&self, pred: impl Fn(&Recording) -> bool) -> Dataset {
        Dataset {
            meta: self.meta.clone(),
            recordings: self.recordings.iter().filter(|r| pred(r)).cloned().collect(),
        }
    }

    /// Runs `pipeline` over every recording (in parallel when enabled).
    pub fn preprocess(&self, pipeline: &Pipeline) -> Result<Dataset> {
        let recordings = crate::par::map(&self.recordings, |r| pipeline.apply(r))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let mut meta = self.meta.clone();
        meta.preprocessed = true;
        Ok(Dataset { meta, recordings })
    }
}

/// Disjoint train/test partition of (part of) a dataset, by reference.
#[derive(Clone, Debug)]
pub struct Split<'a> {
    pub train: Vec<&'a Recording>,
    pub test: Vec<&'a Recording>,
    pub descriptor: String,
}

impl Split<'_> {
    pub fn is_disjoint(&self) -> bool {
        let train: BTreeSet<_> = self.train.iter().map(|r| r.key()).collect();
        self.test.iter().all(|r| !train.contains(&r.key()))
    }
}

/// Intra-session: odd trials train, even trials test.
pub fn split_intra_session(ds: &Dataset, subject: u32, session: u32) -> Result<Split<'_>> {
    let scope = ds.select(|r| r.subject_id == subject && r.session_id == session);
    if scope.is_empty() {
        return Err(Error::input(format!(
            "no recordings for subject {subject} session {session}"
        )));
    }
    let (train, test) = scope.into_iter().partition(|r| r.trial_id % 2 == 1);
    Ok(Split {
        train,
        test,
        descriptor: format!("intra-session subject {subject} session {session}: odd trials train, even trials test"),
    })
}

/// Inter-session: the subject's first session trains, the second tests.
pub fn split_inter_session(ds: &Dataset, subject: u32) -> Result<Split<'_>> {
    let sessions: Vec<u32> = ds.sessions(subject).into_iter().collect();
    if sessions.len() < 2 {
        return Err(Error::input(format!(
            "subject {subject} has {} session(s), need at least 2",
            sessions.len()
        )));
    }
    let (first, second) = (sessions[0], sessions[1]);
    Ok(Split {
        train: ds.select(|r| r.subject_id == subject && r.session_id == first),
        test: ds.select(|r| r.subject_id == subject && r.session_id == second),
        descriptor: format!("inter-session subject {subject}: session {first} train, session {second} test"),
    })
}

/// Leave-one-subject-out: `test_subject` tests, everybody else trains.
pub fn split_inter_subject_loocv(ds: &Dataset, test_subject: u32) -> Result<Split<'_>> {
    let subjects = ds.subjects();
    if subjects.len() < 2 {
        return Err(Error::input("leave-one-subject-out needs at least 2 subjects"));
    }
    if !subjects.contains(&test_subject) {
        return Err(Error::input(format!("unknown subject {test_subject}")));
    }
    let (test, train) = ds.recordings.iter().partition(|r| r.subject_id == test_subject);
    Ok(Split {
        train,
        test,
        descriptor: format!("inter-subject: subject {test_subject} held out"),
    })
}

/// All leave-one-subject-out folds, in subject order.
pub fn loocv_folds(ds: &Dataset) -> Result<Vec<Split<'_>>> {
    ds.subjects()
        .into_iter()
        .map(|s| split_inter_subject_loocv(ds, s))
        .collect()
}

/// Per (subject, session, gesture) group, the first `⌈fraction·n⌉` trials by
/// trial id go to adaptation, the rest to holdout.
pub fn split_adaptation_trials<'a, I>(target: I, fraction: f64) -> Result<(Vec<&'a Recording>, Vec<&'a Recording>)>
where
    I: IntoIterator<Item = &'a Recording>,
{
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::arg(format!(
            "adaptation fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let target: Vec<&Recording> = target.into_iter().collect();
    let mut groups: BTreeMap<(u32, u32, u32), Vec<u32>> = BTreeMap::new();
    for r in &target {
        groups
            .entry((r.subject_id, r.session_id, r.gesture_id))
            .or_default()
            .push(r.trial_id);
    }
    let adapt_trials: BTreeSet<(u32, u32, u32, u32)> = groups
        .into_iter()
        .flat_map(|((s, e, g), mut trials)| {
            trials.sort_unstable();
            trials.dedup();
            let quota = (fraction * trials.len() as f64).ceil() as usize;
            trials.into_iter().take(quota).map(move |t| (s, e, g, t))
        })
        .collect();
    Ok(target
        .into_iter()
        .partition(|r| adapt_trials.contains(&(r.subject_id, r.session_id, r.gesture_id, r.trial_id))))
}
