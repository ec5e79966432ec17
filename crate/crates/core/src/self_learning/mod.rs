//! Iterative self-learning: synthesize, filter and merge, emit a tuning
//! dataset, tune, evaluate, and stop once test performance stabilizes.
//!
//! On-disk layout under the output directory:
//!
//! ```text
//! iterations/<i>/trajectories.jsonl
//! iterations/<i>/dataset.jsonl
//! iterations/<i>/dataset.manifest.json
//! iterations/<i>/report.json
//! summary.json
//! ```

pub mod dataset;
pub mod hook;
pub mod store;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::info;

pub use dataset::{build_dataset, emit_tuning_dataset, records_for, DatasetError, DatasetManifest, TuningRecord};
pub use hook::{CommandTuneHook, DefaultPolicyFactory, PolicyFactory, TuneError, TuneHook};
pub use store::{
    drop_reason, filter, filter_and_merge, filter_with, is_correct, DropReason, Dropped, FilterReport, MergeDecision,
    MergeReport, StoredTrajectory, TrajectoryStore, DEFAULT_TAU,
};

use crate::env::Scenario;
use crate::jsonl::{write_jsonl, JsonlError};
use crate::runtime::{run_batch, BatchError, BatchMetrics, EpisodeConfig, KbSet, PolicyClient};

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_MAX_ITERATIONS: usize = 4;
pub const LOCK_FILE: &str = "selflearn.lock";

#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub train: Vec<Scenario>,
    pub test: Vec<Scenario>,
    /// Identifier of the starting policy, resolved through a [`PolicyFactory`].
    pub base_policy: String,
    pub epsilon: f64,
    pub tau: f64,
    pub max_iterations: usize,
    pub episode: EpisodeConfig,
    pub parallelism: usize,
    pub out_dir: PathBuf,
}

impl LoopConfig {
    pub fn new(
        train: Vec<Scenario>,
        test: Vec<Scenario>,
        base_policy: impl Into<String>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            train,
            test,
            base_policy: base_policy.into(),
            epsilon: DEFAULT_EPSILON,
            tau: DEFAULT_TAU,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            episode: EpisodeConfig::default(),
            parallelism: 1,
            out_dir: out_dir.into(),
        }
    }

    pub fn check(&self) -> Result<(), SelfLearnError> {
        let bad = |m: &str| Err(SelfLearnError::InvalidConfig(m.to_string()));
        if self.train.is_empty() {
            return bad("no training tasks");
        }
        if self.test.is_empty() {
            return bad("no test tasks");
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return bad("epsilon must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        self.episode
            .check()
            .map_err(|e| SelfLearnError::InvalidConfig(e.to_string()))
    }
}

/// One synthesize/filter/tune/evaluate round. `policy_id` synthesized the
/// trajectories; `tuned_policy_id` is the hook's output, scored as
/// `test_perf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub policy_id: String,
    pub tuned_policy_id: String,
    pub synthesized: usize,
    pub failed: usize,
    pub kept_after_filter: usize,
    pub merged_total: usize,
    pub dataset_records: usize,
    pub test_perf: f64,
    pub delta_perf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HaltReason {
    #[serde(rename = "delta<=epsilon")]
    DeltaWithinEpsilon,
    #[serde(rename = "max_iterations")]
    MaxIterations,
}

impl HaltReason {
    pub fn as_str(self) -> &'static str {
        match self {
            HaltReason::DeltaWithinEpsilon => "delta<=epsilon",
            HaltReason::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopOutcome {
    pub baseline_policy: String,
    pub baseline_perf: f64,
    pub records: Vec<IterationRecord>,
    pub halt: HaltReason,
    pub final_policy: String,
    pub store: TrajectoryStore,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    baseline_policy: &'a str,
    baseline_perf: f64,
    epsilon: f64,
    tau: f64,
    halt: HaltReason,
    final_policy: &'a str,
    iterations: &'a [IterationRecord],
}

#[derive(Debug, Serialize)]
struct IterationReport<'a> {
    record: &'a IterationRecord,
    merge: &'a MergeReport,
    dataset: &'a DatasetManifest,
    synthesis: &'a BatchMetrics,
    test: &'a BatchMetrics,
    store_lengths: BTreeMap<String, usize>,
}

#[derive(Debug, Error)]
pub enum SelfLearnError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("another loop holds {}", .0.display())]
    Locked(PathBuf),
    #[error("policy `{policy}` unavailable: {reason}")]
    PolicyUnavailable { policy: String, reason: String },
    #[error("tune hook missing: {0}")]
    TuneHookMissing(String),
    #[error("tune hook failed at iteration {iteration}: {reason}")]
    TuneHookFailure { iteration: usize, reason: String },
    #[error(transparent)]
    Batch(#[from] BatchError),
    #[error("iteration {iteration}: {source}")]
    Dataset {
        iteration: usize,
        #[source]
        source: DatasetError,
    },
    #[error(transparent)]
    Io(#[from] JsonlError),
}

impl SelfLearnError {
    pub fn code(&self) -> &'static str {
        match self {
            SelfLearnError::InvalidConfig(_) => "INVALID_CONFIG",
            SelfLearnError::Locked(_) => "LOCKED",
            SelfLearnError::PolicyUnavailable { .. } => "POLICY_UNAVAILABLE",
            SelfLearnError::TuneHookMissing(_) => "TUNE_HOOK_MISSING",
            SelfLearnError::TuneHookFailure { .. } => "TUNE_HOOK_FAILURE",
            SelfLearnError::Batch(BatchError::EmptyInput) => "EMPTY_INPUT",
            SelfLearnError::Batch(_) => "BATCH_ERROR",
            SelfLearnError::Dataset {
                source: DatasetError::EmptyStore,
                ..
            } => "EMPTY_STORE",
            SelfLearnError::Dataset { .. } => "DATASET_ERROR",
            SelfLearnError::Io(_) => "IO_ERROR",
        }
    }
}

struct LockGuard(PathBuf);

impl LockGuard {
    fn acquire(dir: &Path) -> Result<Self, SelfLearnError> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(SelfLearnError::Locked(path)),
            Err(source) => Err(io_err(&path, source)),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn io_err(path: &Path, source: std::io::Error) -> SelfLearnError {
    SelfLearnError::Io(JsonlError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SelfLearnError> {
    fs::write(
        path,
        serde_json::to_string_pretty(value).expect("reports serialize") + "\n",
    )
    .map_err(|e| io_err(path, e))
}

fn open_policy(factory: &dyn PolicyFactory, id: &str) -> Result<Box<dyn PolicyClient>, SelfLearnError> {
    factory.open(id).map_err(|e| SelfLearnError::PolicyUnavailable {
        policy: id.to_string(),
        reason: e.to_string(),
    })
}

/// Mean reward over all test episodes; failed episodes score zero.
pub fn evaluate(
    policy: &dyn PolicyClient,
    test: &[Scenario],
    kbs: &KbSet,
    episode: &EpisodeConfig,
    parallelism: usize,
) -> Result<(f64, BatchMetrics), BatchError> {
    let r = run_batch(test, kbs, policy, episode, parallelism)?;
    let total: f64 = r.trajectories().map(|t| t.outcome.reward).sum();
    Ok((total / test.len() as f64, r.metrics))
}

pub fn self_learning_loop(
    config: &LoopConfig,
    kbs: &KbSet,
    factory: &dyn PolicyFactory,
    hook: &dyn TuneHook,
) -> Result<LoopOutcome, SelfLearnError> {
    config.check()?;
    fs::create_dir_all(&config.out_dir).map_err(|e| io_err(&config.out_dir, e))?;
    let out_dir = fs::canonicalize(&config.out_dir).map_err(|e| io_err(&config.out_dir, e))?;
    let _lock = LockGuard::acquire(&out_dir)?;

    let base = open_policy(factory, &config.base_policy)?;
    let (baseline_perf, _) = evaluate(base.as_ref(), &config.test, kbs, &config.episode, config.parallelism)?;
    drop(base);
    info!(policy = %config.base_policy, perf = baseline_perf, "baseline evaluated");

    let mut store = TrajectoryStore::new();
    let mut records = Vec::new();
    let mut policy_id = config.base_policy.clone();
    let mut prev_perf = baseline_perf;
    let mut halt = HaltReason::MaxIterations;

    for i in 0..config.max_iterations {
        let dir = out_dir.join("iterations").join(i.to_string());
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;

        let policy = open_policy(factory, &policy_id)?;
        let batch = run_batch(&config.train, kbs, policy.as_ref(), &config.episode, config.parallelism)?;
        drop(policy);
        write_jsonl(dir.join("trajectories.jsonl"), &batch.entries)?;
        let synthesized: Vec<_> = batch.trajectories().cloned().collect();

        let merge = filter_and_merge(&synthesized, &mut store, kbs, config.tau, i);
        store.snapshot();
        let manifest = emit_tuning_dataset(&store, kbs, &dir.join("dataset.jsonl"))
            .map_err(|source| SelfLearnError::Dataset { iteration: i, source })?;

        let model_dir = dir.join("model");
        fs::create_dir_all(&model_dir).map_err(|e| io_err(&model_dir, e))?;
        let tuned = hook
            .tune(&manifest.dataset_path, &policy_id, &model_dir)
            .map_err(|e| match e {
                TuneError::Missing(p) => SelfLearnError::TuneHookMissing(p),
                TuneError::Failed(reason) => SelfLearnError::TuneHookFailure { iteration: i, reason },
            })?;

        let tuned_policy = open_policy(factory, &tuned)?;
        let (perf, test_metrics) = evaluate(
            tuned_policy.as_ref(),
            &config.test,
            kbs,
            &config.episode,
            config.parallelism,
        )?;
        let delta = perf - prev_perf;
        let record = IterationRecord {
            index: i,
            policy_id: policy_id.clone(),
            tuned_policy_id: tuned.clone(),
            synthesized: batch.entries.len(),
            failed: batch.metrics.failed,
            kept_after_filter: merge.kept_after_filter,
            merged_total: store.len(),
            dataset_records: manifest.records,
            test_perf: perf,
            delta_perf: delta,
        };
        info!(iteration = i, tuned = %tuned, perf, delta, "iteration complete");
        write_json(
            &dir.join("report.json"),
            &IterationReport {
                record: &record,
                merge: &merge,
                dataset: &manifest,
                synthesis: &batch.metrics,
                test: &test_metrics,
                store_lengths: store.lengths(),
            },
        )?;
        records.push(record);
        prev_perf = perf;
        policy_id = tuned;
        if delta <= config.epsilon {
            halt = HaltReason::DeltaWithinEpsilon;
            break;
        }
    }

    let outcome = LoopOutcome {
        baseline_policy: config.base_policy.clone(),
        baseline_perf,
        records,
        halt,
        final_policy: policy_id,
        store,
    };
    write_json(
        &out_dir.join("summary.json"),
        &Summary {
            baseline_policy: &outcome.baseline_policy,
            baseline_perf,
            epsilon: config.epsilon,
            tau: config.tau,
            halt,
            final_policy: &outcome.final_policy,
            iterations: &outcome.records,
        },
    )?;
    Ok(outcome)
}

/// Aligned plain-text table: iteration, policy, kept, merged, perf, delta.
pub fn summary_table(outcome: &LoopOutcome) -> String {
    let mut rows = vec![[
        "iter".to_string(),
        "policy".to_string(),
        "tuned".to_string(),
        "kept".to_string(),
        "merged".to_string(),
        "perf".to_string(),
        "dperf".to_string(),
    ]];
    for r in &outcome.records {
        rows.push([
            r.index.to_string(),
            r.policy_id.clone(),
            r.tuned_policy_id.clone(),
            format!("{}/{}", r.kept_after_filter, r.synthesized),
            r.merged_total.to_string(),
            format!("{:.4}", r.test_perf),
            format!("{:+.4}", r.delta_perf),
        ]);
    }
    let widths: Vec<usize> = (0..7)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = format!(
        "baseline {} perf {:.4}\n",
        outcome.baseline_policy, outcome.baseline_perf
    );
    for r in &rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    let _ = writeln!(out, "halt: {}", outcome.halt.as_str());
    out
}
