//! Parallel episode batches with input-ordered results.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::episode::{run_episode, EpisodeConfig, EpisodeError};
use super::policy::PolicyClient;
use crate::action_kb::{shipped, ActionKnowledge};
use crate::env::Scenario;
use crate::trajectory::{OutcomeMetric, Trajectory};
use crate::validator::{compute_rates, validate_with, RateSummary};

/// Knowledge bases by task id.
#[derive(Debug, Clone, Default)]
pub struct KbSet {
    kbs: BTreeMap<String, ActionKnowledge>,
}

impl KbSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// The seven bundled KBs.
    pub fn shipped() -> Self {
        let mut s = Self::new();
        for kb in shipped::all() {
            s.insert(kb);
        }
        s
    }

    pub fn single(kb: ActionKnowledge) -> Self {
        let mut s = Self::new();
        s.insert(kb);
        s
    }

    pub fn insert(&mut self, kb: ActionKnowledge) {
        self.kbs.insert(kb.task_id().to_string(), kb);
    }

    pub fn get(&self, task_id: &str) -> Option<&ActionKnowledge> {
        self.kbs.get(task_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.kbs.keys().map(String::as_str)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BatchError {
    #[error("no tasks to run")]
    EmptyInput,
    #[error("task {task_id} needs KB {kb_id}, which is not loaded")]
    MissingKb { task_id: String, kb_id: String },
    #[error(transparent)]
    Config(#[from] EpisodeError),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BatchEntry {
    Completed { trajectory: Trajectory },
    Failed { task_id: String, error: String },
}

impl BatchEntry {
    pub fn trajectory(&self) -> Option<&Trajectory> {
        match self {
            BatchEntry::Completed { trajectory } => Some(trajectory),
            BatchEntry::Failed { .. } => None,
        }
    }

    pub fn task_id(&self) -> &str {
        match self {
            BatchEntry::Completed { trajectory } => &trajectory.task_id,
            BatchEntry::Failed { task_id, .. } => task_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMetrics {
    pub episodes: usize,
    pub completed: usize,
    pub failed: usize,
    /// Mean reward over completed episodes: F1 for QA, success for household.
    pub mean_reward: f64,
    /// Mean F1 over completed QA episodes, if any.
    pub mean_f1: Option<f64>,
    pub success_rate: f64,
    pub rejections: usize,
    pub rates: Option<RateSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub entries: Vec<BatchEntry>,
    pub metrics: BatchMetrics,
}

impl BatchResult {
    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.entries.iter().filter_map(BatchEntry::trajectory)
    }
}

/// Aggregate metrics over a set of entries.
pub fn batch_metrics(entries: &[BatchEntry], kbs: &KbSet, config: &EpisodeConfig) -> BatchMetrics {
    let done: Vec<&Trajectory> = entries.iter().filter_map(BatchEntry::trajectory).collect();
    let n = done.len();
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    let rewards: Vec<f64> = done.iter().map(|t| t.outcome.reward).collect();
    let f1s: Vec<f64> = done
        .iter()
        .filter(|t| t.outcome.metric == OutcomeMetric::F1)
        .map(|t| t.outcome.reward)
        .collect();
    let reports: Vec<_> = done
        .iter()
        .filter_map(|t| kbs.get(&t.kb_id).map(|kb| validate_with(kb, t, config.path_comparison)))
        .collect();
    BatchMetrics {
        episodes: entries.len(),
        completed: n,
        failed: entries.len() - n,
        mean_reward: mean(&rewards),
        mean_f1: (!f1s.is_empty()).then(|| mean(&f1s)),
        success_rate: if n == 0 {
            0.0
        } else {
            done.iter().filter(|t| t.outcome.success).count() as f64 / n as f64
        },
        rejections: done
            .iter()
            .map(|t| t.rejections.iter().filter(|r| !r.accepted).count())
            .sum(),
        rates: compute_rates(&reports).ok(),
    }
}

/// Run every scenario as an independent episode on up to `parallelism`
/// threads. Results keep input order. An unreachable policy fails only its
/// own task.
pub fn run_batch(
    scenarios: &[Scenario],
    kbs: &KbSet,
    policy: &dyn PolicyClient,
    config: &EpisodeConfig,
    parallelism: usize,
) -> Result<BatchResult, BatchError> {
    if scenarios.is_empty() {
        return Err(BatchError::EmptyInput);
    }
    config.check()?;
    for s in scenarios {
        if kbs.get(s.kb_id()).is_none() {
            return Err(BatchError::MissingKb {
                task_id: s.task_id().to_string(),
                kb_id: s.kb_id().to_string(),
            });
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| BatchError::Pool(e.to_string()))?;
    let entries: Vec<BatchEntry> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|s| {
                let kb = kbs.get(s.kb_id()).expect("checked above");
                let mut env = s.instantiate();
                match run_episode(kb, env.as_mut(), policy, config) {
                    Ok(trajectory) => BatchEntry::Completed { trajectory },
                    Err(e) => BatchEntry::Failed {
                        task_id: s.task_id().to_string(),
                        error: e.to_string(),
                    },
                }
            })
            .collect()
    });
    let metrics = batch_metrics(&entries, kbs, config);
    Ok(BatchResult { entries, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::starter;
    use crate::runtime::policy::ScriptedPolicy;

    fn gold_policy(scenarios: &[Scenario], kbs: &KbSet) -> ScriptedPolicy {
        ScriptedPolicy::from_gold("gold", scenarios.iter().map(|s| (s, kbs.get(s.kb_id()).unwrap()))).unwrap()
    }

    #[test]
    fn household_gold_batch_succeeds() {
        let kbs = KbSet::shipped();
        let scenarios = starter::household().scenarios;
        let policy = gold_policy(&scenarios, &kbs);
        let r = run_batch(&scenarios, &kbs, &policy, &EpisodeConfig::default(), 4).unwrap();
        assert_eq!(r.metrics.success_rate, 1.0);
        let ids: Vec<&str> = r.entries.iter().map(BatchEntry::task_id).collect();
        let expected: Vec<&str> = scenarios.iter().map(Scenario::task_id).collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn qa_gold_batch_is_exact() {
        let kbs = KbSet::shipped();
        let scenarios = starter::qa().scenarios;
        let policy = gold_policy(&scenarios, &kbs);
        let r = run_batch(&scenarios, &kbs, &policy, &EpisodeConfig::default(), 3).unwrap();
        for t in r.trajectories() {
            assert_eq!(t.outcome.reward, 1.0, "{}: {:?}", t.task_id, t.outcome.answer);
        }
        let rates = r.metrics.rates.unwrap();
        assert_eq!(
            rates.invalid_rate + rates.misordered_rate + rates.path_mismatch_rate,
            0.0
        );
    }

    #[test]
    fn empty_batch_is_rejected() {
        let kbs = KbSet::shipped();
        let r = run_batch(&[], &kbs, &ScriptedPolicy::new("p"), &EpisodeConfig::default(), 1);
        assert_eq!(r.unwrap_err(), BatchError::EmptyInput);
    }

    #[test]
    fn unreachable_task_fails_alone() {
        let kbs = KbSet::shipped();
        let scenarios = starter::qa().scenarios;
        let mut policy = gold_policy(&scenarios[1..], &kbs);
        policy.insert("unused", vec![]);
        let r = run_batch(&scenarios, &kbs, &policy, &EpisodeConfig::default(), 2).unwrap();
        assert!(matches!(r.entries[0], BatchEntry::Failed { .. }));
        assert_eq!(r.metrics.failed, 1);
        assert_eq!(r.metrics.completed, scenarios.len() - 1);
    }
}
