//! Knowledge-based filtering and the best-path trajectory store.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::runtime::KbSet;
use crate::trajectory::{OutcomeMetric, Trajectory};
use crate::validator::{validate_with, PathComparison};

/// QA correctness threshold on token F1.
pub const DEFAULT_TAU: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    ParseError,
    InvalidAction,
    MisorderedAction,
    PathMismatch,
    Outcome,
    UnknownKb,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::ParseError => "parse_error",
            DropReason::InvalidAction => "invalid_action",
            DropReason::MisorderedAction => "misordered_action",
            DropReason::PathMismatch => "path_mismatch",
            DropReason::Outcome => "outcome",
            DropReason::UnknownKb => "unknown_kb",
        }
    }
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropped {
    pub task_id: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterReport {
    pub kept: Vec<Trajectory>,
    pub dropped: Vec<Dropped>,
}

impl FilterReport {
    pub fn reason_counts(&self) -> BTreeMap<DropReason, usize> {
        let mut out = BTreeMap::new();
        for d in &self.dropped {
            *out.entry(d.reason).or_insert(0) += 1;
        }
        out
    }
}

/// F1 at least `tau` for QA; goal success for household tasks.
pub fn is_correct(traj: &Trajectory, tau: f64) -> bool {
    match traj.outcome.metric {
        OutcomeMetric::F1 => traj.outcome.reward >= tau,
        OutcomeMetric::GoalSuccess => traj.outcome.success,
    }
}

/// Why `traj` would be dropped, or `None` if it is kept. Validation
/// problems are reported before outcome problems.
pub fn drop_reason(traj: &Trajectory, kbs: &KbSet, tau: f64, mode: PathComparison) -> Option<DropReason> {
    let Some(kb) = kbs.get(&traj.kb_id) else {
        return Some(DropReason::UnknownKb);
    };
    let report = validate_with(kb, traj, mode);
    if report.parse_error_count > 0 {
        Some(DropReason::ParseError)
    } else if report.invalid_count > 0 {
        Some(DropReason::InvalidAction)
    } else if report.misordered_count > 0 {
        Some(DropReason::MisorderedAction)
    } else if report.path_mismatch_count > 0 {
        Some(DropReason::PathMismatch)
    } else if !is_correct(traj, tau) {
        Some(DropReason::Outcome)
    } else {
        None
    }
}

pub fn filter(trajectories: &[Trajectory], kbs: &KbSet, tau: f64) -> FilterReport {
    filter_with(trajectories, kbs, tau, PathComparison::Strict)
}

pub fn filter_with(trajectories: &[Trajectory], kbs: &KbSet, tau: f64, mode: PathComparison) -> FilterReport {
    let mut report = FilterReport::default();
    for t in trajectories {
        match drop_reason(t, kbs, tau, mode) {
            None => report.kept.push(t.clone()),
            Some(reason) => {
                debug!(task = %t.task_id, %reason, "dropping trajectory");
                report.dropped.push(Dropped {
                    task_id: t.task_id.clone(),
                    reason,
                });
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTrajectory {
    /// Iteration whose synthesis produced this trajectory.
    pub iteration: usize,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeDecision {
    Inserted,
    Replaced { old_len: usize, new_len: usize },
    KeptIncumbent,
}

/// Best clean and correct trajectory per task, plus the per-iteration
/// history of stored path lengths.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryStore {
    best: BTreeMap<String, StoredTrajectory>,
    history: Vec<BTreeMap<String, usize>>,
}

impl TrajectoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.best.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best.is_empty()
    }

    pub fn get(&self, task_id: &str) -> Option<&StoredTrajectory> {
        self.best.get(task_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StoredTrajectory> {
        self.best.values()
    }

    pub fn total_steps(&self) -> usize {
        self.best.values().map(|s| s.trajectory.len()).sum()
    }

    pub fn lengths(&self) -> BTreeMap<String, usize> {
        self.best.iter().map(|(k, v)| (k.clone(), v.trajectory.len())).collect()
    }

    /// Stored lengths after each completed iteration.
    pub fn history(&self) -> &[BTreeMap<String, usize>] {
        &self.history
    }

    pub fn snapshot(&mut self) {
        self.history.push(self.lengths());
    }

    /// Keep the shorter of incumbent and candidate; ties keep the incumbent.
    /// The candidate must already have passed the filter.
    pub fn merge(&mut self, candidate: Trajectory, iteration: usize) -> MergeDecision {
        match self.best.get_mut(&candidate.task_id) {
            None => {
                self.best.insert(
                    candidate.task_id.clone(),
                    StoredTrajectory {
                        iteration,
                        trajectory: candidate,
                    },
                );
                MergeDecision::Inserted
            }
            Some(inc) if candidate.len() < inc.trajectory.len() => {
                let old_len = inc.trajectory.len();
                let new_len = candidate.len();
                *inc = StoredTrajectory {
                    iteration,
                    trajectory: candidate,
                };
                MergeDecision::Replaced { old_len, new_len }
            }
            Some(_) => MergeDecision::KeptIncumbent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MergeReport {
    pub synthesized: usize,
    pub kept_after_filter: usize,
    pub dropped: Vec<Dropped>,
    pub inserted: usize,
    pub replaced: usize,
    pub kept_incumbent: usize,
}

/// Filter `trajectories`, then merge the survivors into `store`.
pub fn filter_and_merge(
    trajectories: &[Trajectory],
    store: &mut TrajectoryStore,
    kbs: &KbSet,
    tau: f64,
    iteration: usize,
) -> MergeReport {
    let filtered = filter(trajectories, kbs, tau);
    let mut report = MergeReport {
        synthesized: trajectories.len(),
        kept_after_filter: filtered.kept.len(),
        dropped: filtered.dropped,
        ..MergeReport::default()
    };
    for t in filtered.kept {
        match store.merge(t, iteration) {
            MergeDecision::Inserted => report.inserted += 1,
            MergeDecision::Replaced { .. } => report.replaced += 1,
            MergeDecision::KeptIncumbent => report.kept_incumbent += 1,
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action_kb::shipped;
    use crate::env::{metrics::f1_score, QaScenario, Scenario};
    use crate::runtime::{run_episode, EpisodeConfig, ScriptedPolicy};
    use crate::trajectory::Outcome;
    use proptest::prelude::*;

    fn qa_traj(task: &str, actions: &[&str], reward: f64) -> Trajectory {
        let kb = shipped::hotpotqa();
        let steps: Vec<_> = actions
            .iter()
            .map(|a| crate::trajectory::parse_action(a, &kb).unwrap())
            .collect();
        let mut t = Trajectory::new(task, "hotpotqa", "q");
        t.steps = crate::validator::steps_for_actions(&steps);
        t.outcome = Outcome {
            reward,
            success: reward == 1.0,
            answer: None,
            metric: OutcomeMetric::F1,
        };
        t
    }

    #[test]
    fn misordered_but_correct_is_dropped() {
        let kbs = KbSet::shipped();
        let t = qa_traj("t", &["Lookup[x]", "Finish[y]"], 1.0);
        assert_eq!(
            drop_reason(&t, &kbs, DEFAULT_TAU, PathComparison::Strict),
            Some(DropReason::MisorderedAction)
        );
    }

    #[test]
    fn threshold_decides_outcome() {
        let kbs = KbSet::shipped();
        let exact = qa_traj("t", &["Search[x]", "Finish[y]"], 1.0);
        assert_eq!(drop_reason(&exact, &kbs, DEFAULT_TAU, PathComparison::Strict), None);
        let half = f1_score("alpha beta", "alpha gamma");
        assert!((half - 0.5).abs() < 1e-12);
        let partial = qa_traj("t", &["Search[x]", "Finish[y]"], half);
        assert_eq!(
            drop_reason(&partial, &kbs, DEFAULT_TAU, PathComparison::Strict),
            Some(DropReason::Outcome)
        );
    }

    #[test]
    fn unknown_kb_is_dropped() {
        let mut t = qa_traj("t", &["Search[x]", "Finish[y]"], 1.0);
        t.kb_id = "nope".into();
        assert_eq!(
            filter(&[t], &KbSet::shipped(), 0.7).dropped[0].reason,
            DropReason::UnknownKb
        );
    }

    #[test]
    fn merge_prefers_shorter_and_keeps_incumbent_on_tie() {
        let mut store = TrajectoryStore::new();
        let five = qa_traj(
            "t",
            &["Search[a]", "Search[b]", "Lookup[c]", "Search[d]", "Finish[e]"],
            1.0,
        );
        let three = qa_traj("t", &["Search[a]", "Search[b]", "Finish[e]"], 1.0);
        let other_three = qa_traj("t", &["Retrieve[a]", "Lookup[b]", "Finish[e]"], 1.0);
        assert_eq!(store.merge(five, 0), MergeDecision::Inserted);
        assert_eq!(
            store.merge(three.clone(), 1),
            MergeDecision::Replaced { old_len: 5, new_len: 3 }
        );
        assert_eq!(store.merge(other_three, 2), MergeDecision::KeptIncumbent);
        assert_eq!(store.get("t").unwrap().trajectory, three);
        assert_eq!(store.get("t").unwrap().iteration, 1);
    }

    #[test]
    fn unclean_newcomer_never_replaces() {
        let kbs = KbSet::shipped();
        let mut store = TrajectoryStore::new();
        let five = qa_traj(
            "t",
            &["Search[a]", "Search[b]", "Lookup[c]", "Search[d]", "Finish[e]"],
            1.0,
        );
        filter_and_merge(std::slice::from_ref(&five), &mut store, &kbs, 0.7, 0);
        let bad = qa_traj("t", &["Lookup[a]", "Finish[e]"], 1.0);
        let r = filter_and_merge(&[bad], &mut store, &kbs, 0.7, 1);
        assert_eq!(r.kept_after_filter, 0);
        assert_eq!(store.get("t").unwrap().trajectory, five);
    }

    #[test]
    fn runtime_trajectories_filter_on_outcome() {
        let kb = shipped::hotpotqa();
        let scenario = Scenario::Qa(QaScenario {
            task_id: "q".into(),
            kb: "hotpotqa".into(),
            question: "What colour is the sky?".into(),
            gold_answer: "blue sky".into(),
            corpus: [("Sky".to_string(), vec![vec!["The sky is blue.".to_string()]])]
                .into_iter()
                .collect(),
            gold_script: vec![],
        });
        let p = ScriptedPolicy::new("p").with_script(
            "q",
            vec![
                "ActionPath 1: Start\nThought 1: t\nAction 1: Search[Sky]".into(),
                "ActionPath 2: Start->Search[Sky]\nThought 2: t\nAction 2: Finish[blue]".into(),
            ],
        );
        let mut env = scenario.instantiate();
        let t = run_episode(&kb, env.as_mut(), &p, &EpisodeConfig::default()).unwrap();
        assert!((t.outcome.reward - f1_score("blue", "blue sky")).abs() < 1e-12);
        let r = filter(&[t], &KbSet::shipped(), 0.7);
        assert_eq!(r.dropped[0].reason, DropReason::Outcome);
    }

    fn arb_traj() -> impl Strategy<Value = Trajectory> {
        let names = prop::sample::select(vec!["Search[a]", "Retrieve[b]", "Lookup[c]", "Finish[d]"]);
        (prop::collection::vec(names, 1..6), 0.0f64..=1.0, 0usize..4)
            .prop_map(|(acts, reward, id)| qa_traj(&format!("t{id}"), &acts, reward))
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(trajs in prop::collection::vec(arb_traj(), 0..12), tau in 0.0f64..=1.0) {
            let kbs = KbSet::shipped();
            let once = filter(&trajs, &kbs, tau);
            let twice = filter(&once.kept, &kbs, tau);
            prop_assert_eq!(&twice.kept, &once.kept);
            prop_assert!(twice.dropped.is_empty());
        }

        #[test]
        fn stored_lengths_never_grow(batches in prop::collection::vec(prop::collection::vec(arb_traj(), 0..6), 1..5)) {
            let kbs = KbSet::shipped();
            let mut store = TrajectoryStore::new();
            for (i, batch) in batches.iter().enumerate() {
                filter_and_merge(batch, &mut store, &kbs, 0.5, i);
                store.snapshot();
            }
            for pair in store.history().windows(2) {
                for (task, len) in &pair[0] {
                    prop_assert!(pair[1][task] <= *len);
                }
            }
            for s in store.iter() {
                prop_assert_eq!(drop_reason(&s.trajectory, &kbs, 0.5, PathComparison::Strict), None);
            }
        }
    }
}
