//! Rate tables, per-task results and violation exemplars over trajectory
//! corpora.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{read_jsonl, JsonlError};
use crate::runtime::{BatchEntry, KbSet};
use crate::trajectory::{canonical_path_of, render_path, OutcomeMetric, Trajectory};
use crate::validator::{compute_rates, previous_action, validate_trajectory};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no trajectories to report on")]
    EmptyInput,
    #[error("task {task_id} needs KB {kb_id}, which is not loaded")]
    MissingKb { task_id: String, kb_id: String },
    #[error("{path}:{line}: not a trajectory or batch entry: {detail}")]
    Malformed { path: String, line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] JsonlError),
}

impl ReportError {
    pub fn code(&self) -> &'static str {
        match self {
            ReportError::EmptyInput => "EMPTY_INPUT",
            ReportError::MissingKb { .. } => "MISSING_KB",
            ReportError::Malformed { .. } => "MALFORMED_TRAJECTORY",
            ReportError::Io(JsonlError::Parse { .. }) => "MALFORMED_TRAJECTORY",
            ReportError::Io(JsonlError::Io { .. }) => "IO_ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub trajectories: Vec<Trajectory>,
    /// Batch entries that never produced a trajectory.
    pub failed: usize,
}

impl Corpus {
    pub fn new(name: impl Into<String>, trajectories: Vec<Trajectory>) -> Self {
        Self {
            name: name.into(),
            trajectories,
            failed: 0,
        }
    }
}

/// Read a JSON Lines file of trajectories or batch entries.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, ReportError> {
    let path = path.as_ref();
    let rows: Vec<serde_json::Value> = read_jsonl(path)?;
    let mut trajectories = Vec::new();
    let mut failed = 0;
    for (i, row) in rows.into_iter().enumerate() {
        let malformed = |e: serde_json::Error| ReportError::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            detail: e.to_string(),
        };
        if row.get("status").is_some() {
            match serde_json::from_value::<BatchEntry>(row).map_err(malformed)? {
                BatchEntry::Completed { trajectory } => trajectories.push(trajectory),
                BatchEntry::Failed { .. } => failed += 1,
            }
        } else {
            trajectories.push(serde_json::from_value(row).map_err(malformed)?);
        }
    }
    let name = path
        .parent()
        .and_then(|p| p.file_name())
        .map(|n| {
            format!(
                "{}/{}",
                n.to_string_lossy(),
                path.file_name().unwrap_or_default().to_string_lossy()
            )
        })
        .unwrap_or_else(|| path.display().to_string());
    Ok(Corpus {
        name,
        trajectories,
        failed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub corpus: String,
    pub trajectories: usize,
    pub failed: usize,
    pub actions: usize,
    pub invalid_rate: f64,
    pub misordered_rate: f64,
    pub path_mismatch_rate: f64,
    pub parse_errors: usize,
    pub unclean_trajectory_rate: f64,
    pub mean_reward: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub corpus: String,
    pub task_id: String,
    pub metric: OutcomeMetric,
    pub reward: f64,
    pub success: bool,
    pub steps: usize,
    pub clean: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub corpus: String,
    pub task_id: String,
    /// 1-based, as displayed in prompts.
    pub step: usize,
    pub flags: Vec<String>,
    pub previous: String,
    pub action: String,
    pub allowed: Vec<String>,
    pub declared_path: String,
    pub expected_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub corpora: Vec<CorpusRow>,
    pub tasks: Vec<TaskRow>,
    pub exemplars: Vec<Exemplar>,
}

pub fn build_report(corpora: &[Corpus], kbs: &KbSet, max_exemplars: usize) -> Result<Report, ReportError> {
    if corpora.iter().all(|c| c.trajectories.is_empty()) {
        return Err(ReportError::EmptyInput);
    }
    let mut report = Report {
        corpora: Vec::new(),
        tasks: Vec::new(),
        exemplars: Vec::new(),
    };
    for c in corpora {
        let mut validations = Vec::with_capacity(c.trajectories.len());
        for t in &c.trajectories {
            let kb = kbs.get(&t.kb_id).ok_or_else(|| ReportError::MissingKb {
                task_id: t.task_id.clone(),
                kb_id: t.kb_id.clone(),
            })?;
            let v = validate_trajectory(kb, t);
            report.tasks.push(TaskRow {
                corpus: c.name.clone(),
                task_id: t.task_id.clone(),
                metric: t.outcome.metric,
                reward: t.outcome.reward,
                success: t.outcome.success,
                steps: t.len(),
                clean: v.clean,
            });
            for verdict in v.verdicts.iter().filter(|v| !v.is_clean()) {
                if report.exemplars.len() >= max_exemplars {
                    break;
                }
                let step = &t.steps[verdict.index];
                let prev = previous_action(kb, &t.steps[..verdict.index]).to_string();
                report.exemplars.push(Exemplar {
                    corpus: c.name.clone(),
                    task_id: t.task_id.clone(),
                    step: verdict.index + 1,
                    flags: verdict.flags.iter().map(|f| f.as_str().to_string()).collect(),
                    allowed: kb.successors(&prev).to_vec(),
                    previous: prev,
                    action: if step.is_parsed() {
                        step.action.raw.clone()
                    } else {
                        step.raw_output.clone().unwrap_or_default()
                    },
                    declared_path: render_path(&step.action_path),
                    expected_path: render_path(&canonical_path_of(&t.steps, verdict.index)),
                });
            }
            validations.push(v);
        }
        let n = c.trajectories.len();
        let rates = compute_rates(&validations).ok();
        let mean = |f: &dyn Fn(&Trajectory) -> f64| {
            if n == 0 {
                0.0
            } else {
                c.trajectories.iter().map(f).sum::<f64>() / n as f64
            }
        };
        report.corpora.push(CorpusRow {
            corpus: c.name.clone(),
            trajectories: n,
            failed: c.failed,
            actions: rates.as_ref().map_or(0, |r| r.actions),
            invalid_rate: rates.as_ref().map_or(0.0, |r| r.invalid_rate),
            misordered_rate: rates.as_ref().map_or(0.0, |r| r.misordered_rate),
            path_mismatch_rate: rates.as_ref().map_or(0.0, |r| r.path_mismatch_rate),
            parse_errors: rates.as_ref().map_or(0, |r| r.parse_errors),
            unclean_trajectory_rate: rates.as_ref().map_or(0.0, |r| r.unclean_trajectory_rate),
            mean_reward: mean(&|t| t.outcome.reward),
            success_rate: mean(&|t| if t.outcome.success { 1.0 } else { 0.0 }),
        });
    }
    Ok(report)
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.first().map_or(0, Vec::len);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut rows = vec![[
            "corpus",
            "trajs",
            "failed",
            "actions",
            "invalid",
            "misordered",
            "path_mismatch",
            "parse_errors",
            "reward",
            "success",
        ]
        .map(str::to_string)
        .to_vec()];
        for c in &self.corpora {
            rows.push(vec![
                c.corpus.clone(),
                c.trajectories.to_string(),
                c.failed.to_string(),
                c.actions.to_string(),
                pct(c.invalid_rate),
                pct(c.misordered_rate),
                pct(c.path_mismatch_rate),
                c.parse_errors.to_string(),
                format!("{:.4}", c.mean_reward),
                pct(c.success_rate),
            ]);
        }
        let mut out = String::from("Action rates\n");
        out.push_str(&table(&rows));

        let mut rows = vec![["corpus", "task", "metric", "reward", "success", "steps", "clean"]
            .map(str::to_string)
            .to_vec()];
        for t in &self.tasks {
            rows.push(vec![
                t.corpus.clone(),
                t.task_id.clone(),
                match t.metric {
                    OutcomeMetric::F1 => "f1".into(),
                    OutcomeMetric::GoalSuccess => "success".into(),
                },
                format!("{:.4}", t.reward),
                if t.success { "yes" } else { "no" }.into(),
                t.steps.to_string(),
                if t.clean { "yes" } else { "no" }.into(),
            ]);
        }
        out.push_str("\nPer task\n");
        out.push_str(&table(&rows));

        if !self.exemplars.is_empty() {
            out.push_str("\nViolations\n");
            for e in &self.exemplars {
                let _ = writeln!(
                    out,
                    "[{}] {} step {}: {}",
                    e.corpus,
                    e.task_id,
                    e.step,
                    e.flags.join(", ")
                );
                let _ = writeln!(out, "    after:    {}", e.previous);
                let _ = writeln!(out, "    action:   {}", e.action);
                let _ = writeln!(out, "    allowed:  {}", e.allowed.join(", "));
                let _ = writeln!(out, "    declared: {}", e.declared_path);
                let _ = writeln!(out, "    expected: {}", e.expected_path);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action_kb::shipped;
    use crate::trajectory::{parse_action, Step};
    use crate::validator::steps_for_actions;

    fn traj(task: &str, acts: &[&str]) -> Trajectory {
        let kb = shipped::hotpotqa();
        let calls: Vec<_> = acts.iter().map(|a| parse_action(a, &kb).unwrap()).collect();
        let mut t = Trajectory::new(task, "hotpotqa", "q");
        t.steps = steps_for_actions(&calls);
        t
    }

    #[test]
    fn clean_corpus_has_zero_rates() {
        let c = Corpus::new("clean", vec![traj("a", &["Search[x]", "Finish[y]"])]);
        let r = build_report(&[c], &KbSet::shipped(), 10).unwrap();
        assert_eq!(r.corpora[0].invalid_rate, 0.0);
        assert_eq!(r.corpora[0].misordered_rate, 0.0);
        assert!(r.exemplars.is_empty());
    }

    #[test]
    fn flagged_steps_become_exemplars_and_parse_errors_count_separately() {
        let mut bad = traj("b", &["Lookup[x]", "Finish[y]"]);
        bad.steps.push(Step::unparsed(
            2,
            "garbage",
            crate::trajectory::ParseFailure::MissingField("ActionPath".into()),
        ));
        let clean = Corpus::new("enforced", vec![traj("a", &["Search[x]", "Finish[y]"])]);
        let dirty = Corpus::new("free", vec![bad]);
        let r = build_report(&[clean, dirty], &KbSet::shipped(), 10).unwrap();
        assert_eq!(r.corpora.len(), 2);
        assert!(r.corpora[0].misordered_rate < r.corpora[1].misordered_rate);
        assert_eq!(r.corpora[1].parse_errors, 1);
        let first = &r.exemplars[0];
        assert_eq!((first.step, first.previous.as_str()), (1, "Start"));
        assert_eq!(first.flags, vec!["misordered_action"]);
        assert!(r.to_text().contains("Violations"));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(
            build_report(&[], &KbSet::shipped(), 1),
            Err(ReportError::EmptyInput)
        ));
    }
}
