//! Two-stage KB drafting with a language model and a human in the loop.
//!
//! Stage one asks the policy for actions and rules from a task description
//! and writes `draft.kb.json` plus a `review.md` checklist. After a human
//! edits the draft, stage two keeps the refined actions fixed, asks only for
//! rules and terminals, and writes `final.kb.json`. Neither stage loads the
//! result as [`ActionKnowledge`](super::ActionKnowledge); that is left to
//! `load_kb`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::Deserialize;
use thiserror::Error;

use super::{check_document, KbDocument};
use crate::runtime::{GenerationRequest, PolicyClient, PolicyError};

/// Task id carried by distillation requests.
pub const DISTILL_TASK_ID: &str = "distill";

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("task description is empty")]
    EmptyTaskDescription,
    #[error("policy unavailable: {0}")]
    PolicyUnavailable(String),
    #[error("policy failed: {0}")]
    Policy(PolicyError),
    #[error("draft is not a KB document ({detail}); raw output saved to {}", raw_path.display())]
    UnparsableDraft { raw_path: PathBuf, detail: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DistillError {
    pub fn code(&self) -> &'static str {
        match self {
            DistillError::EmptyTaskDescription => "EMPTY_TASK_DESCRIPTION",
            DistillError::PolicyUnavailable(_) => "POLICY_UNAVAILABLE",
            DistillError::Policy(_) => "POLICY_ERROR",
            DistillError::UnparsableDraft { .. } => "UNPARSABLE_DRAFT",
            DistillError::Io { .. } => "IO_ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewItem {
    pub code: String,
    pub message: String,
    /// The draft cannot load until this is fixed.
    pub blocking: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReviewChecklist {
    pub items: Vec<ReviewItem>,
}

impl ReviewChecklist {
    pub fn for_document(doc: &KbDocument) -> Self {
        let mut items: Vec<ReviewItem> = check_document(doc)
            .into_iter()
            .map(|v| ReviewItem {
                code: v.code().to_string(),
                message: v.to_string(),
                blocking: true,
            })
            .collect();
        for a in &doc.actions {
            items.push(ReviewItem {
                code: "confirm_action".into(),
                message: format!(
                    "Keep `{}` only if the task needs it; drafts include redundant actions.",
                    a.name
                ),
                blocking: false,
            });
        }
        items.push(ReviewItem {
            code: "confirm_definitions".into(),
            message: "Check every definition and verb-phrase pattern against the environment's real commands.".into(),
            blocking: false,
        });
        Self { items }
    }

    pub fn blocking(&self) -> impl Iterator<Item = &ReviewItem> {
        self.items.iter().filter(|i| i.blocking)
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.items.iter().any(|i| i.code == code)
    }

    pub fn to_markdown(&self, title: &str) -> String {
        let mut out = format!("# Review: {title}\n\n");
        let blocking: Vec<_> = self.blocking().collect();
        if blocking.is_empty() {
            out.push_str("The draft satisfies every structural invariant.\n\n");
        } else {
            out.push_str("## Must fix\n\n");
            for i in blocking {
                let _ = writeln!(out, "- [ ] `{}` {}", i.code, i.message);
            }
            out.push('\n');
        }
        out.push_str("## Confirm\n\n");
        for i in self.items.iter().filter(|i| !i.blocking) {
            let _ = writeln!(out, "- [ ] {}", i.message);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DraftOutcome {
    pub document: KbDocument,
    pub checklist: ReviewChecklist,
    pub draft_path: PathBuf,
    pub review_path: PathBuf,
}

const STAGE_ONE: &str = "You are helping a domain expert write Action Knowledge for a language agent.
Action Knowledge lists the actions an agent may take and the rules for which action may follow which.
Propose a KB for the task below. Answer with one JSON object with the fields:
  task_id: short identifier
  actions: array of {name, arg_slots: [{slot_name, description}], definition, syntax_style: \"bracket\" or \"verb_phrase\", pattern (verb_phrase only, e.g. \"take {object} from {receptacle}\")}
  rules: object mapping \"Start\" and every action name to the array of actions that may follow it
  terminals: array of actions that end the task (their rule list must be empty)
Every action must be reachable from Start and able to reach a terminal.

Task:
";

const STAGE_TWO: &str = "The actions below were reviewed by a domain expert and are final. Do not add, remove or rename actions.
Write only the transition rules. Answer with one JSON object {\"rules\": {...}, \"terminals\": [...]} where rules maps \"Start\" and every action to the actions that may follow it.

Task:
";

fn call(policy: &dyn PolicyClient, prompt: String, call_index: usize) -> Result<String, DistillError> {
    let mut req = GenerationRequest::new(prompt);
    req.task_id = DISTILL_TASK_ID.to_string();
    req.call_index = call_index;
    req.sampling.max_tokens = 2048;
    policy.generate(&req).map_err(|e| match e {
        PolicyError::Unavailable(m) => DistillError::PolicyUnavailable(m),
        other => DistillError::Policy(other),
    })
}

/// The outermost `{ ... }` span, so fenced or chatty answers still parse.
fn json_span(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}

fn write(path: &Path, contents: &str) -> Result<(), DistillError> {
    fs::write(path, contents).map_err(|source| DistillError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn unparsable(out_dir: &Path, raw: &str, detail: String) -> DistillError {
    let raw_path = out_dir.join("draft.raw.txt");
    if let Err(e) = write(&raw_path, raw) {
        return e;
    }
    DistillError::UnparsableDraft { raw_path, detail }
}

fn ensure_dir(dir: &Path) -> Result<(), DistillError> {
    fs::create_dir_all(dir).map_err(|source| DistillError::Io {
        path: dir.display().to_string(),
        source,
    })
}

/// Stage one: draft actions and rules, write the draft and its checklist.
pub fn distill_stage_one(
    policy: &dyn PolicyClient,
    task_description: &str,
    out_dir: &Path,
) -> Result<DraftOutcome, DistillError> {
    if task_description.trim().is_empty() {
        return Err(DistillError::EmptyTaskDescription);
    }
    ensure_dir(out_dir)?;
    let raw = call(policy, format!("{STAGE_ONE}{}\n", task_description.trim()), 0)?;
    let document: KbDocument = match json_span(&raw).map(serde_json::from_str) {
        Some(Ok(doc)) => doc,
        Some(Err(e)) => return Err(unparsable(out_dir, &raw, e.to_string())),
        None => return Err(unparsable(out_dir, &raw, "no JSON object found".into())),
    };
    let checklist = ReviewChecklist::for_document(&document);
    let draft_path = out_dir.join("draft.kb.json");
    let review_path = out_dir.join("review.md");
    write(
        &draft_path,
        &(serde_json::to_string_pretty(&document).expect("documents serialize") + "\n"),
    )?;
    write(&review_path, &checklist.to_markdown(&document.task_id))?;
    Ok(DraftOutcome {
        document,
        checklist,
        draft_path,
        review_path,
    })
}

#[derive(Deserialize)]
struct RulesAnswer {
    rules: IndexMap<String, Vec<String>>,
    #[serde(default)]
    terminals: Option<Vec<String>>,
}

/// Stage two: with the reviewed actions fixed, ask for rules only. Writes
/// `final.kb.json`; the result must still pass `load_kb`.
pub fn distill_stage_two(
    policy: &dyn PolicyClient,
    task_description: &str,
    refined: &KbDocument,
    out_dir: &Path,
) -> Result<(KbDocument, ReviewChecklist), DistillError> {
    if task_description.trim().is_empty() {
        return Err(DistillError::EmptyTaskDescription);
    }
    ensure_dir(out_dir)?;
    let mut listing = String::new();
    for a in &refined.actions {
        let _ = writeln!(listing, "- {}: {}", a.name, a.definition);
    }
    let prompt = format!("{STAGE_TWO}{}\n\nActions:\n{listing}", task_description.trim());
    let raw = call(policy, prompt, 1)?;
    let answer: RulesAnswer = match json_span(&raw).map(serde_json::from_str) {
        Some(Ok(a)) => a,
        Some(Err(e)) => return Err(unparsable(out_dir, &raw, e.to_string())),
        None => return Err(unparsable(out_dir, &raw, "no JSON object found".into())),
    };
    let mut doc = refined.clone();
    doc.rules = answer.rules;
    if let Some(t) = answer.terminals {
        doc.terminals = t;
    }
    let checklist = ReviewChecklist::for_document(&doc);
    write(
        &out_dir.join("final.kb.json"),
        &(serde_json::to_string_pretty(&doc).expect("documents serialize") + "\n"),
    )?;
    write(&out_dir.join("final.review.md"), &checklist.to_markdown(&doc.task_id))?;
    Ok((doc, checklist))
}
