//! Deterministic simulated worlds and their scenario files.

pub mod household;
pub mod metrics;
pub mod qa;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{ActionInvocation, Outcome};

pub use household::{HouseholdWorld, TaskGoal, TaskKind, NOTHING_HAPPENS};
pub use metrics::{exact_match, f1_score, normalize_answer};
pub use qa::{Corpus, QaWorld};

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feedback {
    pub observation: String,
    pub done: bool,
}

/// A world an episode runs in. One episode owns one world.
pub trait Environment: Send {
    fn task_id(&self) -> &str;
    fn task_text(&self) -> String;
    fn step(&mut self, action: &ActionInvocation) -> Feedback;
    fn outcome(&self) -> Outcome;
    fn default_max_steps(&self) -> usize;
}

/// One step of a gold script: what a well-behaved agent thinks and does.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldStep {
    pub thought: String,
    pub action: String,
}

fn default_qa_kb() -> String {
    "hotpotqa".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaScenario {
    pub task_id: String,
    #[serde(default = "default_qa_kb")]
    pub kb: String,
    pub question: String,
    pub gold_answer: String,
    pub corpus: Corpus,
    #[serde(default)]
    pub gold_script: Vec<GoldStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdScenario {
    pub task_id: String,
    pub kb: String,
    pub world: HouseholdWorld,
    #[serde(default)]
    pub gold_script: Vec<GoldStep>,
}

/// A task instance: initial world plus the KB it runs under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum Scenario {
    Qa(QaScenario),
    Household(HouseholdScenario),
}

impl Scenario {
    pub fn task_id(&self) -> &str {
        match self {
            Scenario::Qa(s) => &s.task_id,
            Scenario::Household(s) => &s.task_id,
        }
    }

    pub fn kb_id(&self) -> &str {
        match self {
            Scenario::Qa(s) => &s.kb,
            Scenario::Household(s) => &s.kb,
        }
    }

    pub fn gold_script(&self) -> &[GoldStep] {
        match self {
            Scenario::Qa(s) => &s.gold_script,
            Scenario::Household(s) => &s.gold_script,
        }
    }

    /// Fresh world in its initial state.
    pub fn instantiate(&self) -> Box<dyn Environment> {
        match self {
            Scenario::Qa(s) => Box::new(QaWorld::new(
                s.task_id.clone(),
                s.question.clone(),
                s.corpus.clone(),
                s.gold_answer.clone(),
            )),
            Scenario::Household(s) => {
                let mut w = s.world.clone();
                w.task_id = s.task_id.clone();
                Box::new(w)
            }
        }
    }

    /// Copy of this scenario under a different task id.
    pub fn with_task_id(&self, task_id: impl Into<String>) -> Scenario {
        let mut s = self.clone();
        let id = task_id.into();
        match &mut s {
            Scenario::Qa(q) => q.task_id = id,
            Scenario::Household(h) => h.task_id = id,
        }
        s
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario file {path}: {detail}")]
    Malformed { path: String, detail: String },
    #[error("scenario {task_id}: {detail}")]
    InvalidWorld { task_id: String, detail: String },
    #[error("duplicate task id {0}")]
    DuplicateTask(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioPack {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioPack {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let pack: ScenarioPack = serde_json::from_str(text).map_err(|e| ScenarioError::Malformed {
            path: origin.to_string(),
            detail: e.to_string(),
        })?;
        pack.check()?;
        Ok(pack)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    fn check(&self) -> Result<(), ScenarioError> {
        let mut seen = std::collections::HashSet::new();
        for s in &self.scenarios {
            if !seen.insert(s.task_id()) {
                return Err(ScenarioError::DuplicateTask(s.task_id().to_string()));
            }
            if let Scenario::Household(h) = s {
                h.world.check().map_err(|detail| ScenarioError::InvalidWorld {
                    task_id: h.task_id.clone(),
                    detail,
                })?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// Starter scenario packs bundled with the crate.
pub mod starter {
    use super::ScenarioPack;

    const QA: &str = include_str!("../../data/scenarios/qa.json");
    const HOUSEHOLD: &str = include_str!("../../data/scenarios/household.json");

    pub fn qa() -> ScenarioPack {
        ScenarioPack::from_json(QA, "qa.json").expect("bundled QA scenarios are valid")
    }

    pub fn household() -> ScenarioPack {
        ScenarioPack::from_json(HOUSEHOLD, "household.json").expect("bundled household scenarios are valid")
    }
}
