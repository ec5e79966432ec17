//! The text-generation boundary and a deterministic scripted double.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_kb::ActionKnowledge;
use crate::env::{GoldStep, Scenario};
use crate::trajectory::{parse_action, render_path, ActionInvocation, ParseFailure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 512,
            seed: None,
        }
    }
}

/// One generation call. `call_index` counts every call in the episode,
/// retries included; `attempt` counts calls for the current step.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub prompt: String,
    pub stop: Vec<String>,
    pub sampling: Sampling,
    pub task_id: String,
    pub step_index: usize,
    pub attempt: usize,
    pub call_index: usize,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            stop: Vec::new(),
            sampling: Sampling::default(),
            task_id: String::new(),
            step_index: 0,
            attempt: 0,
            call_index: 0,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PolicyError {
    /// The policy cannot be reached at all.
    #[error("policy unavailable: {0}")]
    Unavailable(String),
    /// A scripted policy ran out of outputs.
    #[error("policy has no output left for task {task_id} (call {call_index})")]
    Exhausted { task_id: String, call_index: usize },
    /// The policy answered with something unusable.
    #[error("policy protocol error: {0}")]
    Protocol(String),
}

/// A text-generation policy. Implementations must tolerate concurrent calls
/// and must not depend on framework state beyond the request.
pub trait PolicyClient: Send + Sync {
    fn identifier(&self) -> &str;
    fn generate(&self, request: &GenerationRequest) -> Result<String, PolicyError>;
}

impl<P: PolicyClient + ?Sized> PolicyClient for Box<P> {
    fn identifier(&self) -> &str {
        (**self).identifier()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, PolicyError> {
        (**self).generate(request)
    }
}

impl<P: PolicyClient + ?Sized> PolicyClient for std::sync::Arc<P> {
    fn identifier(&self) -> &str {
        (**self).identifier()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, PolicyError> {
        (**self).generate(request)
    }
}

/// On-disk form of a scripted policy.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScriptFile {
    pub policy_id: String,
    /// task id -> canned step outputs, consumed one per generation call.
    pub scripts: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed script file {path}: {detail}")]
    Malformed { path: String, detail: String },
    #[error("gold script of {task_id} step {step}: {failure}")]
    BadGoldAction {
        task_id: String,
        step: usize,
        failure: ParseFailure,
    },
}

/// Replays canned outputs by `(task_id, call_index)`. Stateless, so a single
/// instance can serve concurrent episodes and replays are exact.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScriptedPolicy {
    id: String,
    scripts: BTreeMap<String, Vec<String>>,
}

impl ScriptedPolicy {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            scripts: BTreeMap::new(),
        }
    }

    pub fn with_script(mut self, task_id: impl Into<String>, outputs: Vec<String>) -> Self {
        self.scripts.insert(task_id.into(), outputs);
        self
    }

    pub fn insert(&mut self, task_id: impl Into<String>, outputs: Vec<String>) {
        self.scripts.insert(task_id.into(), outputs);
    }

    pub fn script(&self, task_id: &str) -> Option<&[String]> {
        self.scripts.get(task_id).map(Vec::as_slice)
    }

    pub fn from_file_contents(file: ScriptFile) -> Self {
        Self {
            id: file.policy_id,
            scripts: file.scripts,
        }
    }

    pub fn to_file_contents(&self) -> ScriptFile {
        ScriptFile {
            policy_id: self.id.clone(),
            scripts: self.scripts.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: ScriptFile = serde_json::from_str(&text).map_err(|e| ScriptError::Malformed {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        Ok(Self::from_file_contents(file))
    }

    /// A policy that replays every scenario's gold script.
    pub fn from_gold<'a>(
        id: impl Into<String>,
        scenarios: impl IntoIterator<Item = (&'a Scenario, &'a ActionKnowledge)>,
    ) -> Result<Self, ScriptError> {
        let mut p = Self::new(id);
        for (s, kb) in scenarios {
            p.insert(s.task_id(), gold_outputs(s.task_id(), s.gold_script(), kb)?);
        }
        Ok(p)
    }
}

impl PolicyClient for ScriptedPolicy {
    fn identifier(&self) -> &str {
        &self.id
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, PolicyError> {
        let script = self
            .scripts
            .get(&request.task_id)
            .ok_or_else(|| PolicyError::Unavailable(format!("no script for task {}", request.task_id)))?;
        script.get(request.call_index).cloned().ok_or(PolicyError::Exhausted {
            task_id: request.task_id.clone(),
            call_index: request.call_index,
        })
    }
}

/// Full `ActionPath/Thought/Action` outputs for a gold script, each
/// declaring the path of the gold actions before it.
pub fn gold_outputs(task_id: &str, gold: &[GoldStep], kb: &ActionKnowledge) -> Result<Vec<String>, ScriptError> {
    let mut path = vec![ActionInvocation::start()];
    let mut out = Vec::with_capacity(gold.len());
    for (i, g) in gold.iter().enumerate() {
        let call = parse_action(&g.action, kb).map_err(|failure| ScriptError::BadGoldAction {
            task_id: task_id.to_string(),
            step: i,
            failure,
        })?;
        let n = i + 1;
        out.push(format!(
            "ActionPath {n}: {}\nThought {n}: {}\nAction {n}: {}",
            render_path(&path),
            g.thought,
            g.action
        ));
        path.push(call.as_path_entry());
    }
    Ok(out)
}
