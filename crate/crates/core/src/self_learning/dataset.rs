//! Instruction-tuning records, one per stored step.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::store::TrajectoryStore;
use crate::action_kb::ActionKnowledge;
use crate::jsonl::{sha256_hex, to_jsonl_string, JsonlError};
use crate::prompt::{PromptError, PromptTemplate};
use crate::runtime::KbSet;
use crate::trajectory::{serialize_steps, Trajectory};

/// Alpaca-style triple. `instruction` followed by a blank line and `input`
/// is exactly the prompt the policy sees at that step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("trajectory store is empty")]
    EmptyStore,
    #[error("no KB loaded for task type {0}")]
    MissingKb(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Io(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: usize,
    pub trajectories: usize,
    pub steps: usize,
    /// Stored trajectories by the iteration that synthesized them.
    pub by_source_iteration: BTreeMap<usize, usize>,
    pub by_kb: BTreeMap<String, usize>,
    pub dataset_path: PathBuf,
    pub sha256: String,
}

pub fn records_for(traj: &Trajectory, kb: &ActionKnowledge) -> Result<Vec<TuningRecord>, PromptError> {
    let template = PromptTemplate::from_kb(kb);
    let instruction = template.render_instruction()?;
    Ok(traj
        .steps
        .iter()
        .enumerate()
        .map(|(k, step)| TuningRecord {
            instruction: instruction.clone(),
            input: template.render_task(&traj.task_text, &serialize_steps(&traj.steps[..k])),
            output: step.block(),
        })
        .collect())
}

/// Records for every stored trajectory, in task-id order.
pub fn build_dataset(store: &TrajectoryStore, kbs: &KbSet) -> Result<Vec<TuningRecord>, DatasetError> {
    if store.is_empty() {
        return Err(DatasetError::EmptyStore);
    }
    let mut out = Vec::with_capacity(store.total_steps());
    for s in store.iter() {
        let kb = kbs
            .get(&s.trajectory.kb_id)
            .ok_or_else(|| DatasetError::MissingKb(s.trajectory.kb_id.clone()))?;
        out.extend(records_for(&s.trajectory, kb)?);
    }
    Ok(out)
}

/// Write `path` as JSON Lines and `<path>.manifest.json` beside it.
pub fn emit_tuning_dataset(store: &TrajectoryStore, kbs: &KbSet, path: &Path) -> Result<DatasetManifest, DatasetError> {
    let records = build_dataset(store, kbs)?;
    let text = to_jsonl_string(&records);
    let io = |source| {
        DatasetError::Io(JsonlError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    fs::write(path, &text).map_err(io)?;
    let mut by_source_iteration = BTreeMap::new();
    let mut by_kb = BTreeMap::new();
    for s in store.iter() {
        *by_source_iteration.entry(s.iteration).or_insert(0) += 1;
        *by_kb.entry(s.trajectory.kb_id.clone()).or_insert(0) += 1;
    }
    let manifest = DatasetManifest {
        records: records.len(),
        trajectories: store.len(),
        steps: store.total_steps(),
        by_source_iteration,
        by_kb,
        dataset_path: path.to_path_buf(),
        sha256: sha256_hex(text.as_bytes()),
    };
    let manifest_path = path.with_extension("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )
    .map_err(|source| {
        DatasetError::Io(JsonlError::Io {
            path: manifest_path.display().to_string(),
            source,
        })
    })?;
    Ok(manifest)
}
