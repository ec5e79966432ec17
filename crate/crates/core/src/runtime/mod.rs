//! Episode execution: policies, the step loop and parallel batches.

pub mod batch;
pub mod episode;
pub mod http;
pub mod policy;

pub use batch::{batch_metrics, run_batch, BatchEntry, BatchError, BatchMetrics, BatchResult, KbSet};
pub use episode::{corrective_line, run_episode, Enforcement, EpisodeConfig, EpisodeError};
pub use http::{HttpPolicy, HttpPolicyConfig};
pub use policy::{
    gold_outputs, GenerationRequest, PolicyClient, PolicyError, Sampling, ScriptError, ScriptFile, ScriptedPolicy,
};
