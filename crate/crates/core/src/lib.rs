//! Action knowledge for language agents: typed action automata, prompt
//! rendering, trajectory parsing, path validation, episode execution and a
//! self-learning loop.

pub mod action_kb;
pub mod cli;
pub mod env;
pub mod jsonl;
pub mod manifest;
pub mod prompt;
pub mod report;
pub mod runtime;
pub mod self_learning;
pub mod trajectory;
pub mod validator;
