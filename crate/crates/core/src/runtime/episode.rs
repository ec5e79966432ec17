//! Single-episode driver.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use super::policy::{GenerationRequest, PolicyClient, PolicyError, Sampling};
use crate::action_kb::ActionKnowledge;
use crate::env::Environment;
use crate::prompt::{render_episode_prompt, PromptError, PromptTemplate};
use crate::trajectory::{parse_step_output, serialize_steps, Rejection, Step, Termination, Trajectory};
use crate::validator::{judge_step, previous_action, Flag, PathComparison};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Enforcement {
    /// Steps are taken as generated.
    #[default]
    Off,
    /// Violations are logged and recorded, but the step is kept.
    Warn,
    /// Violating steps are rejected and regenerated with a corrective line.
    RejectRetry,
}

impl std::str::FromStr for Enforcement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "off" => Ok(Enforcement::Off),
            "warn" => Ok(Enforcement::Warn),
            "reject-retry" | "reject_retry" => Ok(Enforcement::RejectRetry),
            other => Err(format!("unknown enforcement mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    /// `None` uses the environment's default.
    pub max_steps: Option<usize>,
    pub enforcement: Enforcement,
    pub max_retries: usize,
    pub sampling: Sampling,
    pub path_comparison: PathComparison,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_steps: None,
            enforcement: Enforcement::Off,
            max_retries: 3,
            sampling: Sampling::default(),
            path_comparison: PathComparison::Strict,
        }
    }
}

impl EpisodeConfig {
    pub fn with_enforcement(mut self, enforcement: Enforcement) -> Self {
        self.enforcement = enforcement;
        self
    }

    pub fn check(&self) -> Result<(), EpisodeError> {
        if self.enforcement == Enforcement::RejectRetry && self.max_retries == 0 {
            return Err(EpisodeError::InvalidConfig(
                "max_retries must be at least 1 under reject_retry".into(),
            ));
        }
        if self.max_steps == Some(0) {
            return Err(EpisodeError::InvalidConfig("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error("policy unavailable: {0}")]
    PolicyUnavailable(String),
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Observation recorded for a step whose output could not be parsed.
pub fn parse_error_observation(failure: &crate::trajectory::ParseFailure) -> String {
    format!("Invalid step format: {failure}.")
}

/// `Invalid step: <flags>. Allowed next actions: <successors>.`
pub fn corrective_line(flags: &[Flag], allowed: &[String]) -> String {
    let flags: Vec<&str> = flags.iter().map(|f| f.as_str()).collect();
    format!(
        "Invalid step: {}. Allowed next actions: {}.",
        flags.join(", "),
        allowed.join(", ")
    )
}

/// Cut a generation at the first stop marker.
fn truncate_at_stop(text: &str, stop: &[String]) -> String {
    let cut = stop
        .iter()
        .filter_map(|m| text.find(m.as_str()))
        .min()
        .unwrap_or(text.len());
    text[..cut].trim_end().to_string()
}

/// Run one episode to a terminal action, the step limit or a policy failure.
///
/// Only an unreachable policy is an error; every other anomaly is recorded
/// in the returned trajectory.
pub fn run_episode(
    kb: &ActionKnowledge,
    env: &mut dyn Environment,
    policy: &dyn PolicyClient,
    config: &EpisodeConfig,
) -> Result<Trajectory, EpisodeError> {
    config.check()?;
    let template = PromptTemplate::from_kb(kb);
    template.check()?;
    let task_text = env.task_text();
    let mut traj = Trajectory::new(env.task_id(), kb.task_id(), task_text.clone());
    let max_steps = config.max_steps.unwrap_or_else(|| env.default_max_steps());
    let mut call_index = 0usize;

    'steps: while traj.steps.len() < max_steps {
        let index = traj.steps.len();
        let scratchpad = serialize_steps(&traj.steps);
        let stop = vec![format!("Observation {}:", index + 1), "\nObservation".to_string()];
        let mut corrections: Vec<String> = Vec::new();
        let mut attempt = 0usize;

        let step = loop {
            let mut pad = scratchpad.clone();
            for c in &corrections {
                if !pad.is_empty() {
                    pad.push('\n');
                }
                pad.push_str(c);
            }
            let request = GenerationRequest {
                prompt: render_episode_prompt(&template, &task_text, &pad)?,
                stop: stop.clone(),
                sampling: config.sampling,
                task_id: traj.task_id.clone(),
                step_index: index,
                attempt,
                call_index,
            };
            call_index += 1;
            let output = match policy.generate(&request) {
                Ok(text) => truncate_at_stop(&text, &stop),
                Err(PolicyError::Unavailable(msg)) => return Err(EpisodeError::PolicyUnavailable(msg)),
                Err(e) => {
                    warn!(task = %traj.task_id, step = index, error = %e, "policy failed");
                    traj.terminated_by = Termination::PolicyError;
                    break 'steps;
                }
            };

            let candidate = match parse_step_output(&output, kb, index) {
                Ok(parsed) => {
                    let mut s = Step::from_parsed(index, parsed);
                    s.raw_output = None;
                    s
                }
                Err(failure) => Step::unparsed(index, &output, failure),
            };
            let mut probe = traj.steps.clone();
            probe.push(candidate.clone());
            let verdict = judge_step(kb, &probe, index, config.path_comparison);
            if verdict.is_clean() || config.enforcement == Enforcement::Off {
                break candidate;
            }

            let flag_names: Vec<String> = verdict.flags.iter().map(|f| f.as_str().to_string()).collect();
            if config.enforcement == Enforcement::Warn {
                warn!(task = %traj.task_id, step = index, flags = ?flag_names, "step violates action knowledge");
                traj.rejections.push(Rejection {
                    step_index: index,
                    attempt,
                    flags: flag_names,
                    output,
                    accepted: true,
                });
                break candidate;
            }

            debug!(task = %traj.task_id, step = index, attempt, flags = ?flag_names, "rejecting step");
            traj.rejections.push(Rejection {
                step_index: index,
                attempt,
                flags: flag_names,
                output,
                accepted: false,
            });
            attempt += 1;
            if attempt > config.max_retries {
                traj.terminated_by = Termination::PolicyError;
                break 'steps;
            }
            let prev = previous_action(kb, &traj.steps);
            corrections.push(corrective_line(&verdict.flags, kb.successors(prev)));
        };

        let mut step = step;
        if let Some(failure) = &step.parse_error {
            step.observation = parse_error_observation(failure);
            traj.steps.push(step);
            continue;
        }
        let feedback = env.step(&step.action);
        step.observation = feedback.observation;
        let terminal = kb.is_terminal(&step.action.name) || feedback.done;
        traj.steps.push(step);
        if terminal {
            traj.terminated_by = Termination::TerminalAction;
            break;
        }
    }

    if traj.terminated_by != Termination::TerminalAction && traj.terminated_by != Termination::PolicyError {
        traj.terminated_by = Termination::StepLimit;
    }
    traj.outcome = env.outcome();
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action_kb::shipped;
    use crate::env::{qa::QaWorld, starter, Corpus};
    use crate::runtime::policy::ScriptedPolicy;
    use crate::validator::validate_trajectory;

    fn table6_world() -> QaWorld {
        let mut corpus = Corpus::new();
        corpus.insert(
            "Gary Harrison".into(),
            vec![vec![
                "Gary Steven Harrison is an American songwriter.".into(),
                "Harrison began his career in the 1970s, and has written over 300 major-label recorded songs, including several number one hits.".into(),
            ]],
        );
        corpus.insert(
            "Bryan White".into(),
            vec![vec![
                "Bryan Shelton White (born February 17, 1974) is an American country music singer and songwriter."
                    .into(),
                "Signed to Asylum Records in 1994 at age 20, White released his self-titled debut album that year."
                    .into(),
            ]],
        );
        QaWorld::new(
            "gh",
            "Gary Harrison ... Bryan White, an American country music artist?",
            corpus,
            "300",
        )
    }

    fn table6_script() -> Vec<String> {
        vec![
            "ActionPath 1: Start\nThought 1: ... I need to search for information about his career and achievements.\nAction 1: Search[Gary Harrison]".into(),
            "ActionPath 2: Start->Search[Gary Harrison]\nThought 2: ... I need to find out who has recorded Gary Harrison's work.\nAction 2: Search[Bryan White]".into(),
            "ActionPath 3: Start->Search[Gary Harrison]->Search[Bryan White]\nThought 3: ... No further actions are needed as the necessary information has been obtained.\nAction 3: Finish[Bryan White]\nObservation 3: made up".into(),
        ]
    }

    #[test]
    fn table6_replay() {
        let kb = shipped::hotpotqa();
        let policy = ScriptedPolicy::new("s").with_script("gh", table6_script());
        let mut env = table6_world();
        let t = run_episode(&kb, &mut env, &policy, &EpisodeConfig::default()).unwrap();
        assert_eq!(t.terminated_by, Termination::TerminalAction);
        assert_eq!(t.outcome.answer.as_deref(), Some("Bryan White"));
        assert_eq!(t.outcome.reward, 0.0);
        assert!(t.steps[0]
            .observation
            .starts_with("Gary Steven Harrison is an American songwriter."));
        assert!(validate_trajectory(&kb, &t).clean);
    }

    #[test]
    fn reject_retry_recovers_from_lookup_first() {
        let kb = shipped::hotpotqa();
        let mut script = vec!["ActionPath 1: Start\nThought 1: look it up\nAction 1: Lookup[songs]".to_string()];
        script.extend(table6_script());
        let policy = ScriptedPolicy::new("s").with_script("gh", script);
        let cfg = EpisodeConfig::default().with_enforcement(Enforcement::RejectRetry);
        let t = run_episode(&kb, &mut table6_world(), &policy, &cfg).unwrap();
        assert_eq!(t.rejections.len(), 1);
        assert_eq!(t.rejections[0].flags, vec!["misordered_action"]);
        assert!(validate_trajectory(&kb, &t).clean);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn retry_prompt_carries_corrective_line() {
        struct Spy(std::sync::Mutex<Vec<String>>);
        impl PolicyClient for Spy {
            fn identifier(&self) -> &str {
                "spy"
            }
            fn generate(&self, r: &GenerationRequest) -> Result<String, PolicyError> {
                self.0.lock().unwrap().push(r.prompt.clone());
                Ok(if r.call_index == 0 {
                    "ActionPath 1: Start\nThought 1: t\nAction 1: Lookup[x]".into()
                } else {
                    "ActionPath 1: Start\nThought 1: t\nAction 1: Finish[300]".into()
                })
            }
        }
        let kb = shipped::hotpotqa();
        let spy = Spy(Default::default());
        let cfg = EpisodeConfig::default().with_enforcement(Enforcement::RejectRetry);
        let t = run_episode(&kb, &mut table6_world(), &spy, &cfg);
        // Finish is not a successor of Start either, so both attempts fail.
        let t = t.unwrap();
        let prompts = spy.0.lock().unwrap();
        assert!(prompts[1].ends_with("\nInvalid step: misordered_action. Allowed next actions: Search, Retrieve."));
        assert_eq!(t.terminated_by, Termination::PolicyError);
        assert!(t.steps.is_empty());
        assert_eq!(t.rejections.len(), 4);
    }

    #[test]
    fn step_limit_without_terminal() {
        let kb = shipped::hotpotqa();
        let outputs: Vec<String> = (0..5)
            .map(|i| {
                let mut path = String::from("Start");
                for _ in 0..i {
                    path.push_str("->Search[x]");
                }
                format!("ActionPath {}: {path}\nThought: again\nAction: Search[x]", i + 1)
            })
            .collect();
        let policy = ScriptedPolicy::new("s").with_script("gh", outputs);
        let cfg = EpisodeConfig {
            max_steps: Some(3),
            ..Default::default()
        };
        let t = run_episode(&kb, &mut table6_world(), &policy, &cfg).unwrap();
        assert_eq!(t.terminated_by, Termination::StepLimit);
        assert_eq!(t.len(), 3);
        assert!(!t.outcome.success);
    }

    #[test]
    fn exhausted_script_is_policy_error() {
        let kb = shipped::hotpotqa();
        let policy = ScriptedPolicy::new("s").with_script("gh", table6_script()[..1].to_vec());
        let t = run_episode(&kb, &mut table6_world(), &policy, &EpisodeConfig::default()).unwrap();
        assert_eq!(t.terminated_by, Termination::PolicyError);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn unreachable_policy_is_an_error() {
        let kb = shipped::hotpotqa();
        let policy = ScriptedPolicy::new("s");
        let r = run_episode(&kb, &mut table6_world(), &policy, &EpisodeConfig::default());
        assert!(matches!(r, Err(EpisodeError::PolicyUnavailable(_))));
    }

    #[test]
    fn parse_errors_are_recorded_and_observed() {
        let kb = shipped::hotpotqa();
        let mut script = vec!["I think I should search.".to_string()];
        script.extend(table6_script());
        let policy = ScriptedPolicy::new("s").with_script("gh", script);
        let t = run_episode(&kb, &mut table6_world(), &policy, &EpisodeConfig::default()).unwrap();
        assert!(!t.steps[0].is_parsed());
        assert!(t.steps[0]
            .observation
            .starts_with("Invalid step format: missing field ActionPath"));
        assert_eq!(t.terminated_by, Termination::TerminalAction);
    }

    #[test]
    fn prompt_holds_exactly_previous_steps() {
        struct Spy(std::sync::Mutex<Vec<String>>, Vec<String>);
        impl PolicyClient for Spy {
            fn identifier(&self) -> &str {
                "spy"
            }
            fn generate(&self, r: &GenerationRequest) -> Result<String, PolicyError> {
                self.0.lock().unwrap().push(r.prompt.clone());
                Ok(self.1[r.call_index].clone())
            }
        }
        let kb = shipped::hotpotqa();
        let spy = Spy(Default::default(), table6_script());
        let t = run_episode(&kb, &mut table6_world(), &spy, &EpisodeConfig::default()).unwrap();
        let prompts = spy.0.lock().unwrap();
        let template = PromptTemplate::from_kb(&kb);
        for (i, p) in prompts.iter().enumerate() {
            let expected = render_episode_prompt(&template, &t.task_text, &serialize_steps(&t.steps[..i])).unwrap();
            assert_eq!(p, &expected);
        }
        assert!(prompts[1].contains("ActionPath 1: Start\nThought 1:"));
        assert!(prompts[1].contains("\nObservation 1: Gary Steven Harrison"));
    }

    #[test]
    fn household_gold_scripts_succeed() {
        let pack = starter::household();
        for s in &pack.scenarios {
            let kb = shipped::by_id(s.kb_id()).unwrap();
            let policy = ScriptedPolicy::from_gold("gold", [(s, &kb)]).unwrap();
            let mut env = s.instantiate();
            let t = run_episode(&kb, env.as_mut(), &policy, &EpisodeConfig::default()).unwrap();
            assert!(t.outcome.success, "{}", s.task_id());
            assert!(validate_trajectory(&kb, &t).clean, "{}", s.task_id());
        }
    }
}
