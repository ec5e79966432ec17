//! Trajectory classification against an action automaton.
//!
//! Each parsed step is checked for an invalid action (unknown name or wrong
//! arity), a misordered action (transition not permitted from the previous
//! parsed action) and a path mismatch (declared planning path differs from
//! the actions actually taken). Rates are per parsed action.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_kb::{
    enumerate_paths_with_budget, ActionKnowledge, BudgetExceeded, DEFAULT_ENUMERATION_BUDGET, START,
};
use crate::trajectory::{canonical_path_of, ActionInvocation, Step, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    ParseError,
    InvalidAction,
    MisorderedAction,
    PathMismatch,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::ParseError => "parse_error",
            Flag::InvalidAction => "invalid_action",
            Flag::MisorderedAction => "misordered_action",
            Flag::PathMismatch => "path_mismatch",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How declared planning paths are compared with the actions taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathComparison {
    /// Names and arguments must match.
    #[default]
    Strict,
    /// Only action names must match.
    NamesOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepVerdict {
    pub index: usize,
    pub flags: Vec<Flag>,
}

impl StepVerdict {
    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn has(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub verdicts: Vec<StepVerdict>,
    /// Parsed actions, the rate denominator.
    pub actions: usize,
    pub invalid_count: usize,
    pub misordered_count: usize,
    pub path_mismatch_count: usize,
    pub parse_error_count: usize,
    pub invalid_rate: f64,
    pub misordered_rate: f64,
    pub clean: bool,
}

impl ValidationReport {
    fn from_verdicts(verdicts: Vec<StepVerdict>) -> Self {
        let count = |f: Flag| verdicts.iter().filter(|v| v.has(f)).count();
        let parse_error_count = count(Flag::ParseError);
        let actions = verdicts.len() - parse_error_count;
        let invalid_count = count(Flag::InvalidAction);
        let misordered_count = count(Flag::MisorderedAction);
        let path_mismatch_count = count(Flag::PathMismatch);
        Self {
            clean: verdicts.iter().all(StepVerdict::is_clean),
            invalid_rate: ratio(invalid_count, actions),
            misordered_rate: ratio(misordered_count, actions),
            verdicts,
            actions,
            invalid_count,
            misordered_count,
            path_mismatch_count,
            parse_error_count,
        }
    }

    /// First flagged step, if any.
    pub fn first_violation(&self) -> Option<&StepVerdict> {
        self.verdicts.iter().find(|v| !v.is_clean())
    }

    /// Distinct flags across all steps, in flag order.
    pub fn flags(&self) -> Vec<Flag> {
        let mut out: Vec<Flag> = self.verdicts.iter().flat_map(|v| v.flags.iter().copied()).collect();
        out.sort();
        out.dedup();
        out
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn paths_equal(a: &[ActionInvocation], b: &[ActionInvocation], mode: PathComparison) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match mode {
            PathComparison::Strict => x.same_call(y),
            PathComparison::NamesOnly => x.name == y.name,
        })
}

/// Verdict for the step at `index` given everything before it.
pub fn judge_step(kb: &ActionKnowledge, steps: &[Step], index: usize, mode: PathComparison) -> StepVerdict {
    let step = &steps[index];
    if !step.is_parsed() {
        return StepVerdict {
            index,
            flags: vec![Flag::ParseError],
        };
    }
    let prev = previous_action(kb, &steps[..index]);
    let mut flags = Vec::new();
    match kb.action(&step.action.name) {
        None => flags.push(Flag::InvalidAction),
        Some(spec) => {
            if spec.arity() != step.action.args.len() {
                flags.push(Flag::InvalidAction);
            }
            if !kb.is_valid_transition(prev, &step.action.name) {
                flags.push(Flag::MisorderedAction);
            }
        }
    }
    if !paths_equal(&step.action_path, &canonical_path_of(steps, index), mode) {
        flags.push(Flag::PathMismatch);
    }
    StepVerdict { index, flags }
}

/// Last parsed step whose action the KB declares, or Start.
pub fn previous_action<'a>(kb: &ActionKnowledge, steps: &'a [Step]) -> &'a str {
    steps
        .iter()
        .rev()
        .find(|s| s.is_parsed() && kb.action(&s.action.name).is_some())
        .map(|s| s.action.name.as_str())
        .unwrap_or(START)
}

pub fn validate_steps(kb: &ActionKnowledge, steps: &[Step], mode: PathComparison) -> ValidationReport {
    let verdicts = (0..steps.len()).map(|i| judge_step(kb, steps, i, mode)).collect();
    ValidationReport::from_verdicts(verdicts)
}

pub fn validate_with(kb: &ActionKnowledge, traj: &Trajectory, mode: PathComparison) -> ValidationReport {
    validate_steps(kb, &traj.steps, mode)
}

/// Validate with strict path comparison.
pub fn validate_trajectory(kb: &ActionKnowledge, traj: &Trajectory) -> ValidationReport {
    validate_with(kb, traj, PathComparison::Strict)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidatorError {
    #[error("no reports to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub trajectories: usize,
    pub actions: usize,
    pub invalid_rate: f64,
    pub misordered_rate: f64,
    pub path_mismatch_rate: f64,
    pub parse_errors: usize,
    /// Fraction of trajectories with at least one flag.
    pub unclean_trajectory_rate: f64,
}

/// Micro-averaged rates over every action of every report.
pub fn compute_rates(reports: &[ValidationReport]) -> Result<RateSummary, ValidatorError> {
    if reports.is_empty() {
        return Err(ValidatorError::EmptyInput);
    }
    let actions: usize = reports.iter().map(|r| r.actions).sum();
    let sum = |f: fn(&ValidationReport) -> usize| reports.iter().map(f).sum::<usize>();
    Ok(RateSummary {
        trajectories: reports.len(),
        actions,
        invalid_rate: ratio(sum(|r| r.invalid_count), actions),
        misordered_rate: ratio(sum(|r| r.misordered_count), actions),
        path_mismatch_rate: ratio(sum(|r| r.path_mismatch_count), actions),
        parse_errors: sum(|r| r.parse_error_count),
        unclean_trajectory_rate: ratio(reports.iter().filter(|r| !r.clean).count(), reports.len()),
    })
}

/// Steps that take `actions` in order, each declaring the correct path.
pub fn steps_for_actions(actions: &[ActionInvocation]) -> Vec<Step> {
    let mut steps: Vec<Step> = Vec::with_capacity(actions.len());
    for (i, a) in actions.iter().enumerate() {
        let path = canonical_path_of(&steps, i);
        steps.push(Step {
            index: i,
            action_path: path,
            thought: String::new(),
            action: a.clone(),
            observation: String::new(),
            parse_error: None,
            raw_output: None,
        });
    }
    steps
}

/// A well-formed call of `name` with placeholder arguments.
fn placeholder_call(kb: &ActionKnowledge, name: &str) -> ActionInvocation {
    let arity = kb.action(name).map_or(0, |a| a.arity());
    let args: Vec<String> = (0..arity).map(|i| format!("x{i}")).collect();
    let raw = format!("{name}({})", args.join(", "));
    ActionInvocation::new(name, args, raw)
}

/// Validator cleanliness of a bare name sequence, ignoring args and paths.
pub fn names_clean(kb: &ActionKnowledge, names: &[String]) -> bool {
    let calls: Vec<ActionInvocation> = names.iter().map(|n| placeholder_call(kb, n)).collect();
    validate_steps(kb, &steps_for_actions(&calls), PathComparison::NamesOnly).clean
}

/// Every name sequence of length `1..=max_len` over the KB's actions.
pub fn all_sequences(kb: &ActionKnowledge, max_len: usize, budget: usize) -> Result<Vec<Vec<String>>, BudgetExceeded> {
    let names: Vec<String> = kb.actions().iter().map(|a| a.name.clone()).collect();
    let mut out = Vec::new();
    let mut layer: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * names.len());
        for seq in &layer {
            for n in &names {
                if out.len() + next.len() >= budget {
                    return Err(BudgetExceeded { budget });
                }
                let mut s = seq.clone();
                s.push(n.clone());
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    Ok(out)
}

/// Sequences on which `judge` and the enumeration oracle disagree.
pub fn oracle_disagreements_with(
    kb: &ActionKnowledge,
    max_len: usize,
    judge: impl Fn(&ActionKnowledge, &[String]) -> bool,
) -> Result<Vec<Vec<String>>, BudgetExceeded> {
    let valid = enumerate_paths_with_budget(kb, max_len, DEFAULT_ENUMERATION_BUDGET)?;
    let all = all_sequences(kb, max_len, DEFAULT_ENUMERATION_BUDGET)?;
    Ok(all
        .into_iter()
        .filter(|seq| judge(kb, seq) != valid.contains(seq))
        .collect())
}

pub fn oracle_equivalence_with(
    kb: &ActionKnowledge,
    max_len: usize,
    judge: impl Fn(&ActionKnowledge, &[String]) -> bool,
) -> Result<bool, BudgetExceeded> {
    Ok(oracle_disagreements_with(kb, max_len, judge)?.is_empty())
}

/// True iff validator cleanliness agrees with `enumerate_paths` on every
/// name sequence of length `1..=max_len`.
pub fn oracle_equivalence(kb: &ActionKnowledge, max_len: usize) -> Result<bool, BudgetExceeded> {
    oracle_equivalence_with(kb, max_len, names_clean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action_kb::shipped;
    use crate::trajectory::parse_step_output;
    use proptest::prelude::*;

    fn qa_calls(spec: &[(&str, &str)]) -> Vec<ActionInvocation> {
        spec.iter().map(|(n, a)| ActionInvocation::bracket(n, a)).collect()
    }

    #[test]
    fn lookup_first_is_misordered() {
        let kb = shipped::hotpotqa();
        let steps = steps_for_actions(&qa_calls(&[("Lookup", "x"), ("Search", "y")]));
        let r = validate_steps(&kb, &steps, PathComparison::Strict);
        assert_eq!(r.verdicts[0].flags, vec![Flag::MisorderedAction]);
        assert!(r.verdicts[1].is_clean());
    }

    #[test]
    fn search_search_finish_is_clean() {
        let kb = shipped::hotpotqa();
        let steps = steps_for_actions(&qa_calls(&[
            ("Search", "Gary Harrison"),
            ("Search", "Bryan White"),
            ("Finish", "Bryan White"),
        ]));
        assert!(validate_steps(&kb, &steps, PathComparison::Strict).clean);
    }

    #[test]
    fn step_after_terminal_is_misordered() {
        let kb = shipped::hotpotqa();
        let steps = steps_for_actions(&qa_calls(&[("Finish", "a"), ("Search", "b")]));
        let r = validate_steps(&kb, &steps, PathComparison::Strict);
        assert!(r.verdicts[1].has(Flag::MisorderedAction));
    }

    #[test]
    fn rates_are_per_action() {
        let kb = shipped::hotpotqa();
        let steps = steps_for_actions(&qa_calls(&[
            ("Search", "a"),
            ("Search", "b"),
            ("Lookup", "c"),
            ("Finish", "d"),
        ]));
        let mut bad = steps.clone();
        bad[2].action = ActionInvocation::bracket("Finish", "c");
        bad[3].action_path = canonical_path_of(&bad, 3);
        let r = validate_steps(&kb, &bad, PathComparison::Strict);
        let s = compute_rates(&[r]).unwrap();
        assert_eq!(s.invalid_rate, 0.0);
        assert_eq!(s.misordered_rate, 0.25);
        assert_eq!(compute_rates(&[]), Err(ValidatorError::EmptyInput));
    }

    #[test]
    fn unknown_action_is_invalid_only() {
        let kb = shipped::hotpotqa();
        let steps = steps_for_actions(&qa_calls(&[("Browse", "a"), ("Search", "b")]));
        let r = validate_steps(&kb, &steps, PathComparison::Strict);
        assert_eq!(r.verdicts[0].flags, vec![Flag::InvalidAction]);
        assert!(r.verdicts[1].is_clean());
    }

    #[test]
    fn parse_error_excludes_other_flags_and_later_steps_are_checked() {
        let kb = shipped::hotpotqa();
        let mut steps = steps_for_actions(&qa_calls(&[("Search", "a"), ("Search", "b"), ("Finish", "c")]));
        steps[1] = Step::unparsed(
            1,
            "gibberish",
            crate::trajectory::ParseFailure::MissingField("Action".into()),
        );
        let r = validate_steps(&kb, &steps, PathComparison::Strict);
        assert_eq!(r.verdicts[1].flags, vec![Flag::ParseError]);
        assert_eq!(r.actions, 2);
        // Search -> Finish is still judged; the declared path now lists the
        // unparsed step's slot, which canonical paths skip.
        assert!(r.verdicts[2].has(Flag::PathMismatch));
        assert!(!r.verdicts[2].has(Flag::MisorderedAction));
    }

    #[test]
    fn names_only_ignores_arguments() {
        let kb = shipped::hotpotqa();
        let out = "ActionPath 2: Start->Search[Gary]\nThought 2: t\nAction 2: Finish[300]";
        let mut steps = steps_for_actions(&qa_calls(&[("Search", "Gary Harrison")]));
        let p = parse_step_output(out, &kb, 1).unwrap();
        steps.push(Step::from_parsed(1, p));
        assert!(validate_steps(&kb, &steps, PathComparison::Strict).verdicts[1].has(Flag::PathMismatch));
        assert!(validate_steps(&kb, &steps, PathComparison::NamesOnly).clean);
    }

    #[test]
    fn hotpotqa_oracle_counts() {
        let kb = shipped::hotpotqa();
        let paths = crate::action_kb::enumerate_paths(&kb, 3).unwrap();
        let by_len = |n: usize| paths.iter().filter(|p| p.len() == n).count();
        assert_eq!((by_len(1), by_len(2), by_len(3)), (2, 8, 24));
        assert!(oracle_equivalence(&kb, 4).unwrap());
    }

    #[test]
    fn corrupted_judge_is_caught() {
        let kb = shipped::hotpotqa();
        // Forgets that Start constrains the first action.
        let sloppy =
            |kb: &ActionKnowledge, names: &[String]| names.windows(2).all(|w| kb.is_valid_transition(&w[0], &w[1]));
        assert!(!oracle_equivalence_with(&kb, 3, sloppy).unwrap());
    }

    proptest! {
        #[test]
        fn clean_prefixes_stay_clean(idx in prop::collection::vec(0usize..4, 1..7)) {
            let kb = shipped::hotpotqa();
            let names: Vec<String> = idx.iter().map(|&i| kb.actions()[i].name.clone()).collect();
            if names_clean(&kb, &names) {
                for k in 1..names.len() {
                    prop_assert!(names_clean(&kb, &names[..k]));
                }
            }
        }
    }
}
