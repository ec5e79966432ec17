//! Trajectory data model: (ActionPath, Thought, Action, Observation)
//! quadruples plus the episode outcome.
//!
//! Internal step indices are 0-based; the scratchpad uses 1-based display
//! indices (`ActionPath 1:`). The serializer is the only place that converts.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::action_kb::{ActionKnowledge, SyntaxStyle, START};

/// Separator between planning path elements.
pub const PATH_SEPARATOR: &str = "->";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionInvocation {
    pub name: String,
    #[serde(default)]
    pub args: Vec<String>,
    /// Surface form as emitted.
    #[serde(default)]
    pub raw: String,
}

impl ActionInvocation {
    pub fn new(name: impl Into<String>, args: Vec<String>, raw: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            args,
            raw: raw.into(),
        }
    }

    pub fn start() -> Self {
        Self::new(START, Vec::new(), START)
    }

    pub fn bracket(name: &str, arg: &str) -> Self {
        Self::new(name, vec![arg.to_string()], format!("{name}[{arg}]"))
    }

    pub fn is_start(&self) -> bool {
        self.name == START
    }

    /// Path-element form: `Search[topic]` for bracket-style calls,
    /// `Take(apple 1, countertop 1)` otherwise, bare name without args.
    pub fn path_label(&self) -> String {
        let raw = self.raw.trim();
        if self.is_start() {
            START.to_string()
        } else if raw.ends_with(']') && self.args.len() == 1 {
            format!("{}[{}]", self.name, self.args[0])
        } else if self.args.is_empty() {
            self.name.clone()
        } else {
            format!("{}({})", self.name, self.args.join(", "))
        }
    }

    /// Copy of this call whose `raw` is its path label.
    pub fn as_path_entry(&self) -> ActionInvocation {
        ActionInvocation::new(self.name.clone(), self.args.clone(), self.path_label())
    }

    pub fn same_call(&self, other: &ActionInvocation) -> bool {
        self.name == other.name
            && self.args.len() == other.args.len()
            && self.args.iter().zip(&other.args).all(|(a, b)| a.trim() == b.trim())
    }
}

impl fmt::Display for ActionInvocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// Render a planning path as `Start->A[x]->B(y)`.
pub fn render_path(path: &[ActionInvocation]) -> String {
    path.iter()
        .map(|p| {
            if p.raw.is_empty() {
                p.path_label()
            } else {
                p.raw.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(PATH_SEPARATOR)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub action_path: Vec<ActionInvocation>,
    pub thought: String,
    pub action: ActionInvocation,
    #[serde(default)]
    pub observation: String,
    /// Set when the model output could not be parsed; the other fields
    /// then hold whatever was recoverable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<ParseFailure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_output: Option<String>,
}

impl Step {
    pub fn from_parsed(index: usize, parsed: ParsedStep) -> Self {
        Self {
            index,
            action_path: parsed.action_path,
            thought: parsed.thought,
            action: parsed.action,
            observation: String::new(),
            parse_error: None,
            raw_output: None,
        }
    }

    pub fn unparsed(index: usize, raw: &str, failure: ParseFailure) -> Self {
        Self {
            index,
            action_path: Vec::new(),
            thought: String::new(),
            action: ActionInvocation::new("", Vec::new(), ""),
            observation: String::new(),
            parse_error: Some(failure),
            raw_output: Some(raw.trim().to_string()),
        }
    }

    pub fn is_parsed(&self) -> bool {
        self.parse_error.is_none()
    }

    /// `ActionPath/Thought/Action` block with 1-based labels, no observation.
    pub fn block(&self) -> String {
        let n = self.index + 1;
        if let Some(raw) = &self.raw_output {
            if !self.is_parsed() {
                return raw.clone();
            }
        }
        format!(
            "ActionPath {n}: {}\nThought {n}: {}\nAction {n}: {}",
            render_path(&self.action_path),
            self.thought,
            self.action.raw
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeMetric {
    /// Token F1 against a gold answer.
    #[default]
    F1,
    /// Goal-conditioned success.
    GoalSuccess,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Outcome {
    pub reward: f64,
    pub success: bool,
    #[serde(default)]
    pub answer: Option<String>,
    #[serde(default)]
    pub metric: OutcomeMetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TerminalAction,
    StepLimit,
    PolicyError,
}

/// A step output that was rejected or warned about by rule enforcement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub step_index: usize,
    pub attempt: usize,
    pub flags: Vec<String>,
    pub output: String,
    /// True when the step was kept anyway (warn mode).
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    /// Task type of the action knowledge the episode ran under.
    #[serde(default)]
    pub kb_id: String,
    pub task_text: String,
    pub steps: Vec<Step>,
    pub outcome: Outcome,
    pub terminated_by: Termination,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejections: Vec<Rejection>,
}

impl Trajectory {
    pub fn new(task_id: impl Into<String>, kb_id: impl Into<String>, task_text: impl Into<String>) -> Self {
        Self {
            task_id: task_id.into(),
            kb_id: kb_id.into(),
            task_text: task_text.into(),
            steps: Vec::new(),
            outcome: Outcome::default(),
            terminated_by: Termination::StepLimit,
            rejections: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Structural invariants: consecutive indices, paths begin at Start,
    /// and at most one terminal action which must be last.
    pub fn check_invariants(&self, kb: &ActionKnowledge) -> Result<(), String> {
        for (i, s) in self.steps.iter().enumerate() {
            if s.index != i {
                return Err(format!("step {i} carries index {}", s.index));
            }
            if s.is_parsed() && !s.action_path.first().is_some_and(ActionInvocation::is_start) {
                return Err(format!("step {i} path does not begin with Start"));
            }
            if s.is_parsed() && kb.is_terminal(&s.action.name) && i + 1 != self.steps.len() {
                return Err(format!("terminal action at step {i} is not last"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum ParseFailure {
    MissingField(String),
    MalformedActionPath(String),
    UnknownActionSyntax(String),
}

impl ParseFailure {
    pub fn code(&self) -> &'static str {
        match self {
            ParseFailure::MissingField(_) => "missing_field",
            ParseFailure::MalformedActionPath(_) => "malformed_action_path",
            ParseFailure::UnknownActionSyntax(_) => "unknown_action_syntax",
        }
    }
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseFailure::MissingField(x) => write!(f, "missing field {x}"),
            ParseFailure::MalformedActionPath(x) => write!(f, "malformed action path: {x}"),
            ParseFailure::UnknownActionSyntax(x) => write!(f, "unknown action syntax: {x}"),
        }
    }
}

impl std::error::Error for ParseFailure {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedStep {
    pub action_path: Vec<ActionInvocation>,
    pub thought: String,
    pub action: ActionInvocation,
}

fn label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(ActionPath|Thought|Action|Observation)\s*(\d*)\s*:\s?(.*)$").unwrap())
}

fn bracket_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)^([A-Za-z_][A-Za-z0-9_]*)\s*\[(.*)\]$").unwrap())
}

fn paren_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)^([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)$").unwrap())
}

fn bare_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Za-z_][A-Za-z0-9_]*$").unwrap())
}

/// Parse one model step output into its planning path, thought and action.
///
/// Labels may carry any display number. Text after an `Observation` label
/// is ignored. The parser never panics; anything it cannot read becomes a
/// [`ParseFailure`] naming the first unreadable field.
pub fn parse_step_output(text: &str, kb: &ActionKnowledge, _index: usize) -> Result<ParsedStep, ParseFailure> {
    let mut path_line: Option<String> = None;
    let mut thought: Option<Vec<String>> = None;
    let mut action_line: Option<String> = None;
    let mut in_thought = false;

    for line in text.lines() {
        if let Some(caps) = label_re().captures(line) {
            in_thought = false;
            let rest = caps[3].trim_end().to_string();
            match &caps[1] {
                "ActionPath" if path_line.is_none() => path_line = Some(rest),
                "Thought" if thought.is_none() => {
                    thought = Some(vec![rest]);
                    in_thought = true;
                }
                "Action" if action_line.is_none() => action_line = Some(rest),
                "Observation" => break,
                _ => {}
            }
        } else if in_thought {
            if let Some(t) = thought.as_mut() {
                t.push(line.trim_end().to_string());
            }
        }
    }

    let path_line = path_line.ok_or_else(|| ParseFailure::MissingField("ActionPath".into()))?;
    let thought = thought.ok_or_else(|| ParseFailure::MissingField("Thought".into()))?;
    let action_line = action_line.ok_or_else(|| ParseFailure::MissingField("Action".into()))?;

    let action_path = parse_action_path(&path_line)?;
    let action = parse_action(&action_line, kb)?;
    Ok(ParsedStep {
        action_path,
        thought: thought.join("\n").trim().to_string(),
        action,
    })
}

/// Parse `Start->Search[x]->Take(a, b)`. Whitespace around `->` is
/// tolerated.
pub fn parse_action_path(text: &str) -> Result<Vec<ActionInvocation>, ParseFailure> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ParseFailure::MalformedActionPath("empty path".into()));
    }
    let mut out = Vec::new();
    for (i, element) in text.split(PATH_SEPARATOR).enumerate() {
        let element = element.trim();
        if element.is_empty() {
            return Err(ParseFailure::MalformedActionPath(format!(
                "empty element at position {i}"
            )));
        }
        let call = parse_generic(element)
            .ok_or_else(|| ParseFailure::MalformedActionPath(format!("cannot read `{element}`")))?;
        if i == 0 && !call.is_start() {
            return Err(ParseFailure::MalformedActionPath(format!(
                "path begins with `{element}` instead of {START}"
            )));
        }
        out.push(call);
    }
    Ok(out)
}

fn parse_generic(text: &str) -> Option<ActionInvocation> {
    if let Some(c) = bracket_re().captures(text) {
        return Some(ActionInvocation::new(&c[1], vec![c[2].trim().to_string()], text));
    }
    if let Some(c) = paren_re().captures(text) {
        let inner = c[2].trim();
        let args = if inner.is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(|a| a.trim().to_string()).collect()
        };
        return Some(ActionInvocation::new(&c[1], args, text));
    }
    if bare_re().is_match(text) {
        return Some(ActionInvocation::new(text, Vec::new(), text));
    }
    None
}

/// Compile a verb-phrase pattern such as `take {object} from {receptacle}`
/// into an anchored, case-insensitive regex with one group per slot.
pub fn pattern_regex(pattern: &str) -> Regex {
    let mut re = String::from("(?is)^");
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        re.push_str(&literal_re(&rest[..open]));
        match rest[open..].find('}') {
            Some(close) => {
                re.push_str("(.+?)");
                rest = &rest[open + close + 1..];
            }
            None => {
                rest = &rest[open..];
                break;
            }
        }
    }
    re.push_str(&literal_re(rest));
    re.push('$');
    Regex::new(&re).expect("escaped pattern is a valid regex")
}

fn cached_pattern_regex(pattern: &str) -> Regex {
    static CACHE: OnceLock<Mutex<HashMap<String, Regex>>> = OnceLock::new();
    let mut cache = CACHE
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    cache
        .entry(pattern.to_string())
        .or_insert_with(|| pattern_regex(pattern))
        .clone()
}

fn literal_re(lit: &str) -> String {
    let mut out = String::new();
    let mut in_space = false;
    for ch in lit.chars() {
        if ch.is_whitespace() {
            if !in_space {
                out.push_str(r"\s+");
                in_space = true;
            }
        } else {
            in_space = false;
            out.push_str(&regex::escape(ch.encode_utf8(&mut [0; 4])));
        }
    }
    out
}

/// Parse an action line under `kb`: verb-phrase patterns first, then the
/// generic `Name[arg]`, `Name(a, b)` and bare `Name` forms.
pub fn parse_action(text: &str, kb: &ActionKnowledge) -> Result<ActionInvocation, ParseFailure> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ParseFailure::UnknownActionSyntax(String::new()));
    }
    for spec in kb
        .actions()
        .iter()
        .filter(|a| a.syntax_style == SyntaxStyle::VerbPhrase)
    {
        let Some(pattern) = &spec.pattern else { continue };
        if let Some(c) = cached_pattern_regex(pattern).captures(text) {
            let args = c
                .iter()
                .skip(1)
                .flatten()
                .map(|m| m.as_str().trim().to_string())
                .collect();
            return Ok(ActionInvocation::new(spec.name.clone(), args, text));
        }
    }
    parse_generic(text).ok_or_else(|| ParseFailure::UnknownActionSyntax(text.to_string()))
}

/// Scratchpad text for the whole trajectory: one
/// `ActionPath/Thought/Action/Observation` block per step, 1-based.
pub fn serialize_scratchpad(traj: &Trajectory) -> String {
    serialize_steps(&traj.steps)
}

pub fn serialize_steps(steps: &[Step]) -> String {
    steps
        .iter()
        .map(|s| format!("{}\nObservation {}: {}", s.block(), s.index + 1, s.observation))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The path the model should declare at step `upto`: Start followed by the
/// actions of steps `0..upto`. Unparsed steps contribute nothing.
pub fn canonical_path(traj: &Trajectory, upto: usize) -> Vec<ActionInvocation> {
    canonical_path_of(&traj.steps, upto)
}

pub fn canonical_path_of(steps: &[Step], upto: usize) -> Vec<ActionInvocation> {
    std::iter::once(ActionInvocation::start())
        .chain(
            steps[..upto.min(steps.len())]
                .iter()
                .filter(|s| s.is_parsed())
                .map(|s| s.action.as_path_entry()),
        )
        .collect()
}

/// Build a well-formed step output for `action`, declaring the canonical
/// path of `previous`.
pub fn compose_step_output(previous: &[Step], index: usize, thought: &str, action: &str) -> String {
    let path = canonical_path_of(previous, previous.len());
    let n = index + 1;
    format!(
        "ActionPath {n}: {}\nThought {n}: {thought}\nAction {n}: {action}",
        render_path(&path)
    )
}
