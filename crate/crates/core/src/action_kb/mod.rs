//! Task-specific action knowledge: a finite automaton over action names.
//!
//! An [`ActionKnowledge`] pairs a set of [`ActionSpec`]s with transition
//! rules in adjacency form. The pseudo-action [`START`] is a graph node only:
//! it is never emitted by an agent and never counted in a path length.
//! Terminal actions are declared explicitly and must have no successors.
//!
//! Knowledge is loaded from a JSON document (see [`load_kb`]) and validated
//! on the way in; a value of this type always satisfies its invariants.

mod distill;
pub mod shipped;

pub use distill::{
    distill_stage_one, distill_stage_two, DistillError, DraftOutcome, ReviewChecklist, ReviewItem, DISTILL_TASK_ID,
};

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the pseudo-action every planning path begins with.
pub const START: &str = "Start";

/// Default node budget for [`enumerate_paths`].
pub const DEFAULT_ENUMERATION_BUDGET: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSlot {
    pub slot_name: String,
    #[serde(default)]
    pub description: String,
    /// Keyword shown before the slot in signatures, e.g. `from` in
    /// `Take(object, from: receptacle)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ArgSlot {
    pub fn new(slot_name: impl Into<String>) -> Self {
        Self {
            slot_name: slot_name.into(),
            description: String::new(),
            label: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntaxStyle {
    /// `Search[topic]`
    Bracket,
    /// `take apple 1 from fridge 1`, matched against [`ActionSpec::pattern`].
    VerbPhrase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub name: String,
    #[serde(default)]
    pub arg_slots: Vec<ArgSlot>,
    /// Human-readable definition line used in prompts.
    pub definition: String,
    pub syntax_style: SyntaxStyle,
    /// Slot-bearing template for verb-phrase actions, e.g.
    /// `take {object} from {receptacle}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
}

impl ActionSpec {
    pub fn arity(&self) -> usize {
        self.arg_slots.len()
    }

    /// Signature form used in guideline lines: `Take(object, from: receptacle)`.
    pub fn signature(&self) -> String {
        let slots: Vec<String> = self
            .arg_slots
            .iter()
            .map(|s| match &s.label {
                Some(label) => format!("{label}: {}", s.slot_name),
                None => s.slot_name.clone(),
            })
            .collect();
        format!("{}({})", self.name, slots.join(", "))
    }

    /// Slot names referenced by the verb-phrase pattern, in order.
    pub fn pattern_slots(&self) -> Vec<String> {
        let Some(pattern) = &self.pattern else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut rest = pattern.as_str();
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close) => {
                    out.push(after[..close].to_string());
                    rest = &after[close + 1..];
                }
                None => break,
            }
        }
        out
    }
}

/// A precondition implication as printed in household prompts:
/// `[Goto(receptacle), Open(receptacle)] -> Take(object, from: receptacle)`.
///
/// Every guideline must be backed by the adjacency rules: `action` is a
/// permitted successor of each entry in `after`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guideline {
    pub after: Vec<String>,
    pub action: String,
    /// Render the left-hand side in square brackets even for one entry.
    #[serde(default)]
    pub grouped: bool,
    /// Verbatim line that replaces the derived rendering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefinitionNumbering {
    /// `(1) Retrieve[entity]: ...`
    #[default]
    Parenthesized,
    /// `1) go to receptacle`
    Plain,
}

/// Prompt text that accompanies a KB. Consumed by `prompt_render`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PromptMaterial {
    #[serde(default)]
    pub overview_intro: Vec<String>,
    #[serde(default)]
    pub interpretation_heading: String,
    #[serde(default)]
    pub interpretation_lines: Vec<String>,
    #[serde(default)]
    pub definitions_heading: String,
    #[serde(default)]
    pub definition_numbering: DefinitionNumbering,
    #[serde(default)]
    pub principle: Vec<String>,
    #[serde(default)]
    pub demonstrations_heading: String,
    #[serde(default)]
    pub demonstrations: Vec<String>,
    #[serde(default)]
    pub demonstrations_footer: String,
    #[serde(default)]
    pub task_prefix: String,
}

/// Raw, unvalidated KB document as it appears on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KbDocument {
    pub task_id: String,
    pub actions: Vec<ActionSpec>,
    pub rules: IndexMap<String, Vec<String>>,
    pub terminals: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub guidelines: Vec<Guideline>,
    #[serde(default)]
    pub prompt: PromptMaterial,
}

/// A broken KB invariant. `code()` is stable and machine-readable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvariantViolation {
    EmptyTaskId,
    NoActions,
    InvalidActionName(String),
    ReservedActionName(String),
    DuplicateAction(String),
    DuplicateSlot { action: String, slot: String },
    MissingPattern(String),
    PatternSlotMismatch(String),
    UnknownRuleSource(String),
    UnknownRuleTarget { from: String, to: String },
    DuplicateSuccessor { from: String, to: String },
    NoStartRule,
    NoTerminals,
    UnknownTerminal(String),
    TerminalHasSuccessors(String),
    Unreachable(String),
    DeadEnd(String),
    GuidelineUnknownAction(String),
    GuidelineNotInRules { from: String, to: String },
}

impl InvariantViolation {
    pub fn code(&self) -> &'static str {
        use InvariantViolation::*;
        match self {
            EmptyTaskId => "empty_task_id",
            NoActions => "no_actions",
            InvalidActionName(_) => "invalid_action_name",
            ReservedActionName(_) => "reserved_action_name",
            DuplicateAction(_) => "duplicate_action",
            DuplicateSlot { .. } => "duplicate_slot",
            MissingPattern(_) => "missing_pattern",
            PatternSlotMismatch(_) => "pattern_slot_mismatch",
            UnknownRuleSource(_) => "unknown_rule_source",
            UnknownRuleTarget { .. } => "unknown_rule_target",
            DuplicateSuccessor { .. } => "duplicate_successor",
            NoStartRule => "no_start_rule",
            NoTerminals => "no_terminals",
            UnknownTerminal(_) => "unknown_terminal",
            TerminalHasSuccessors(_) => "terminal_has_successors",
            Unreachable(_) => "unreachable_action",
            DeadEnd(_) => "dead_end",
            GuidelineUnknownAction(_) => "guideline_unknown_action",
            GuidelineNotInRules { .. } => "guideline_not_in_rules",
        }
    }
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use InvariantViolation::*;
        match self {
            EmptyTaskId => write!(f, "task_id is empty"),
            NoActions => write!(f, "no actions declared"),
            InvalidActionName(n) => write!(f, "action name {n:?} is empty or contains whitespace"),
            ReservedActionName(n) => write!(f, "action name {n:?} is reserved"),
            DuplicateAction(n) => write!(f, "action {n} declared twice"),
            DuplicateSlot { action, slot } => write!(f, "action {action} repeats slot {slot}"),
            MissingPattern(n) => write!(f, "verb-phrase action {n} has no pattern"),
            PatternSlotMismatch(n) => {
                write!(f, "pattern of {n} does not reference exactly its arg slots")
            }
            UnknownRuleSource(n) => write!(f, "rule source {n} is neither Start nor a declared action"),
            UnknownRuleTarget { from, to } => write!(f, "rule {from} -> {to} targets an undeclared action"),
            DuplicateSuccessor { from, to } => write!(f, "rule {from} lists {to} twice"),
            NoStartRule => write!(f, "no rule leaves Start"),
            NoTerminals => write!(f, "no terminal actions declared"),
            UnknownTerminal(n) => write!(f, "terminal {n} is not a declared action"),
            TerminalHasSuccessors(n) => write!(f, "terminal {n} has successors"),
            Unreachable(n) => write!(f, "action {n} is not reachable from Start"),
            DeadEnd(n) => write!(f, "action {n} cannot reach any terminal"),
            GuidelineUnknownAction(n) => write!(f, "guideline references undeclared action {n}"),
            GuidelineNotInRules { from, to } => {
                write!(f, "guideline implies {from} -> {to} but the rules forbid it")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed KB document: {0}")]
    MalformedDocument(String),
    #[error("inconsistent KB: {}", join_violations(.0))]
    InconsistentKb(Vec<InvariantViolation>),
}

impl KbError {
    pub fn code(&self) -> &'static str {
        match self {
            KbError::Io { .. } => "IO_ERROR",
            KbError::MalformedDocument(_) => "MALFORMED_DOCUMENT",
            KbError::InconsistentKb(_) => "INCONSISTENT_KB",
        }
    }
}

fn join_violations(v: &[InvariantViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("path enumeration exceeded the budget of {budget} sequences")]
pub struct BudgetExceeded {
    pub budget: usize,
}

/// Validated action knowledge for one task type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "KbDocument", into = "KbDocument")]
pub struct ActionKnowledge {
    doc: KbDocument,
}

impl TryFrom<KbDocument> for ActionKnowledge {
    type Error = KbError;

    fn try_from(doc: KbDocument) -> Result<Self, KbError> {
        ActionKnowledge::from_document(doc)
    }
}

impl From<ActionKnowledge> for KbDocument {
    fn from(kb: ActionKnowledge) -> Self {
        kb.doc
    }
}

impl ActionKnowledge {
    /// Validate a document. Terminals missing from `rules` get an empty entry.
    pub fn from_document(mut doc: KbDocument) -> Result<Self, KbError> {
        for t in &doc.terminals {
            if doc.actions.iter().any(|a| &a.name == t) && !doc.rules.contains_key(t) {
                doc.rules.insert(t.clone(), Vec::new());
            }
        }
        let violations = check_document(&doc);
        if violations.is_empty() {
            Ok(Self { doc })
        } else {
            Err(KbError::InconsistentKb(violations))
        }
    }

    pub fn from_json(text: &str) -> Result<Self, KbError> {
        let doc: KbDocument = serde_json::from_str(text).map_err(|e| KbError::MalformedDocument(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("KB documents always serialize")
    }

    pub fn document(&self) -> &KbDocument {
        &self.doc
    }

    pub fn task_id(&self) -> &str {
        &self.doc.task_id
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.doc.actions
    }

    pub fn action(&self, name: &str) -> Option<&ActionSpec> {
        self.doc.actions.iter().find(|a| a.name == name)
    }

    pub fn rules(&self) -> &IndexMap<String, Vec<String>> {
        &self.doc.rules
    }

    pub fn terminals(&self) -> &[String] {
        &self.doc.terminals
    }

    pub fn guidelines(&self) -> &[Guideline] {
        &self.doc.guidelines
    }

    pub fn prompt(&self) -> &PromptMaterial {
        &self.doc.prompt
    }

    pub fn is_terminal(&self, name: &str) -> bool {
        self.doc.terminals.iter().any(|t| t == name)
    }

    /// Permitted successors of `from`, in declaration order.
    pub fn successors(&self, from: &str) -> &[String] {
        self.doc.rules.get(from).map(Vec::as_slice).unwrap_or(&[])
    }

    /// True iff `to` is a permitted successor of `from`. Unknown names are
    /// never valid.
    pub fn is_valid_transition(&self, from: &str, to: &str) -> bool {
        self.successors(from).iter().any(|s| s == to)
    }
}

/// Load and validate a KB document from disk.
pub fn load_kb(path: impl AsRef<Path>) -> Result<ActionKnowledge, KbError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ActionKnowledge::from_json(&text)
}

/// Every invariant violation in `doc`, in a stable order. Empty means valid.
pub fn check_document(doc: &KbDocument) -> Vec<InvariantViolation> {
    use InvariantViolation as V;
    let mut out = Vec::new();

    if doc.task_id.trim().is_empty() {
        out.push(V::EmptyTaskId);
    }
    if doc.actions.is_empty() {
        out.push(V::NoActions);
    }

    let mut names: HashSet<&str> = HashSet::new();
    for a in &doc.actions {
        if a.name.is_empty() || a.name.chars().any(char::is_whitespace) {
            out.push(V::InvalidActionName(a.name.clone()));
        }
        if a.name == START {
            out.push(V::ReservedActionName(a.name.clone()));
        }
        if !names.insert(a.name.as_str()) {
            out.push(V::DuplicateAction(a.name.clone()));
        }
        let mut slots = HashSet::new();
        for s in &a.arg_slots {
            if !slots.insert(s.slot_name.as_str()) {
                out.push(V::DuplicateSlot {
                    action: a.name.clone(),
                    slot: s.slot_name.clone(),
                });
            }
        }
        if a.syntax_style == SyntaxStyle::VerbPhrase {
            if a.pattern.is_none() {
                out.push(V::MissingPattern(a.name.clone()));
            } else {
                let declared: Vec<&str> = a.arg_slots.iter().map(|s| s.slot_name.as_str()).collect();
                let used = a.pattern_slots();
                let used: Vec<&str> = used.iter().map(String::as_str).collect();
                if declared != used {
                    out.push(V::PatternSlotMismatch(a.name.clone()));
                }
            }
        }
    }

    for (from, tos) in &doc.rules {
        if from != START && !names.contains(from.as_str()) {
            out.push(V::UnknownRuleSource(from.clone()));
        }
        let mut seen = HashSet::new();
        for to in tos {
            if !names.contains(to.as_str()) {
                out.push(V::UnknownRuleTarget {
                    from: from.clone(),
                    to: to.clone(),
                });
            }
            if !seen.insert(to.as_str()) {
                out.push(V::DuplicateSuccessor {
                    from: from.clone(),
                    to: to.clone(),
                });
            }
        }
    }
    if doc.rules.get(START).is_none_or(Vec::is_empty) {
        out.push(V::NoStartRule);
    }

    if doc.terminals.is_empty() {
        out.push(V::NoTerminals);
    }
    for t in &doc.terminals {
        if !names.contains(t.as_str()) {
            out.push(V::UnknownTerminal(t.clone()));
        } else if doc.rules.get(t).is_some_and(|s| !s.is_empty()) {
            out.push(V::TerminalHasSuccessors(t.clone()));
        }
    }

    // Forward reachability from Start.
    let reachable = bfs(START, |n| doc.rules.get(n).cloned().unwrap_or_default());
    for a in &doc.actions {
        if !reachable.contains(&a.name) {
            out.push(V::Unreachable(a.name.clone()));
        }
    }

    // Backward reachability from the terminals.
    let mut reverse: IndexMap<&str, Vec<String>> = IndexMap::new();
    for (from, tos) in &doc.rules {
        for to in tos {
            reverse.entry(to.as_str()).or_default().push(from.clone());
        }
    }
    let mut finishing: HashSet<String> = HashSet::new();
    for t in doc.terminals.iter().filter(|t| names.contains(t.as_str())) {
        finishing.extend(bfs(t, |n| reverse.get(n).cloned().unwrap_or_default()));
    }
    for a in &doc.actions {
        if !finishing.contains(&a.name) {
            out.push(V::DeadEnd(a.name.clone()));
        }
    }

    for g in &doc.guidelines {
        for n in g.after.iter().chain(std::iter::once(&g.action)) {
            if !names.contains(n.as_str()) {
                out.push(V::GuidelineUnknownAction(n.clone()));
            }
        }
        for from in &g.after {
            let allowed = doc.rules.get(from).is_some_and(|s| s.contains(&g.action));
            if names.contains(from.as_str()) && names.contains(g.action.as_str()) && !allowed {
                out.push(V::GuidelineNotInRules {
                    from: from.clone(),
                    to: g.action.clone(),
                });
            }
        }
    }

    out
}

fn bfs(root: &str, next: impl Fn(&str) -> Vec<String>) -> HashSet<String> {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(root.to_string());
    queue.push_back(root.to_string());
    while let Some(n) = queue.pop_front() {
        for m in next(&n) {
            if seen.insert(m.clone()) {
                queue.push_back(m);
            }
        }
    }
    seen
}

/// All action-name sequences of length `1..=max_len` that start from
/// [`START`] and follow permitted transitions. Sequences stop extending at
/// terminals. Uses [`DEFAULT_ENUMERATION_BUDGET`].
pub fn enumerate_paths(kb: &ActionKnowledge, max_len: usize) -> Result<BTreeSet<Vec<String>>, BudgetExceeded> {
    enumerate_paths_with_budget(kb, max_len, DEFAULT_ENUMERATION_BUDGET)
}

pub fn enumerate_paths_with_budget(
    kb: &ActionKnowledge,
    max_len: usize,
    budget: usize,
) -> Result<BTreeSet<Vec<String>>, BudgetExceeded> {
    let mut out = BTreeSet::new();
    let mut frontier: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            let last = seq.last().map(String::as_str).unwrap_or(START);
            for succ in kb.successors(last) {
                let mut ext = seq.clone();
                ext.push(succ.clone());
                if out.len() >= budget {
                    return Err(BudgetExceeded { budget });
                }
                out.insert(ext.clone());
                if !kb.is_terminal(succ) {
                    next.push(ext);
                }
            }
        }
        frontier = next;
    }
    Ok(out)
}
