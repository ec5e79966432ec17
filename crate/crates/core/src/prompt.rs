//! Rendering action knowledge into planning prompts.
//!
//! A prompt has four knowledge segments (overview, action definitions,
//! planning principle, demonstrations) followed by the task and the
//! scratchpad. Segments are separated by exactly one blank line so golden
//! files can be compared byte for byte.

use thiserror::Error;

use crate::action_kb::{ActionKnowledge, DefinitionNumbering, Guideline, START};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("prompt segment `{0}` is empty")]
    MissingSegment(&'static str),
}

/// Placeholder written where the task text goes in skeleton renders.
pub const TASK_SLOT: &str = "{task}";
/// Placeholder written where the scratchpad goes in skeleton renders.
pub const SCRATCHPAD_SLOT: &str = "{scratchpad}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub overview: String,
    pub definitions_heading: String,
    pub action_definitions: Vec<String>,
    pub principle: String,
    pub demonstrations_heading: String,
    pub demonstrations: Vec<String>,
    pub demonstrations_footer: String,
    pub task_prefix: String,
}

impl PromptTemplate {
    pub fn from_kb(kb: &ActionKnowledge) -> Self {
        let p = kb.prompt();
        let action_definitions = kb
            .actions()
            .iter()
            .enumerate()
            .map(|(i, a)| match p.definition_numbering {
                DefinitionNumbering::Parenthesized => format!("({}) {}", i + 1, a.definition),
                DefinitionNumbering::Plain => format!("{}) {}", i + 1, a.definition),
            })
            .collect();
        Self {
            overview: render_knowledge_text(kb),
            definitions_heading: p.definitions_heading.clone(),
            action_definitions,
            principle: p.principle.join("\n"),
            demonstrations_heading: p.demonstrations_heading.clone(),
            demonstrations: p.demonstrations.clone(),
            demonstrations_footer: p.demonstrations_footer.clone(),
            task_prefix: p.task_prefix.clone(),
        }
    }

    pub fn check(&self) -> Result<(), PromptError> {
        if self.overview.trim().is_empty() {
            return Err(PromptError::MissingSegment("overview"));
        }
        if self.action_definitions.is_empty() {
            return Err(PromptError::MissingSegment("action_definitions"));
        }
        if self.principle.trim().is_empty() {
            return Err(PromptError::MissingSegment("principle"));
        }
        if self.demonstrations.is_empty() {
            return Err(PromptError::MissingSegment("demonstrations"));
        }
        Ok(())
    }

    /// The four knowledge segments, without the task. This is the
    /// instruction text of emitted tuning records.
    pub fn render_instruction(&self) -> Result<String, PromptError> {
        self.check()?;
        let mut segments = vec![self.overview.clone()];
        segments.push(with_heading(
            &self.definitions_heading,
            &self.action_definitions.join("\n"),
        ));
        segments.push(self.principle.clone());
        let mut demos = with_heading(&self.demonstrations_heading, &self.demonstrations.join("\n\n"));
        if !self.demonstrations_footer.is_empty() {
            demos.push('\n');
            demos.push_str(&self.demonstrations_footer);
        }
        segments.push(demos);
        Ok(segments.join("\n\n"))
    }

    /// Task line plus scratchpad, as it follows the instruction.
    pub fn render_task(&self, task: &str, scratchpad: &str) -> String {
        let mut out = format!("{}{}", self.task_prefix, task);
        if !scratchpad.is_empty() {
            out.push('\n');
            out.push_str(scratchpad);
        }
        out
    }

    /// The template with literal `{task}{scratchpad}` slots, as stored in
    /// golden files.
    pub fn render_skeleton(&self) -> Result<String, PromptError> {
        Ok(format!(
            "{}\n\n{}{}{}\n",
            self.render_instruction()?,
            self.task_prefix,
            TASK_SLOT,
            SCRATCHPAD_SLOT
        ))
    }
}

fn with_heading(heading: &str, body: &str) -> String {
    if heading.is_empty() {
        body.to_string()
    } else {
        format!("{heading}\n{body}")
    }
}

/// Overview segment: intro lines, one rule line per rule (or the guideline
/// lines when the KB carries them), then the interpretation block.
pub fn render_knowledge_text(kb: &ActionKnowledge) -> String {
    let p = kb.prompt();
    let mut lines: Vec<String> = p.overview_intro.clone();
    lines.extend(rule_lines(kb));
    let mut out = lines.join("\n");
    if !p.interpretation_heading.is_empty() || !p.interpretation_lines.is_empty() {
        out.push_str("\n\n");
        let mut block = Vec::new();
        if !p.interpretation_heading.is_empty() {
            block.push(p.interpretation_heading.clone());
        }
        block.extend(p.interpretation_lines.iter().cloned());
        out.push_str(&block.join("\n"));
    }
    out
}

/// Rule lines exactly as they appear in the overview.
pub fn rule_lines(kb: &ActionKnowledge) -> Vec<String> {
    if kb.guidelines().is_empty() {
        adjacency_lines(kb)
    } else {
        kb.guidelines().iter().map(|g| guideline_line(kb, g)).collect()
    }
}

/// `From:(To1, To2)` lines in rule declaration order.
pub fn adjacency_lines(kb: &ActionKnowledge) -> Vec<String> {
    kb.rules()
        .iter()
        .map(|(from, tos)| format!("{from}:({})", tos.join(", ")))
        .collect()
}

fn guideline_line(kb: &ActionKnowledge, g: &Guideline) -> String {
    if let Some(display) = &g.display {
        return display.clone();
    }
    let sig = |name: &str| {
        if name == START {
            START.to_string()
        } else {
            kb.action(name)
                .map(|a| a.signature())
                .unwrap_or_else(|| name.to_string())
        }
    };
    let lhs: Vec<String> = g.after.iter().map(|n| sig(n)).collect();
    let lhs = if g.grouped || lhs.len() > 1 {
        format!("[{}]", lhs.join(", "))
    } else {
        lhs.join(", ")
    };
    format!("{lhs} -> {}", sig(&g.action))
}

/// Full per-step prompt: knowledge segments, task and scratchpad, in that
/// order.
pub fn render_episode_prompt(template: &PromptTemplate, task: &str, scratchpad: &str) -> Result<String, PromptError> {
    Ok(format!(
        "{}\n\n{}",
        template.render_instruction()?,
        template.render_task(task, scratchpad)
    ))
}
