//! Canonical KBs bundled with the crate.

use super::ActionKnowledge;
use crate::env::TaskKind;

const HOTPOTQA: &str = include_str!("../../data/kb/hotpotqa.kb.json");
const PICK: &str = include_str!("../../data/kb/alfworld_pick.kb.json");
const LIGHT: &str = include_str!("../../data/kb/alfworld_light.kb.json");
const CLEAN: &str = include_str!("../../data/kb/alfworld_clean.kb.json");
const HEAT: &str = include_str!("../../data/kb/alfworld_heat.kb.json");
const COOL: &str = include_str!("../../data/kb/alfworld_cool.kb.json");
const PICK_TWO: &str = include_str!("../../data/kb/alfworld_pick_two.kb.json");

fn parse(text: &str) -> ActionKnowledge {
    ActionKnowledge::from_json(text).expect("bundled KB documents are valid")
}

pub fn hotpotqa() -> ActionKnowledge {
    parse(HOTPOTQA)
}

pub fn household(kind: TaskKind) -> ActionKnowledge {
    parse(match kind {
        TaskKind::Pick => PICK,
        TaskKind::Light => LIGHT,
        TaskKind::Clean => CLEAN,
        TaskKind::Heat => HEAT,
        TaskKind::Cool => COOL,
        TaskKind::PickTwo => PICK_TWO,
    })
}

/// All seven bundled KBs, HotpotQA first.
pub fn all() -> Vec<ActionKnowledge> {
    std::iter::once(hotpotqa())
        .chain(TaskKind::ALL.iter().map(|k| household(*k)))
        .collect()
}

/// Bundled KB by task id.
pub fn by_id(task_id: &str) -> Option<ActionKnowledge> {
    all().into_iter().find(|kb| kb.task_id() == task_id)
}

/// Raw document text of a bundled KB, by task id.
pub fn source(task_id: &str) -> Option<&'static str> {
    Some(match task_id {
        "hotpotqa" => HOTPOTQA,
        "alfworld_pick" => PICK,
        "alfworld_light" => LIGHT,
        "alfworld_clean" => CLEAN,
        "alfworld_heat" => HEAT,
        "alfworld_cool" => COOL,
        "alfworld_pick_two" => PICK_TWO,
        _ => return None,
    })
}
