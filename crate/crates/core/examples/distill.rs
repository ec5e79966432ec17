//! Two-stage knowledge distillation with a scripted drafter: a first draft
//! that fails review, then a rules pass over the human-refined action set.

use actionkb::action_kb::{distill_stage_one, distill_stage_two, ActionKnowledge, DISTILL_TASK_ID};
use actionkb::runtime::ScriptedPolicy;
use serde_json::json;

fn main() {
    let draft = json!({
        "task_id": "recipe_qa",
        "actions": [
            {"name": "Search", "arg_slots": [{"slot_name": "dish"}], "definition": "Search[dish]: find a recipe page.", "syntax_style": "bracket"},
            {"name": "Lookup", "arg_slots": [{"slot_name": "keyword"}], "definition": "Lookup[keyword]: next sentence with the keyword.", "syntax_style": "bracket"},
            {"name": "Finish", "arg_slots": [{"slot_name": "answer"}], "definition": "Finish[answer]: answer and stop.", "syntax_style": "bracket"}
        ],
        "rules": {"Start": ["Search"], "Search": ["Lookup"], "Lookup": ["Lookup"], "Finish": []},
        "terminals": ["Finish"]
    });
    let rules = json!({"rules": {
        "Start": ["Search"],
        "Search": ["Search", "Lookup", "Finish"],
        "Lookup": ["Lookup", "Search", "Finish"],
        "Finish": []
    }});
    let drafter =
        ScriptedPolicy::new("drafter").with_script(DISTILL_TASK_ID, vec![draft.to_string(), rules.to_string()]);
    let task = "Answer cooking questions by searching recipe pages.";
    let out = tempfile::tempdir().expect("temp dir");

    let first = distill_stage_one(&drafter, task, out.path()).expect("draft parses");
    println!(
        "stage one: {} review items, {} blocking",
        first.checklist.items.len(),
        first.checklist.blocking().count()
    );
    for item in first.checklist.blocking() {
        println!("  must fix [{}] {}", item.code, item.message);
    }

    let (doc, checklist) = distill_stage_two(&drafter, task, &first.document, out.path()).expect("rules parse");
    println!("stage two: {} blocking items", checklist.blocking().count());
    let kb = ActionKnowledge::from_document(doc).expect("final KB is consistent");
    for (from, tos) in kb.rules() {
        println!("  {from}:({})", tos.join(", "));
    }
}
