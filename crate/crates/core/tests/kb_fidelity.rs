mod common;

use std::fs;

use actionkb::action_kb::{check_document, load_kb, shipped, START};
use actionkb::prompt::{render_knowledge_text, rule_lines, PromptTemplate};
use common::*;

#[test]
fn rule_lines_match_reference_blocks() {
    for (id, expected) in reference_rule_lines() {
        let kb = shipped::by_id(id).unwrap();
        assert_eq!(rule_lines(&kb), expected, "{id}");
    }
}

#[test]
fn reference_blocks_appear_contiguously_in_the_overview() {
    for (id, expected) in reference_rule_lines() {
        let kb = shipped::by_id(id).unwrap();
        let text = render_knowledge_text(&kb);
        assert!(text.contains(&expected.join("\n")), "{id}");
    }
}

#[test]
fn adjacency_kb_has_one_line_per_rule() {
    let kb = shipped::hotpotqa();
    let text = render_knowledge_text(&kb);
    for (from, tos) in kb.rules() {
        let line = format!("{from}:({})", tos.join(", "));
        assert_eq!(text.lines().filter(|l| *l == line).count(), 1, "{line}");
    }
    assert!(kb.rules().contains_key(START));
}

#[test]
fn shipped_documents_match_data_files() {
    for kb in shipped::all() {
        let path = data_dir().join(format!("kb/{}.kb.json", kb.task_id()));
        let from_disk = load_kb(&path).unwrap();
        assert_eq!(from_disk.document(), kb.document());
        assert!(check_document(kb.document()).is_empty());
    }
}

#[test]
fn skeletons_match_golden_files() {
    for kb in shipped::all() {
        let golden = fs::read_to_string(data_dir().join(format!("golden/{}.prompt.txt", kb.task_id()))).unwrap();
        let rendered = PromptTemplate::from_kb(&kb).render_skeleton().unwrap();
        assert_eq!(rendered, golden, "{}", kb.task_id());
    }
}

#[test]
fn kb_documents_round_trip_through_json() {
    for kb in shipped::all() {
        let again = actionkb::action_kb::ActionKnowledge::from_json(&kb.to_json()).unwrap();
        assert_eq!(again.document(), kb.document());
        assert_eq!(rule_lines(&again), rule_lines(&kb));
    }
}
