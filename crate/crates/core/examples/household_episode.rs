//! Replay the gold script of every bundled household scenario through the
//! episode runtime and print the final trajectory of one of them.

use actionkb::env::starter;
use actionkb::runtime::{run_episode, EpisodeConfig, KbSet, ScriptedPolicy};
use actionkb::trajectory::serialize_scratchpad;

fn main() {
    let kbs = KbSet::shipped();
    let scenarios = starter::household().scenarios;
    let policy = ScriptedPolicy::from_gold("gold", scenarios.iter().map(|s| (s, kbs.get(s.kb_id()).unwrap())))
        .expect("gold scripts parse");

    let mut shown = false;
    for s in &scenarios {
        let kb = kbs.get(s.kb_id()).unwrap();
        let mut env = s.instantiate();
        let t = run_episode(kb, env.as_mut(), &policy, &EpisodeConfig::default()).expect("scripted policy");
        println!(
            "{:<28} {:>2} steps  success={}",
            s.task_id(),
            t.steps.len(),
            t.outcome.success
        );
        if !shown && s.kb_id() == "alfworld_heat" {
            println!("\n{}\n{}\n", t.task_text, serialize_scratchpad(&t));
            shown = true;
        }
    }
}
