//! Render the planning prompt of a bundled KB and print one step prompt.
//!
//! cargo run --example render_prompt -- alfworld_heat

use actionkb::action_kb::shipped;
use actionkb::prompt::{render_episode_prompt, rule_lines, PromptTemplate};

fn main() {
    let id = std::env::args().nth(1).unwrap_or_else(|| "hotpotqa".to_string());
    let Some(kb) = shipped::by_id(&id) else {
        eprintln!("unknown KB {id}; try one of: hotpotqa, alfworld_pick, alfworld_light, alfworld_clean, alfworld_heat, alfworld_cool, alfworld_pick_two");
        std::process::exit(2);
    };

    println!("rule lines for {id}:");
    for line in rule_lines(&kb) {
        println!("  {line}");
    }

    let template = PromptTemplate::from_kb(&kb);
    let skeleton = template.render_skeleton().expect("bundled KBs render");
    println!(
        "\nskeleton: {} lines, {} bytes",
        skeleton.lines().count(),
        skeleton.len()
    );

    let prompt = render_episode_prompt(
        &template,
        "What is the capital of the country that hosted Expo 2010?",
        "",
    )
    .expect("bundled KBs render");
    let tail: Vec<&str> = prompt.lines().rev().take(3).collect();
    println!("prompt tail:");
    for line in tail.into_iter().rev() {
        println!("  {line}");
    }
}
