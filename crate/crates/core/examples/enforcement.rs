//! Run a rule-breaking scripted policy over the bundled QA scenarios with
//! each enforcement mode and compare violation rates.

use actionkb::action_kb::shipped;
use actionkb::env::starter;
use actionkb::runtime::{gold_outputs, run_batch, Enforcement, EpisodeConfig, KbSet, ScriptedPolicy};
use actionkb::trajectory::{compose_step_output, parse_action};
use actionkb::validator::steps_for_actions;

fn main() {
    let kbs = KbSet::shipped();
    let kb = shipped::hotpotqa();
    let scenarios = starter::qa().scenarios;

    // Every other task opens with a Lookup before anything was searched.
    let mut policy = ScriptedPolicy::new("eager-lookup");
    for (k, s) in scenarios.iter().enumerate() {
        let mut outs = gold_outputs(s.task_id(), s.gold_script(), &kb).expect("gold scripts parse");
        if k % 2 == 0 {
            outs.insert(
                0,
                compose_step_output(&[], 0, "I will look it up directly.", "Lookup[answer]"),
            );
        }
        if k % 3 == 0 {
            let first = parse_action(&s.gold_script()[0].action, &kb).unwrap();
            let previous = steps_for_actions(&[first]);
            outs.insert(
                1,
                compose_step_output(&previous, 1, "Maybe a browser helps.", "Browse[wikipedia.org]"),
            );
        }
        policy.insert(s.task_id(), outs);
    }

    println!(
        "{:<14} {:>9} {:>11} {:>11} {:>8}",
        "mode", "actions", "invalid", "misordered", "mean F1"
    );
    for mode in [Enforcement::Off, Enforcement::Warn, Enforcement::RejectRetry] {
        let config = EpisodeConfig::default().with_enforcement(mode);
        let result = run_batch(&scenarios, &kbs, &policy, &config, 4).expect("batch runs");
        let rates = result.metrics.rates.expect("completed episodes");
        println!(
            "{:<14} {:>9} {:>10.2}% {:>10.2}% {:>8.3}",
            format!("{mode:?}"),
            rates.actions,
            rates.invalid_rate * 100.0,
            rates.misordered_rate * 100.0,
            result.metrics.mean_f1.unwrap_or(0.0)
        );
    }
}
