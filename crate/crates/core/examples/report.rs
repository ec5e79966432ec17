//! Run the bundled QA scenarios with and without enforcement, then build the
//! comparative violation report from the two trajectory files.

use actionkb::action_kb::shipped;
use actionkb::env::starter;
use actionkb::jsonl::write_jsonl;
use actionkb::report::{build_report, load_corpus};
use actionkb::runtime::{gold_outputs, run_batch, Enforcement, EpisodeConfig, KbSet, ScriptedPolicy};
use actionkb::trajectory::compose_step_output;

fn main() {
    let kbs = KbSet::shipped();
    let kb = shipped::hotpotqa();
    let scenarios = starter::qa().scenarios;
    let mut policy = ScriptedPolicy::new("hasty");
    for (k, s) in scenarios.iter().enumerate() {
        let mut outs = gold_outputs(s.task_id(), s.gold_script(), &kb).unwrap();
        if k % 3 != 2 {
            outs.insert(
                0,
                compose_step_output(&[], 0, "The answer is probably in the text.", "Lookup[answer]"),
            );
        }
        policy.insert(s.task_id(), outs);
    }

    let dir = tempfile::tempdir().expect("temp dir");
    let mut corpora = Vec::new();
    for (name, mode) in [("enforced", Enforcement::RejectRetry), ("raw", Enforcement::Off)] {
        let config = EpisodeConfig::default().with_enforcement(mode);
        let result = run_batch(&scenarios, &kbs, &policy, &config, 4).expect("batch runs");
        let path = dir.path().join(name).join("trajectories.jsonl");
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        write_jsonl(&path, &result.entries).expect("write trajectories");
        corpora.push(load_corpus(&path).expect("read back"));
    }

    let report = build_report(&corpora, &kbs, 3).expect("non-empty corpora");
    print!("{}", report.to_text());
}
