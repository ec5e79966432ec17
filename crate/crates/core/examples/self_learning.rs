//! Drive the self-learning loop with in-process policies and a tune hook
//! that simply advances to the next policy in a fixed family.

use std::collections::HashMap;
use std::path::Path;

use actionkb::action_kb::shipped;
use actionkb::env::{starter, GoldStep, Scenario};
use actionkb::runtime::{gold_outputs, KbSet, PolicyClient, PolicyError, ScriptedPolicy};
use actionkb::self_learning::{self_learning_loop, summary_table, LoopConfig, PolicyFactory, TuneError};

struct Family(HashMap<String, ScriptedPolicy>);

impl PolicyFactory for Family {
    fn open(&self, id: &str) -> Result<Box<dyn PolicyClient>, PolicyError> {
        self.0
            .get(id)
            .cloned()
            .map(|p| Box::new(p) as Box<dyn PolicyClient>)
            .ok_or_else(|| PolicyError::Unavailable(format!("no policy {id}")))
    }
}

/// Gold script with `detours` extra searches up front and, unless `correct`,
/// a wrong final answer.
fn variant(s: &Scenario, detours: usize, correct: bool) -> Vec<GoldStep> {
    let mut steps: Vec<GoldStep> = (0..detours)
        .map(|i| GoldStep {
            thought: "Let me get some background first.".into(),
            action: format!("Search[background {i}]"),
        })
        .collect();
    steps.extend(s.gold_script().iter().cloned());
    if !correct {
        steps.last_mut().unwrap().action = "Finish[not sure]".into();
    }
    steps
}

fn member(id: &str, train: &[Scenario], test: &[Scenario], detours: usize, correct_test: usize) -> ScriptedPolicy {
    let kb = shipped::hotpotqa();
    let mut p = ScriptedPolicy::new(id);
    for s in train {
        p.insert(
            s.task_id(),
            gold_outputs(s.task_id(), &variant(s, detours, true), &kb).unwrap(),
        );
    }
    for (k, s) in test.iter().enumerate() {
        p.insert(
            s.task_id(),
            gold_outputs(s.task_id(), &variant(s, 0, k < correct_test), &kb).unwrap(),
        );
    }
    p
}

fn main() {
    let scenarios = starter::qa().scenarios;
    let (train, test) = scenarios.split_at(6);
    let family = Family(
        [(2, 2), (1, 4), (0, 5), (0, 5)]
            .into_iter()
            .enumerate()
            .map(|(i, (detours, correct))| {
                let id = format!("m{i}");
                let p = member(&id, train, test, detours, correct);
                (id, p)
            })
            .collect(),
    );
    let hook = |_: &Path, base: &str, _: &Path| -> Result<String, TuneError> {
        let n: usize = base.trim_start_matches('m').parse().unwrap_or(0);
        Ok(format!("m{}", n + 1))
    };

    let out = tempfile::tempdir().expect("temp dir");
    let config = LoopConfig::new(train.to_vec(), test.to_vec(), "m0", out.path());
    let outcome = self_learning_loop(&config, &KbSet::shipped(), &family, &hook).expect("loop runs");
    println!("{}", summary_table(&outcome));
    for stored in outcome.store.iter() {
        let t = &stored.trajectory;
        println!(
            "{:<24} {} steps (from iteration {})",
            t.task_id,
            t.steps.len(),
            stored.iteration
        );
    }
}
