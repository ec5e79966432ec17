//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use actionkb::action_kb::{shipped, ActionKnowledge};
use actionkb::env::{GoldStep, QaScenario, Scenario};
use actionkb::runtime::{gold_outputs, ScriptedPolicy};
use actionkb::trajectory::{compose_step_output, parse_action};
use actionkb::validator::steps_for_actions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn step(thought: &str, action: &str) -> GoldStep {
    GoldStep {
        thought: thought.to_string(),
        action: action.to_string(),
    }
}

pub fn widget_answer(k: usize) -> String {
    format!("c{k}x")
}

/// A one-fact QA task: the code of widget `k`.
pub fn widget_task(prefix: &str, k: usize) -> Scenario {
    let title = format!("Widget {k}");
    let corpus = [(
        title.clone(),
        vec![vec![
            format!("Widget {k} is a fictional part used in tests."),
            format!("The code of Widget {k} is {}.", widget_answer(k)),
        ]],
    )]
    .into_iter()
    .collect();
    Scenario::Qa(QaScenario {
        task_id: format!("{prefix}-{k:03}"),
        kb: "hotpotqa".into(),
        question: format!("What is the code of Widget {k}?"),
        gold_answer: widget_answer(k),
        corpus,
        gold_script: vec![
            step("Search for the widget.", &format!("Search[Widget {k}]")),
            step("The passage names the code.", &format!("Finish[{}]", widget_answer(k))),
        ],
    })
}

pub fn widget_tasks(prefix: &str, n: usize) -> Vec<Scenario> {
    (0..n).map(|k| widget_task(prefix, k)).collect()
}

/// Solution scripts of decreasing length for widget `k`.
pub fn widget_solution(k: usize, len: usize, answer: &str) -> Vec<GoldStep> {
    let search = step("Search for the widget.", &format!("Search[Widget {k}]"));
    let finish = step("I have the answer.", &format!("Finish[{answer}]"));
    match len {
        2 => vec![search, finish],
        3 => vec![search, step("Find the code sentence.", "Lookup[code]"), finish],
        5 => vec![
            search,
            step("Try a narrower query.", &format!("Search[Widget {k} code]")),
            step("Find the code sentence.", "Lookup[code]"),
            step("Check for another mention.", "Lookup[code]"),
            finish,
        ],
        other => panic!("no {other}-step widget solution"),
    }
}

/// Step outputs for `gold` as a scripted policy would emit them.
pub fn outputs(task_id: &str, gold: &[GoldStep], kb: &ActionKnowledge) -> Vec<String> {
    gold_outputs(task_id, gold, kb).expect("fixture actions parse")
}

/// One member of the improving policy family. `train_len` gives each
/// training task's solution length (0 means answer wrongly in 2 steps;
/// `usize::MAX` means an unclean 2-step solution that starts with Lookup).
/// The first `correct_test` test tasks are answered correctly.
pub fn family_member(
    id: &str,
    train: &[Scenario],
    train_len: &dyn Fn(usize) -> usize,
    test: &[Scenario],
    correct_test: usize,
) -> ScriptedPolicy {
    let kb = shipped::hotpotqa();
    let mut p = ScriptedPolicy::new(id);
    for (k, s) in train.iter().enumerate() {
        let gold = match train_len(k) {
            0 => widget_solution(k, 2, "unknown"),
            usize::MAX => vec![
                step("Jump straight to the code.", "Lookup[code]"),
                step("I have the answer.", &format!("Finish[{}]", widget_answer(k))),
            ],
            len => widget_solution(k, len, &widget_answer(k)),
        };
        p.insert(s.task_id(), outputs(s.task_id(), &gold, &kb));
    }
    for (k, s) in test.iter().enumerate() {
        let answer = if k < correct_test {
            widget_answer(k)
        } else {
            "unknown".to_string()
        };
        p.insert(s.task_id(), outputs(s.task_id(), &widget_solution(k, 2, &answer), &kb));
    }
    p
}

pub struct Family {
    pub dir: PathBuf,
    pub train: Vec<Scenario>,
    pub test: Vec<Scenario>,
    pub hook: PathBuf,
    pub calls_log: PathBuf,
}

pub const TRAIN_TASKS: usize = 6;
pub const TEST_TASKS: usize = 100;

/// Training-task lengths per member. Task 0 goes 5 -> 3 -> 2; task 1 is
/// wrong at m0; task 2 offers an unclean shortcut at m1; task 3 stays at 3.
pub fn member_length(member: usize, k: usize) -> usize {
    match (member, k) {
        (0, 0) => 5,
        (1, 0) => 3,
        (_, 0) => 2,
        (0, 1) => 0,
        (_, 1) => 3,
        (1, 2) => usize::MAX,
        (_, 2) => 5,
        _ => 3,
    }
}

/// Policies m0..m3 scoring 0.40, 0.55, 0.57, 0.58 on 100 test tasks, a
/// tune hook that maps m<i> to m<i+1>, and a log of hook invocations.
/// `fail_from` makes the hook exit 1 when asked to tune that base model.
pub fn write_family(dir: &Path, fail_from: Option<&str>) -> Family {
    let train = widget_tasks("train", TRAIN_TASKS);
    let test = widget_tasks("test", TEST_TASKS);
    let policies = dir.join("policies");
    fs::create_dir_all(&policies).unwrap();
    for (i, correct) in [40usize, 55, 57, 58].into_iter().enumerate() {
        let id = format!("m{i}");
        let p = family_member(&id, &train, &|k| member_length(i, k), &test, correct);
        fs::write(
            policies.join(format!("{id}.json")),
            serde_json::to_string_pretty(&p.to_file_contents()).unwrap(),
        )
        .unwrap();
    }
    let calls_log = dir.join("tune_calls.log");
    let fail = fail_from
        .map(|m| format!("if [ \"$base\" = \"{m}\" ]; then echo \"refusing $base\" >&2; exit 1; fi\n"))
        .unwrap_or_default();
    let hook = dir.join("tune.sh");
    fs::write(
        &hook,
        format!(
            "#!/bin/sh\n\
             while [ $# -gt 0 ]; do\n\
             case \"$1\" in\n\
             --dataset) ds=\"$2\"; shift 2;;\n\
             --base-model) base=\"$2\"; shift 2;;\n\
             --out) out=\"$2\"; shift 2;;\n\
             *) shift;;\n\
             esac\n\
             done\n\
             test -s \"$ds\" || exit 4\n\
             test -d \"$out\" || exit 5\n\
             echo \"$base\" >> \"{log}\"\n\
             {fail}\
             n=${{base#m}}\n\
             echo \"tuned $base on $ds\"\n\
             echo \"m$((n + 1))\"\n",
            log = calls_log.display()
        ),
    )
    .unwrap();
    make_executable(&hook);
    let packs = [("train.json", &train), ("test.json", &test)];
    for (name, scenarios) in packs {
        fs::write(
            dir.join(name),
            serde_json::to_string(&serde_json::json!({ "scenarios": scenarios })).unwrap(),
        )
        .unwrap();
    }
    Family {
        dir: dir.to_path_buf(),
        train,
        test,
        hook,
        calls_log,
    }
}

#[cfg(unix)]
pub fn make_executable(path: &Path) {
    use std::os::unix::fs::PermissionsExt;
    let mut perm = fs::metadata(path).unwrap().permissions();
    perm.set_mode(0o755);
    fs::set_permissions(path, perm).unwrap();
}

pub fn tune_calls(f: &Family) -> Vec<String> {
    fs::read_to_string(&f.calls_log)
        .map(|s| s.lines().map(str::to_string).collect())
        .unwrap_or_default()
}

/// A selflearn config next to the family files.
pub fn write_selflearn_config(f: &Family, epsilon: f64, max_iterations: usize) -> PathBuf {
    let path = f.dir.join("selflearn.json");
    let cfg = serde_json::json!({
        "train": "train.json",
        "test": "test.json",
        "base_policy": "m0",
        "policies_dir": "policies",
        "tune_cmd": "./tune.sh",
        "epsilon": epsilon,
        "tau": 0.7,
        "max_iterations": max_iterations,
        "parallelism": 4,
        "out": "out"
    });
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

/// Scripted QA policy whose outputs break the rules on a seeded subset of
/// tasks: a `Lookup` as the first action, or an unknown `Browse` action.
/// Each bad output is followed by the correct output for the same step.
pub fn violating_policy(tasks: &[Scenario], seed: u64, rate: f64) -> ScriptedPolicy {
    let kb = shipped::hotpotqa();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ScriptedPolicy::new("violator");
    for s in tasks {
        let gold = s.gold_script();
        let mut outs = outputs(s.task_id(), gold, &kb);
        if rng.gen_bool(rate) {
            let j = rng.gen_range(0..gold.len());
            let bad_action = if j == 0 && rng.gen_bool(0.5) {
                "Lookup[code]".to_string()
            } else {
                "Browse[the web]".to_string()
            };
            let calls: Vec<_> = gold[..j]
                .iter()
                .map(|g| parse_action(&g.action, &kb).unwrap())
                .collect();
            let previous = steps_for_actions(&calls);
            outs.insert(
                j,
                compose_step_output(&previous, j, "Let me try something else.", &bad_action),
            );
        }
        p.insert(s.task_id(), outs);
    }
    p
}

pub fn write_policy(path: &Path, p: &ScriptedPolicy) {
    fs::write(path, serde_json::to_string_pretty(&p.to_file_contents()).unwrap()).unwrap();
}

pub fn write_scenarios(path: &Path, scenarios: &[Scenario]) {
    fs::write(
        path,
        serde_json::to_string(&serde_json::json!({ "scenarios": scenarios })).unwrap(),
    )
    .unwrap();
}

/// Run the CLI in-process; returns (status, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("actionkb").chain(args.iter().copied());
    let code = actionkb::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Play `actions` in a fresh world until a terminal action; returns goal
/// success and validator cleanliness of the action sequence.
pub fn play(scenario: &Scenario, kb: &ActionKnowledge, actions: &[String]) -> (bool, bool) {
    let calls: Vec<_> = actions.iter().map(|a| parse_action(a, kb).unwrap()).collect();
    let mut env = scenario.instantiate();
    for c in &calls {
        if env.step(c).done {
            break;
        }
    }
    let report = actionkb::validator::validate_steps(
        kb,
        &steps_for_actions(&calls),
        actionkb::validator::PathComparison::Strict,
    );
    (env.outcome().success, report.clean)
}

/// Every adjacent swap of `actions` that changes the sequence.
pub fn adjacent_swaps(actions: &[String]) -> Vec<(usize, Vec<String>)> {
    (0..actions.len().saturating_sub(1))
        .filter(|&i| actions[i] != actions[i + 1])
        .map(|i| {
            let mut m = actions.to_vec();
            m.swap(i, i + 1);
            (i, m)
        })
        .collect()
}

pub fn gold_actions(s: &Scenario) -> Vec<String> {
    s.gold_script().iter().map(|g| g.action.clone()).collect()
}

const PICK_LINES: &[&str] = &[
    "Goto(receptacle) -> Open(receptacle)",
    "[Goto(receptacle), Open(receptacle)] -> Take(object, from: receptacle)",
    "Take(object, from: receptacle) -> Goto(receptacle)",
    "[Goto(receptacle), Take(object, from: receptacle)] -> Put(object, in/on: receptacle)",
];

const TREAT_PREFIX: &[&str] = &[
    "[Goto(receptacle)] -> Open(receptacle)",
    "[Goto(receptacle), Open(receptacle)] -> Take(object, from: receptacle)",
    "[Goto(receptacle), Take(object, from: receptacle)] -> Put(object, in/on: receptacle)",
];

/// Reference rule blocks, transcribed by hand, keyed by KB id.
pub fn reference_rule_lines() -> Vec<(&'static str, Vec<&'static str>)> {
    let treat = |last: &'static str| TREAT_PREFIX.iter().copied().chain([last]).collect::<Vec<_>>();
    vec![
        (
            "hotpotqa",
            vec![
                "Start:(Search, Retrieve)",
                "Retrieve:(Retrieve, Search, Lookup, Finish)",
                "Search:(Search, Retrieve, Lookup, Finish)",
                "Lookup:(Lookup, Search, Retrieve, Finish)",
                "Finish:()",
            ],
        ),
        ("alfworld_pick", PICK_LINES.to_vec()),
        (
            "alfworld_light",
            vec![
                "[Goto(receptacle)] -> Open(receptacle)",
                "[Goto(receptacle), Open(receptacle)] -> Take(object, from: receptacle)",
                "[Goto(receptacle)] -> Use(receptacle)",
            ],
        ),
        (
            "alfworld_clean",
            treat("[Put(object, from: receptacle)] -> Clean(object, with: receptacle)"),
        ),
        (
            "alfworld_heat",
            treat("[Put(object, in/on: receptacle)] -> Heat(object, with: receptacle)"),
        ),
        (
            "alfworld_cool",
            treat("[Put(object, in/on: receptacle)] -> Cool(object, with: receptacle)"),
        ),
        ("alfworld_pick_two", PICK_LINES.to_vec()),
    ]
}
