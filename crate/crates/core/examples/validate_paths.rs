//! Check action sequences against the HotpotQA action knowledge and list
//! every valid path up to length three.

use actionkb::action_kb::{enumerate_paths, shipped};
use actionkb::trajectory::{render_path, ActionInvocation};
use actionkb::validator::{steps_for_actions, validate_steps, PathComparison};

fn main() {
    let kb = shipped::hotpotqa();
    let candidates = [
        vec![
            ("Search", "Gary Harrison"),
            ("Search", "Bryan White"),
            ("Finish", "Bryan White"),
        ],
        vec![
            ("Lookup", "songs"),
            ("Search", "Gary Harrison"),
            ("Finish", "Bryan White"),
        ],
        vec![
            ("Retrieve", "Milhouse Van Houten"),
            ("Lookup", "named after"),
            ("Finish", "Richard Nixon"),
        ],
        vec![
            ("Search", "Expo 2010"),
            ("Browse", "shanghai.gov"),
            ("Finish", "Beijing"),
        ],
    ];
    for calls in candidates {
        let actions: Vec<ActionInvocation> = calls.iter().map(|(n, a)| ActionInvocation::bracket(n, a)).collect();
        let report = validate_steps(&kb, &steps_for_actions(&actions), PathComparison::Strict);
        let mut path = vec![ActionInvocation::start()];
        path.extend(actions.iter().map(ActionInvocation::as_path_entry));
        let verdict = match report.first_violation() {
            None => "clean".to_string(),
            Some(v) => format!(
                "step {}: {}",
                v.index + 1,
                v.flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(", ")
            ),
        };
        println!("{:<80} {verdict}", render_path(&path));
    }

    let paths = enumerate_paths(&kb, 3).expect("small KB");
    println!("\n{} valid name sequences up to length 3:", paths.len());
    for p in paths.iter().filter(|p| p.len() <= 2) {
        println!("  Start->{}", p.join("->"));
    }
}
