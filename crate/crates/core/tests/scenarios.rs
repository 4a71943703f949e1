use nbfix_core::agent::{HackFlag, SessionStatus, Strategy};
use nbfix_core::cost::PricingTable;
use nbfix_core::eval::{bundled_dir, load_dir, run_eval, sample_pricing_path, EvalOptions};

fn options() -> EvalOptions {
    EvalOptions::new(PricingTable::load(&sample_pricing_path()).unwrap())
}

#[test]
fn bundled_suite_outcomes() {
    let scenarios = load_dir(&bundled_dir()).unwrap();
    assert!(scenarios.len() >= 6);
    let run = run_eval(&scenarios, None, &options());
    for o in &run.report.scenarios {
        println!("{} {:?} {:?} steps={} {:?}", o.name, o.strategy, o.status, o.steps_taken, o.invalid);
        assert!(o.invalid.is_none(), "{}: {:?}", o.name, o.invalid);
    }
    let status = |name: &str| run.report.scenarios.iter().find(|o| o.name == name).unwrap().status.unwrap();
    assert_eq!(status("unfixable_missing_package"), SessionStatus::MaxSteps);
    assert_eq!(status("name_error_missing_import"), SessionStatus::FinishedSuccess);
    let hack = run.report.scenarios.iter().find(|o| o.name == "hack_comment_out").unwrap();
    assert_eq!(hack.hack_flags, vec![HackFlag::CommentedOutErrorLine]);
    let mode = run.report.steps_histogram.iter().max_by_key(|(_, c)| **c).map(|(s, _)| *s);
    assert_eq!(mode, Some(1));
    let single = run.records.iter().find(|r| r.result.strategy == Strategy::SingleAction).unwrap();
    assert_eq!((single.result.steps_taken, single.result.usage.len()), (1, 1));
}

#[test]
fn reports_are_deterministic() {
    let scenarios = load_dir(&bundled_dir()).unwrap();
    let a = run_eval(&scenarios, None, &options()).report.to_json();
    let b = run_eval(&scenarios, None, &options()).report.to_json();
    assert_eq!(a, b);
}

#[test]
fn bundled_scenario_loads() {
    let s = nbfix_core::eval::load_scenario(&bundled_dir().join("name_error_missing_import.json")).unwrap();
    assert_eq!(s.expected_ename, "NameError");
    let logs = nbfix_core::eval::load_scenario(&bundled_dir().join("type_error_log_parsing.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    logs.stage(dir.path()).unwrap();
    assert!(dir.path().join("aggregated_logs.log").is_file());
}

#[test]
fn nested_setup_files_are_staged() {
    let s = nbfix_core::eval::load_scenario(&bundled_dir().join("file_not_found_explore.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    s.stage(dir.path()).unwrap();
    assert!(dir.path().join("data/sales.csv").is_file());
}

#[test]
fn mismatched_scenario_is_reported_not_run() {
    let mut scenarios = load_dir(&bundled_dir()).unwrap();
    scenarios.retain(|s| s.name == "name_error_missing_import");
    let mut wrong = scenarios[0].clone();
    wrong.name = "a_wrong_expectation".into();
    wrong.expected_ename = "KeyError".into();
    scenarios.push(wrong);
    let run = run_eval(&scenarios, None, &options());
    let bad = &run.report.scenarios[0];
    assert_eq!(bad.name, "a_wrong_expectation");
    assert!(bad.invalid.as_deref().unwrap().contains("NameError"));
    assert_eq!((run.report.valid, run.report.resolved), (1, 1));
    assert_eq!(run.report.resolved_rate, 1.0);
}

#[test]
fn scenarios_do_not_leak_into_each_other() {
    let text = |name: &str, src: &str, ename: &str| {
        format!(
            r#"{{"name":"{name}","notebook":{{"cells":[{{"cell_type":"code","metadata":{{}},"outputs":[],"execution_count":null,"source":"{src}"}}],"metadata":{{}},"nbformat":4,"nbformat_minor":4}},"failing_cell":1,"expected_ename":"{ename}","setup_files":{{"leak.txt":"x"}},"script":[{{"tool_call":{{"name":"finish","arguments":{{"comment":""}}}}}}]}}"#
        )
    };
    let first = nbfix_core::eval::parse_scenario(&text("first", "secret = 1\\nraise ValueError()", "ValueError")).unwrap();
    let second = nbfix_core::eval::parse_scenario(&text("second", "import os\\nprint(os.listdir())\\nsecret", "NameError")).unwrap();
    let opts = EvalOptions { workers: 1, ..options() };
    let run = run_eval(&[first, second], None, &opts);
    assert!(run.report.scenarios.iter().all(|o| o.invalid.is_none()), "{:?}", run.report.scenarios);
}

#[test]
fn strategy_filter() {
    let scenarios = load_dir(&bundled_dir()).unwrap();
    let run = run_eval(&scenarios, Some(Strategy::SingleAction), &options());
    assert_eq!(run.report.scenarios.len(), 1);
    assert_eq!(run.report.scenarios[0].steps_taken, 1);
}
