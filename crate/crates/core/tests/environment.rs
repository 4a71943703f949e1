use std::time::Duration;

use nbfix_core::env::{AgentAction, EnvError, Environment, TRUNCATION_MARKER};
use nbfix_core::notebook::{Cell, Notebook};
use nbfix_kernel::KernelSpec;
use proptest::prelude::*;

fn env(cells: Vec<Cell>) -> (tempfile::TempDir, Environment) {
    let dir = tempfile::tempdir().unwrap();
    let env = Environment::start(Notebook::from_cells(cells), &KernelSpec::Mini, dir.path()).unwrap();
    (dir, env)
}

fn exec(n: usize) -> AgentAction {
    AgentAction::ExecuteCell { cell_num: n, comment: String::new() }
}

#[test]
fn empty_notebook_starts() {
    let (_d, mut e) = env(vec![]);
    assert!(e.notebook().is_empty());
    let obs = e.apply_action(&AgentAction::CreateCell { source: "1 + 1".into(), position: None, comment: "".into() }).unwrap();
    assert_eq!((obs.new_cell_num, obs.output_text.as_str()), (Some(1), "2"));
}

#[test]
fn environments_are_isolated() {
    let (_a, mut one) = env(vec![Cell::code("x = 1"), Cell::code("x")]);
    let (_b, mut two) = env(vec![Cell::code("x")]);
    one.replay_to_cell(1).unwrap();
    assert_eq!(one.apply_action(&exec(2)).unwrap().output_text, "1");
    assert_eq!(two.apply_action(&exec(1)).unwrap().ename.as_deref(), Some("NameError"));
}

#[test]
fn missing_runtime_is_environment_down() {
    let dir = tempfile::tempdir().unwrap();
    let spec = KernelSpec::Sidecar { program: "/nonexistent/kernel".into(), args: vec![] };
    let err = Environment::start(Notebook::default(), &spec, dir.path()).err().unwrap();
    assert!(matches!(err, EnvError::EnvironmentDown(_)));
}

#[test]
fn replay_examples() {
    let (_d, mut e) = env(vec![Cell::code("x=1"), Cell::code("x+1")]);
    let obs = e.replay_to_cell(2).unwrap();
    assert_eq!(obs[1].output_text, "2");

    let (_d, mut e) = env(vec![Cell::code("x=1"), Cell::markdown("# note")]);
    let obs = e.replay_to_cell(2).unwrap();
    assert_eq!((obs[1].output_text.as_str(), obs[1].is_error), ("", false));

    let (_d, mut e) = env(vec![Cell::code("x=1"), Cell::code("1/0"), Cell::code("x")]);
    let obs = e.replay_to_cell(3).unwrap();
    assert!(obs[1].is_error);
    assert_eq!(obs[2].output_text, "1");
    assert!(e.replay_to_cell(9).is_err());
}

#[test]
fn action_examples() {
    let (d, mut e) = env(vec![Cell::code("print(7)"), Cell::code("y = 1")]);
    let obs = e.apply_action(&exec(1)).unwrap();
    assert_eq!((obs.output_text.as_str(), obs.is_error), ("7\n", false));

    let bad = AgentAction::EditCell { cell_num: 99, source: "x".into(), comment: "".into() };
    let obs = e.apply_action(&bad).unwrap();
    assert!(obs.is_error);
    assert!(obs.output_text.contains("CellOutOfRange"));

    std::fs::write(d.path().join("data.csv"), "a\n").unwrap();
    let obs = e.apply_action(&AgentAction::CreateCell { source: "!ls".into(), position: None, comment: "".into() }).unwrap();
    assert_eq!(obs.new_cell_num, Some(3));
    assert!(obs.output_text.contains("data.csv"));
}

#[test]
fn edit_does_not_execute() {
    let (_d, mut e) = env(vec![Cell::code("1/0")]);
    let obs = e.apply_action(&AgentAction::EditCell { cell_num: 1, source: "z = 3".into(), comment: "".into() }).unwrap();
    assert_eq!((obs.output_text.as_str(), obs.is_error), ("", false));
    let probe = e.apply_action(&AgentAction::CreateCell { source: "z".into(), position: None, comment: "".into() }).unwrap();
    assert_eq!(probe.ename.as_deref(), Some("NameError"));
}

#[test]
fn finish_changes_nothing() {
    let (_d, mut e) = env(vec![Cell::code("x = 4")]);
    e.replay_to_cell(1).unwrap();
    let before = e.notebook().clone();
    let obs = e.apply_action(&AgentAction::Finish { comment: "done".into() }).unwrap();
    assert_eq!(obs.output_text, "");
    assert_eq!(e.notebook(), &before);
    let obs = e.apply_action(&AgentAction::CreateCell { source: "x".into(), position: None, comment: "".into() }).unwrap();
    assert_eq!(obs.output_text, "4");
}

#[test]
fn large_output_is_truncated() {
    let (_d, mut e) = env(vec![Cell::code("print('x' * 10000)")]);
    let obs = e.apply_action(&exec(1)).unwrap();
    assert!(obs.truncated);
    assert!(obs.output_text.contains(TRUNCATION_MARKER));
    assert!(obs.output_text.chars().count() <= 4000 + TRUNCATION_MARKER.chars().count());
}

#[test]
fn outputs_are_recorded_on_the_cell() {
    let (_d, mut e) = env(vec![Cell::code("print('a')\n2")]);
    e.apply_action(&exec(1)).unwrap();
    let cell = e.notebook().cell(1).unwrap();
    assert_eq!(cell.execution_count, Some(1));
    assert_eq!(cell.outputs.len(), 2);
}

#[test]
fn deadline_caps_execution() {
    let (_d, e) = env(vec![Cell::code("while True:\n    pass")]);
    let mut e = e.with_exec_timeout(Duration::from_secs(60));
    e.set_deadline(Some(std::time::Instant::now() + Duration::from_millis(200)));
    let obs = e.apply_action(&exec(1)).unwrap();
    assert_eq!(obs.ename.as_deref(), Some(nbfix_kernel::TIMEOUT_ENAME));
}

fn action_strategy() -> impl Strategy<Value = AgentAction> {
    let src = prop_oneof![Just("x = 1".to_string()), Just("1/0".to_string()), Just("print(x)".to_string()), "[a-z]{1,4}"];
    prop_oneof![
        (src.clone(), proptest::option::of(0usize..6)).prop_map(|(source, position)| AgentAction::CreateCell { source, position, comment: String::new() }),
        (0usize..6, src).prop_map(|(cell_num, source)| AgentAction::EditCell { cell_num, source, comment: String::new() }),
        (0usize..6).prop_map(|cell_num| AgentAction::ExecuteCell { cell_num, comment: String::new() }),
        Just(AgentAction::Finish { comment: String::new() }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn any_action_sequence_keeps_the_notebook_valid(actions in proptest::collection::vec(action_strategy(), 1..8)) {
        let (_d, mut e) = env(vec![Cell::code("a = 1"), Cell::markdown("text")]);
        for a in &actions {
            let obs = e.apply_action(a).unwrap();
            prop_assert!(obs.output_text.chars().count() <= e.truncation_limit() + TRUNCATION_MARKER.chars().count());
            let indices: Vec<usize> = e.notebook().cells().iter().map(|c| c.index()).collect();
            prop_assert_eq!(indices, (1..=e.notebook().len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn truncation_bound(text in "[a-zé\n]{0,600}", limit in 0usize..300) {
        let (out, flag) = nbfix_core::env::truncate_output(&text, limit);
        let limit = limit.max(64);
        prop_assert!(out.chars().count() <= limit + TRUNCATION_MARKER.chars().count());
        prop_assert_eq!(flag, text.chars().count() > limit);
    }
}
