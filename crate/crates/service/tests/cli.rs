use std::path::{Path, PathBuf};
use std::process::Command;

use nbfix_core::eval::{bundled_dir, load_scenario, run_scenario, sample_pricing_path, EvalOptions};
use nbfix_core::cost::PricingTable;
use nbfix_core::agent::SessionStatus;
use nbfix_kernel::KernelSpec;

const BIN: &str = env!("CARGO_BIN_EXE_nbfix");

fn nbfix(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (out.status.success(), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn scenario(name: &str) -> PathBuf {
    bundled_dir().join(format!("{name}.json"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn replay_prints_outcome_and_writes_record() {
    let dir = tempfile::tempdir().unwrap();
    let record = dir.path().join("r.json");
    let (ok, out, err) = nbfix(&["replay", "--scenario", s(&scenario("name_error_missing_import")), "--transcript", s(&record)]);
    assert!(ok, "{err}");
    assert!(out.contains("finished_success steps=2"), "{out}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&record).unwrap()).unwrap();
    assert_eq!(v["session_id"], "name_error_missing_import");
    assert_eq!(v["status"], "finished_success");
}

#[test]
fn eval_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let (ok, out, err) = nbfix(&[
        "eval", "--dir", s(&bundled_dir()), "--pricing", s(&sample_pricing_path()), "--out", s(&out_dir),
    ]);
    assert!(ok, "{err}");
    assert!(out.contains("resolved 6/7"), "{out}");
    for f in ["report.json", "costs.csv", "histogram.csv", "plot_data.json"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }

    let report_dir = dir.path().join("report");
    let (ok, out, err) = nbfix(&[
        "report", "--transcripts", s(&out_dir.join("transcripts")), "--pricing", s(&sample_pricing_path()), "--out", s(&report_dir),
    ]);
    assert!(ok, "{err}");
    assert!(out.starts_with("session_id,"), "{out}");
    assert_eq!(
        std::fs::read_to_string(report_dir.join("costs.csv")).unwrap(),
        std::fs::read_to_string(out_dir.join("costs.csv")).unwrap()
    );
}

#[test]
fn fix_writes_repaired_notebook() {
    let dir = tempfile::tempdir().unwrap();
    let sc = load_scenario(&scenario("name_error_missing_import")).unwrap();
    let nb_path = dir.path().join("circle.ipynb");
    std::fs::write(&nb_path, sc.notebook.serialize()).unwrap();
    let (ok, out, err) = nbfix(&[
        "fix", "--notebook", s(&nb_path), "--cell", "3", "--scripted", s(&scenario("name_error_missing_import")),
    ]);
    assert!(ok, "{err}");
    assert!(out.starts_with("finished_success after 2 steps"), "{out}");
    assert!(err.contains("\"kind\":\"action\""));
    let fixed = std::fs::read_to_string(dir.path().join("circle.fixed.ipynb")).unwrap();
    assert!(fixed.contains("import math"));
}

#[test]
fn bad_arguments_fail_cleanly() {
    let (ok, _, err) = nbfix(&["replay", "--scenario", "/no/such/file.json"]);
    assert!(!ok);
    assert!(err.starts_with("nbfix: "), "{err}");
    let (ok, _, _) = nbfix(&["eval", "--dir", ".", "--pricing", "x", "--out", "y", "--strategy", "bogus"]);
    assert!(!ok);
}

#[test]
fn sidecar_subcommand_drives_a_scenario() {
    let spec = KernelSpec::Sidecar { program: BIN.into(), args: vec!["sidecar".into()] };
    let mut opts = EvalOptions::new(PricingTable::load(&sample_pricing_path()).unwrap());
    opts.kernel = spec;
    for name in ["name_error_missing_import", "file_not_found_explore"] {
        let sc = load_scenario(&scenario(name)).unwrap();
        let r = run_scenario(&sc, &opts).unwrap();
        assert_eq!(r.status, SessionStatus::FinishedSuccess, "{name}");
    }
}

#[test]
fn global_sidecar_flag() {
    let (ok, out, err) = nbfix(&[
        "--sidecar", BIN, "--sidecar-arg", "sidecar", "replay", "--scenario", s(&scenario("paired_key_error_single_action")),
    ]);
    assert!(ok, "{err}");
    assert!(out.contains("single_action finished_success steps=1"), "{out}");
}
