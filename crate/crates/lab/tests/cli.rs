use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab")).args(args).output().expect("lab runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

const TIMESEP: &str = r#"{
  "preset": { "name": "flat" },
  "seed": 3,
  "tasks": [{ "task": "timesep", "pairs": [{ "p": [0, 0], "q": [2, 1] }], "segments": 4, "restarts": 2 }]
}"#;

#[test]
fn presets_lists_names_and_pack() {
    let out = lab(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["flat", "conformal_flat", "product_circle", "e1_counterexample", "accept/flat-cone", "accept/e1-vicious"] {
        assert!(text.contains(name), "missing {name} in {text}");
    }
}

#[test]
fn unknown_preset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{ "preset": { "name": "klein" }, "tasks": [] }"#);
    let out = lab(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("preset.name"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn invalid_task_field_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "seg.json",
        r#"{ "preset": { "name": "flat" }, "tasks": [{ "task": "timesep", "pairs": [{ "p": [0, 0], "q": [2, 1] }], "segments": 1 }] }"#,
    );
    let out = lab(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tasks[0].segments"));

    let cfg = write_config(dir.path(), "extra.json", r#"{ "preset": { "name": "flat" }, "tasks": [], "colour": 1 }"#);
    let out = lab(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn run_writes_reports_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ts.json", TIMESEP);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = lab(&["run", &cfg, "--out", d.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let report = read_json(&a.join("timesep.json"));
    assert_eq!(report["status"], "ok");
    assert_eq!(report["seed"], 3);
    let v = report["result"]["pairs"][0]["value"].as_f64().unwrap();
    assert!((v - 3f64.sqrt()).abs() < 1e-9);
    let summary = read_json(&a.join("summary.json"));
    assert_eq!(summary["errors"], 0);
    for f in ["timesep.json", "timesep_paths.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn failing_task_exits_2_and_keeps_going() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mixed.json",
        r#"{
  "preset": { "name": "flat" },
  "tasks": [
    { "task": "flow_rho", "field": { "kind": "constant", "v": [0.0, 1.0] }, "x0": [0, 0], "t": 10 },
    { "task": "stable_norm", "hs": [[1, 0]], "n_max": 8, "resolution": 4 }
  ]
}"#,
    );
    let out_dir = dir.path().join("o");
    let out = lab(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let summary = read_json(&out_dir.join("summary.json"));
    assert_eq!(summary["errors"], 1);
    assert_eq!(read_json(&out_dir.join("flow_rho.json"))["status"], "error");
    assert_eq!(read_json(&out_dir.join("stable_norm.json"))["status"], "ok");
}

#[test]
fn plot_checks_the_report_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "norm.json",
        r#"{ "preset": { "name": "flat" }, "tasks": [{ "task": "stable_norm", "hs": [[1, 1]], "n_max": 8, "resolution": 4 }] }"#,
    );
    let o = dir.path().join("o");
    assert!(lab(&["run", &cfg, "--out", o.to_str().unwrap()]).status.success());
    let report = o.join("stable_norm.json");
    let csv = dir.path().join("plateau.csv");
    let out = lab(&["plot", report.to_str().unwrap(), "--kind", "plateau", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 9);

    let out = lab(&["plot", report.to_str().unwrap(), "--kind", "lipschitz_hist"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn every_pack_scenario_parses_and_validates() {
    for (name, _) in classa_lab::pack::ALL {
        let s = classa_lab::load_scenario(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn duplicate_task_kinds_get_indexed_reports() {
    let dir = tempfile::tempdir().unwrap();
    let s = classa_lab::parse_scenario(
        r#"{ "preset": { "name": "flat" }, "seed": 1, "tasks": [
            { "task": "stable_norm", "hs": [[1, 0]], "n_max": 8, "resolution": 4 },
            { "task": "stable_norm", "hs": [[0, 1]], "n_max": 8, "resolution": 4 },
            { "task": "timesep", "pairs": [{ "p": [0, 0], "q": [2, 1] }], "segments": 4, "restarts": 2, "seed": 40 }
        ] }"#,
    )
    .unwrap();
    assert_eq!(s.task_seed(0), 1);
    assert_eq!(s.task_seed(1), 2);
    assert_eq!(s.task_seed(2), 40);
    let m = s.validate().unwrap();
    let out = classa_lab::run_scenario(&s, &m, dir.path(), true).unwrap();
    assert_eq!(out.exit_code(), 0);
    let names: Vec<&str> = out.records.iter().map(|r| r.report.as_str()).collect();
    assert_eq!(names, ["stable_norm_0.json", "stable_norm_1.json", "timesep.json"]);
    assert!(dir.path().join("stable_norm_1_plateau_0_1.csv").exists());
}
