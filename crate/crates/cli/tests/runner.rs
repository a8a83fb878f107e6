use std::path::Path;
use std::process::{Command, Output};

fn lacelab(args: &[&str], env: Option<(&str, &str)>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lacelab"));
    cmd.args(args).env_remove("LACELAB_BUDGET");
    if let Some((k, v)) = env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn config_with(out: &Path, suites: &str) -> String {
    format!(r#"{{"output": {{"path": {:?}}}, "parallelism": 2, "suites": [{suites}]}}"#, out.to_string_lossy())
}

#[test]
fn empty_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("reports");
    let cfg = write_config(dir.path(), &config_with(&out, ""));
    let o = lacelab(&["run", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["suites"].as_array().unwrap().len(), 0);
    assert_eq!(summary["pass"], true);
}

#[test]
fn unknown_graph_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("reports");
    let cfg = write_config(dir.path(), &config_with(&out, r#"{"name": "verify-lace", "graphs": ["dodecahedron"]}"#));
    let o = lacelab(&["run", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dodecahedron"));
    let o = lacelab(&["verify-bounds", "--graph", "dodecahedron"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = lacelab(&["run", "--config", "/nonexistent/config.json"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_overrun_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("reports");
    let cfg = write_config(dir.path(), &config_with(&out, r#"{"name": "verify-lace", "graphs": ["K4"], "budget": 100}"#));
    assert_eq!(lacelab(&["run", "--config", &cfg], None).status.code(), Some(3));
    let o = lacelab(&["verify-lace", "--graph", "K4", "--order", "1"], Some(("LACELAB_BUDGET", "1000")));
    assert_eq!(o.status.code(), Some(3));
    let o = lacelab(&["verify-lace", "--graph", "K4", "--order", "1", "--mixed", "0"], Some(("LACELAB_BUDGET", "1e9")));
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn failed_check_exits_1() {
    // Seed 3 draws k = 2 GHS–BK instances on which the two counts differ.
    let o = lacelab(&["verify-switching", "--seed", "3"], None);
    assert_eq!(o.status.code(), Some(1));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed: Vec<&str> =
        rep["checks"].as_array().unwrap().iter().filter(|c| c["pass"] == false).map(|c| c["item"].as_str().unwrap()).collect();
    assert_eq!(failed, ["ghs_k2#0", "ghs_k2#4", "ghs_k2#19"]);
    let o = lacelab(&["verify-switching", "--seed", "3", "--ghs-k2", "0"], None);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn lace_pipeline_passes_on_the_catalog() {
    let o = lacelab(&["verify-lace", "--order", "0", "--order", "1", "--order", "2", "--mixed", "0"], None);
    assert_eq!(o.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for c in rep["checks"].as_array().unwrap().iter().filter(|c| c["metric"] == "residual_max") {
        assert!(c["value"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn catalog_listing() {
    let o = lacelab(&["catalog", "--json"], None);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.len(), 8);
    let find = |n: &str| rows.iter().find(|r| r["name"] == n).unwrap().clone();
    assert_eq!(find("triangle")["bonds"], 3);
    assert_eq!(find("triangle")["single_sweep_states"], 27.0);
    assert_eq!(find("K4")["bonds"], 6);
    assert_eq!(find("K4")["pair_sweep_states"], 531441.0);
}

#[test]
fn greens_csv_output() {
    let o = lacelab(&["greens", "--d", "1", "--side", "64", "--r", "0.5"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,S_r(x),predicted,ratio"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!((first[1].parse::<f64>().unwrap() - 1.154_700_538_379_25).abs() < 1e-12);
    assert_eq!(lacelab(&["greens", "--d", "2", "--side", "16", "--r", "1"], None).status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let suites = r#"
        {"name": "verify-switching", "seed": 7, "instances": 10, "ghs_k1": 5, "ghs_k2": 5},
        {"name": "verify-lace", "graphs": ["triangle", "square"], "p": [0.3], "orders": [0, 1], "mixed": 2},
        {"name": "verify-bounds", "graphs": ["triangle"], "p": [0.2]},
        {"name": "greens", "d": 3, "side": 12, "window": [1, 3], "tolerance": 10},
        {"name": "check-conv", "conv": [{"d": 1, "a": 2, "b": 2, "boxes": [16, 32]}], "star": [], "seed": 5}
    "#;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let cfg = write_config(dir.path(), &config_with(&out, suites));
        let o = lacelab(&["run", "--config", &cfg], None);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        outputs.push(files.iter().map(|f| (f.file_name().unwrap().to_owned(), std::fs::read(f).unwrap())).collect::<Vec<_>>());
    }
    assert_eq!(outputs[0].len(), 6);
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn csv_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("csv");
    let body = format!(
        r#"{{"output": {{"path": {:?}, "format": "csv"}}, "suites": [{{"name": "verify-through", "graphs": ["triangle"], "p": [0.4]}}]}}"#,
        out.to_string_lossy()
    );
    let cfg = write_config(dir.path(), &body);
    assert_eq!(lacelab(&["run", "--config", &cfg], None).status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("00-verify-through.csv")).unwrap();
    assert!(text.starts_with("item,metric,value,relation,limit,pass,note"));
    assert_eq!(text.lines().count(), 3);
}
