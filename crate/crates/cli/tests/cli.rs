use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aeronet"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// A short XOR config in `dir`, with `extra` appended verbatim.
fn write_config(dir: &Path, network_extra: &str, extra: &str) -> PathBuf {
    let data = configs_dir().join("xor.csv").canonicalize().unwrap();
    let text = format!(
        r#"
output_dir = "{out}"

[network]
layer_sizes = [2, 2, 1]
activations = ["sigmoid", "sigmoid"]
epochs = 20
seed = 3
{network_extra}

[dataset]
path = "{data}"
{extra}
"#,
        out = dir.join("out").display(),
        data = data.display(),
    );
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr not JSON: {}", String::from_utf8_lossy(&out.stderr)))
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn validate_accepts_shipped_config() {
    let out = run(&["validate"], &configs_dir().join("xor.toml"));
    let v = stdout_json(&out);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["devices"], 8);
}

#[test]
fn bad_beta1_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "optimizer = { kind = \"adam\", learning_rate = 0.01, beta1 = 1.0 }", "");
    let out = run(&["validate"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "config");
    assert!(err["details"].as_array().unwrap().iter().any(|d| d.as_str().unwrap().contains("beta1 must be < 1")), "{err}");
}

#[test]
fn single_layer_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "", "");
    let text = fs::read_to_string(&cfg).unwrap().replace("[2, 2, 1]", "[2]").replace("[\"sigmoid\", \"sigmoid\"]", "[]");
    fs::write(&cfg, text).unwrap();
    let out = run(&["validate"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out).to_string().contains("at least 2 layers"));
}

#[test]
fn unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "", "bogus = 1");
    assert_eq!(run(&["validate"], &cfg).status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "", "");
    let text = fs::read_to_string(&cfg).unwrap().replace("xor.csv", "nope.csv");
    fs::write(&cfg, text).unwrap();
    assert_eq!(run(&["simulate"], &cfg).status.code(), Some(2));
}

#[test]
fn dataset_arity_error_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "a,b,y\n0,0,0\n1,1\n").unwrap();
    let cfg = write_config(dir.path(), "", "");
    let text = fs::read_to_string(&cfg).unwrap().replace(&configs_dir().join("xor.csv").canonicalize().unwrap().display().to_string(), &data.display().to_string());
    fs::write(&cfg, text).unwrap();
    let out = run(&["simulate"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "dataset");
}

#[test]
fn out_of_range_links_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "", "[link]\nmode = \"wireless\"\nrange_m = 50.0\n");
    let out = run(&["validate"], &cfg);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "connectivity");
    assert!(!err["details"].as_array().unwrap().is_empty());
    assert_eq!(run(&["simulate"], &cfg).status.code(), Some(3));
}

#[test]
fn empty_token_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "", "");
    let text = fs::read_to_string(&cfg).unwrap().replace("output_dir", "auth_token = \"\"\noutput_dir");
    fs::write(&cfg, text).unwrap();
    assert_eq!(run(&["simulate"], &cfg).status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_and_writes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "", "");
    let first = stdout_json(&run(&["simulate"], &cfg));
    let out = dir.path().join("out");
    let report = fs::read(out.join("report.json")).unwrap();
    for name in ["trace.jsonl", "formation.jsonl", "latency.csv", "effective_config.toml"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let second = stdout_json(&run(&["simulate"], &cfg));
    assert_eq!(first["trace_hash"], second["trace_hash"]);
    assert_eq!(report, fs::read(out.join("report.json")).unwrap());
    let latency = fs::read_to_string(out.join("latency.csv")).unwrap();
    assert_eq!(latency.lines().next(), Some("epoch,makespan_s,mean_loss"));
    assert_eq!(latency.lines().count(), 21);
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "", "");
    let base = stdout_json(&run(&["simulate"], &cfg));
    let seeded = stdout_json(&run(&["simulate", "--seed", "9"], &cfg));
    assert_ne!(base["trace_hash"], seeded["trace_hash"]);
    let d3 = stdout_json(&run(&["simulate", "--design", "3"], &cfg));
    assert_eq!(base["final_loss"], d3["final_loss"]);
    let wireless = stdout_json(&run(&["simulate", "--link", "wireless", "--sparse", "on"], &cfg));
    assert_eq!(base["final_loss"], wireless["final_loss"]);
    assert_eq!(run(&["simulate", "--design", "4"], &cfg).status.code(), Some(2));
}

#[test]
fn effective_config_reproduces_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "", "");
    let first = stdout_json(&run(&["simulate", "--design", "2", "--link", "wireless"], &cfg));
    let echoed = dir.path().join("echo.toml");
    fs::copy(dir.path().join("out/effective_config.toml"), &echoed).unwrap();
    let again = stdout_json(&run(&["simulate", "--out", dir.path().join("again").to_str().unwrap()], &echoed));
    assert_eq!(first["trace_hash"], again["trace_hash"]);
}

#[test]
fn formation_matches_navigation_instructions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "", "");
    stdout_json(&run(&["simulate"], &cfg));
    let out = dir.path().join("out");
    let formation: Vec<Value> =
        fs::read_to_string(out.join("formation.jsonl")).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let trace = fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let mut navigated = 0;
    for line in trace.lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        if rec["variant"] != "NavigationInstruction" {
            continue;
        }
        let payload = &rec["payload"];
        let entry = formation.iter().find(|f| f["device"] == payload["device_id"]).unwrap();
        for axis in ["x", "y", "z"] {
            assert_eq!(entry[axis], payload["position"][axis]);
        }
        navigated += 1;
    }
    // every device but the master is told where to fly
    assert_eq!(navigated, formation.len() - 1);
    let planned = stdout_json(&run(&["plan"], &cfg));
    assert_eq!(planned["devices"], formation.len());
    assert_eq!(fs::read_to_string(out.join("formation.jsonl")).unwrap().lines().count(), formation.len());
}

#[test]
fn json_config_matches_toml() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "", "");
    let toml_run = stdout_json(&run(&["simulate"], &cfg));
    let data = configs_dir().join("xor.csv").canonicalize().unwrap();
    let json = serde_json::json!({
        "output_dir": dir.path().join("json-out"),
        "network": { "layer_sizes": [2, 2, 1], "activations": ["sigmoid", "sigmoid"], "epochs": 20, "seed": 3 },
        "dataset": { "path": data },
    });
    let path = dir.path().join("exp.json");
    fs::write(&path, json.to_string()).unwrap();
    let json_run = stdout_json(&run(&["simulate"], &path));
    assert_eq!(toml_run["trace_hash"], json_run["trace_hash"]);
}

#[test]
fn report_summarizes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("xor.toml");
    let out = dir.path().join("out");
    let text = fs::read_to_string(&cfg).unwrap().replace("epochs = 2000", "epochs = 10");
    let short = configs_dir().canonicalize().unwrap().join("xor.csv");
    let local = dir.path().join("xor.toml");
    fs::write(&local, text.replace("\"xor.csv\"", &format!("{:?}", short.display().to_string()))).unwrap();
    let sim = stdout_json(&run(&["simulate", "--out", out.to_str().unwrap()], &local));
    let rep = stdout_json(&run(&["report", "--out", out.to_str().unwrap()], &local));
    assert_eq!(rep["messages"], sim["messages"]);
    assert_eq!(rep["epochs"], 10);
    assert!(rep["airborne_faster"].is_boolean());
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(summary["latency"], report["latency"]);

    fs::write(dir.path().join("broken.jsonl"), "not json\n").unwrap();
    let bad = run(&["report", "--out", out.to_str().unwrap(), "--trace", dir.path().join("broken.jsonl").to_str().unwrap()], &local);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(stderr_json(&bad)["error"], "trace");
}
