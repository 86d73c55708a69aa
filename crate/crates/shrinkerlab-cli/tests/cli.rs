use serde_json::Value;
use shrinkerlab::persist::{read_grid, read_trace};
use shrinkerlab::surface::ProfileGeometry;
use std::path::Path;
use std::process::{Command, Output};

fn shrinkerlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shrinkerlab"))
        .current_dir(dir)
        .env_remove("SHRINKERLAB_OUT_DIR")
        .env_remove("SHRINKERLAB_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn build_sphere_writes_a_loadable_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = shrinkerlab(dir.path(), &["shrinker", "build", "--model", "sphere", "--nodes", "512", "--out", "s.json", "--report", "r.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let raw: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(raw["schema_version"], 1);
    let p = ProfileGeometry::load(&dir.path().join("s.json")).unwrap();
    assert_eq!(p.len(), 512);
    assert_eq!(p.metadata["model"], "sphere");
    let r = report(&dir.path().join("r.json"));
    for key in ["schema_version", "command", "config_echo", "results", "provenance", "pass_flags"] {
        assert!(r.get(key).is_some(), "report lacks {key}");
    }
    assert_eq!(r["pass_flags"]["certified"], true);
    assert_eq!(r["config_echo"]["surface"]["flip"], false);
}

#[test]
fn unknown_config_key_is_rejected_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"surface": {"model": "sphere", "nodez": 128}}"#).unwrap();
    let out = shrinkerlab(dir.path(), &["shrinker", "build", "--config", "c.json", "--out", "s.json", "--report", "r.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nodez"));
    assert!(!dir.path().join("s.json").exists() && !dir.path().join("r.json").exists());
}

#[test]
fn future_profile_schema_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(shrinkerlab(dir.path(), &["shrinker", "build", "--nodes", "128", "--out", "s.json"]).status.code(), Some(0));
    let mut raw: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    raw["schema_version"] = Value::from(99);
    std::fs::write(dir.path().join("s.json"), raw.to_string()).unwrap();
    let out = shrinkerlab(dir.path(), &["functional", "F", "--profile", "s.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema_version"));
}

#[test]
fn flags_override_config_and_defaults_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"surface": {"model": "circle", "nodes": 200}, "init": "constant"}"#).unwrap();
    let args = ["flow", "run", "--config", "c.json", "--nodes", "128", "--tau-end", "0.05", "--report", "r.json"];
    assert_eq!(shrinkerlab(dir.path(), &args).status.code(), Some(0));
    let echo = report(&dir.path().join("r.json"))["config_echo"].clone();
    assert_eq!(echo["surface"]["model"], "circle");
    assert_eq!(echo["surface"]["nodes"], 128);
    assert_eq!(echo["init"], "constant");
    for key in ["amplitude", "seed", "tau_start", "psi0", "dt", "scheme", "every", "boundary", "trace_out"] {
        assert!(!echo[key].is_null(), "{key} was defaulted silently");
    }
    let trace = read_trace(&dir.path().join("trace.csv"), &dir.path().join("trace.json")).unwrap();
    assert!(trace.snapshots.iter().all(|s| s.u.len() == 128));
}

#[test]
fn identical_inputs_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let args = ["flow", "run", "--init", "smooth", "--seed", "7", "--nodes", "128", "--tau-end", "0.05", "--report", name];
        assert_eq!(shrinkerlab(dir.path(), &args).status.code(), Some(0));
        std::fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_shrinkerlab"))
        .current_dir(dir.path())
        .env("SHRINKERLAB_OUT_DIR", "results")
        .env("SHRINKERLAB_WORKERS", "2")
        .args(["shrinker", "build", "--nodes", "128", "--report", "r.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("results/profile.json").exists());
    assert!(dir.path().join("results/r.json").exists());
}

#[test]
fn barrier_report_matches_its_residual_grid() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["barrier", "verify", "--kind", "global-plus", "--nodes", "128", "--params", r#"{"m": 4, "tau0": -3}"#, "--report", "r.json"];
    let out = shrinkerlab(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&dir.path().join("r.json"));
    let (rows, _, values) = read_grid(&dir.path().join("barrier_residual.csv")).unwrap();
    let barrier = &r["results"]["barrier"];
    assert_eq!(rows.len(), barrier["rows"].as_array().unwrap().len());
    let min = values.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(min, barrier["min_residual"].as_f64().unwrap());
    assert_eq!(r["pass_flags"]["sign_condition"], true);
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| shrinkerlab(dir.path(), args).status.code();
    assert_eq!(code(&["shrinker", "build", "--model", "dodecahedron"]), Some(2));
    assert_eq!(code(&["shrinker", "build", "--nodes", "8"]), Some(2));
    assert_eq!(code(&["barrier", "verify", "--kind", "global-plus", "--params", r#"{"mm": 1}"#]), Some(2));
    assert_eq!(code(&["barrier", "verify", "--kind", "wedge"]), Some(2));
    assert_eq!(code(&["functional", "density", "--r", "1", "--extinction", "-2"]), Some(2));
    assert_eq!(code(&["selftest", "--criterion", "13"]), Some(2));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none(), "rejected inputs left files behind");
}
