use std::process::{Command, Output};

use serde_json::Value;

fn dynint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynint"))
        .args(args)
        .env_remove("DYNINT_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is a JSON error")
}

#[test]
fn twist_certifies() {
    let out = dynint(&["certify", "--map", "twist", "--samples", "500", "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["verdict"], "PASS");
    assert_eq!(r["config"]["samples"], 500);
    assert!(r["caveat"].as_str().unwrap().contains("numerical evidence, not proof"));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let at = |key: &str| text.find(&format!("\n  \"{key}\":")).unwrap();
    let order = ["version", "config", "conditions", "verdict", "wall_time_ms"].map(at);
    assert!(order.windows(2).all(|w| w[0] < w[1]));
    assert!(r["wall_time_ms"].is_null());
}

#[test]
fn lyness_plane_has_no_bracket_section() {
    let out = dynint(&["certify", "--map", "lyness", "--param", "n=2", "--param", "a=1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let names: Vec<&str> = r["conditions"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["gradient_independence", "invariance[F1]"]);
    assert_eq!(r["structure"]["m"], 0);
}

#[test]
fn cat_map_exponent() {
    let out = dynint(&["lyapunov", "--map", "cat_map", "--x0", "0.3,0.7", "-N", "100000"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let l1 = r["exponents"][0].as_f64().unwrap();
    assert!((l1 - 0.9624).abs() < 1e-3);
    assert_eq!(r["structure"], "no structure certified");
}

#[test]
fn corrupted_structure_exits_one() {
    let out = dynint(&["certify", "--map", "twist", "--param", "corrupt=true", "--samples", "50"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["verdict"], "FAIL");
}

#[test]
fn configuration_errors_exit_two() {
    for args in [
        &["certify", "--map", "warned_circle", "--param", "k=1", "--param", "eps=1.5"][..],
        &["certify", "--map", "henon"],
        &["certify", "--map", "twist", "--param", "m=3"],
        &["certify", "--map", "cat_map"],
        &["certify"],
        &["lyapunov", "--map", "cat_map", "-N", "10"],
        &["frobnicate"],
    ] {
        let out = dynint(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
        assert_eq!(stderr_json(&out)["error"]["exit_code"], 2, "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_three() {
    let out = dynint(&["orbit", "--map", "lyness", "--x0", "-1,2", "-N", "5"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["kind"], "runtime");
}

#[test]
fn bad_thread_count_is_a_configuration_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_dynint"))
        .args(["list"])
        .env("DYNINT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let out = dynint(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("lift-certify"));
}

#[test]
fn csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("orbit.csv");
    let out = dynint(&[
        "orbit", "--map", "lyness", "--x0", "1,2", "-N", "5", "--format", "csv", "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,x1,x2");
    assert_eq!(lines[2], "1,2.0000000000000000e0,3.0000000000000000e0");
    assert_eq!(lines.len(), 7);
}

#[test]
fn config_file_sits_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"map": "lyness", "params": {"n": 3, "a": 2}, "samples": 40, "seed": 5, "flow_times": []}"#,
    )
    .unwrap();
    let out = dynint(&["certify", "--config", path.to_str().unwrap(), "--seed", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["config"]["seed"], 6);
    assert_eq!(r["config"]["samples"], 40);
    assert_eq!(r["params"]["n"], 3);
    assert_eq!(r["params"]["a"], 2.0);
}

#[test]
fn structure_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"dim": 1, "fields": [["x1 + 3"]]}"#).unwrap();
    let out = dynint(&["certify", "--map", "affine1d", "--structure-file", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["structure_status"], "from_file");
    assert_eq!(r["structure"]["fields"][0], "(x1 + 3)");

    // the symmetry of 2x + 3 is x + 3, not x - 3
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"dim": 1, "fields": [["x1 - 3"]]}"#).unwrap();
    let out = dynint(&["certify", "--map", "affine1d", "--structure-file", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let twisted = dir.path().join("twist.json");
    std::fs::write(
        &twisted,
        r#"{"dim": 2, "fields": [["1", "0"]], "integrals": ["p1^2 + 1"], "phase_space": true}"#,
    )
    .unwrap();
    let out = dynint(&[
        "certify", "--map", "twist", "--param", "n=1", "--param", "H=p1^3/3", "--structure-file",
        twisted.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));

    let syntax = dir.path().join("syntax.json");
    std::fs::write(&syntax, r#"{"dim": 1, "fields": [["x1 +"]]}"#).unwrap();
    let out = dynint(&["certify", "--map", "affine1d", "--structure-file", syntax.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn list_marks_lyness_unverified() {
    let out = dynint(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let maps = r["maps"].as_array().unwrap();
    assert_eq!(maps.len(), 7);
    let ly = maps.iter().find(|m| m["name"] == "lyness").unwrap();
    assert_eq!(ly["structure_status"], "unverified");
    let csv = dynint(&["list", "--format", "csv"]);
    assert!(String::from_utf8_lossy(&csv.stdout).starts_with("name,description,structure,structure_status,params\n"));
}

#[test]
fn timing_is_opt_in() {
    let out = dynint(&["orbit", "--map", "cat_map", "--x0", "0.1,0.2", "-N", "3", "--timing"]);
    assert!(json(&out)["wall_time_ms"].is_u64());
}

#[test]
fn periodic_and_translation_reports() {
    let out = dynint(&["periodic", "--map", "cat_map", "--k", "2"]);
    let r = json(&out);
    assert_eq!(r["points"].as_array().unwrap().len(), 5);
    let out = dynint(&["translation", "--map", "affine1d", "--x0", "1"]);
    let t0 = json(&out)["translation"]["t0"][0].as_f64().unwrap();
    assert!((t0 - std::f64::consts::LN_2).abs() < 1e-8);
    let out = dynint(&["rotation", "--map", "rigid_rotation", "--param", "a=pi/2", "--x0", "0.3"]);
    let rho = json(&out)["rotation"]["value"].as_f64().unwrap();
    assert!((rho - 0.25).abs() < 1e-12);
}
