//! End-to-end checks of the command-line binary against the checked-in
//! example models.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name);
    path.display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdpsynth")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn check_single_is_sat_with_verified_witness() {
    let out = run(&["check", &model("beetle-single.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["verdict"], "sat");
    let value = r["value"].as_f64().unwrap();
    assert!((value - 1.0).abs() <= 1e-3, "witness value {value}");
    assert!(r["witness"].as_object().unwrap().len() == 4);
    assert_eq!(r["config"]["threshold"], 1.0);
}

#[test]
fn check_respects_threshold_override() {
    let out = run(&["check", &model("beetle-single.json"), "--threshold", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["verdict"], "unsat");
}

#[test]
fn robust_multi_is_sat() {
    let out = run(&["robust", &model("beetle-multi.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["verdict"], "sat");
    // The witness carries only the controllable parameters.
    let w = r["witness"].as_object().unwrap();
    assert_eq!(w.len(), 4);
    assert!(w.keys().all(|k| k.starts_with("d_")));
    assert!((r["value"].as_f64().unwrap() - 1.0).abs() <= 1e-3);
}

#[test]
fn value_reports_the_fixture_assignments() {
    let out = run(&[
        "value",
        &model("beetle-single.json"),
        "--assign",
        "d_r=1,d_g=3,d_b=3,d_y=0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!((report(&out)["value"].as_f64().unwrap() - 1.0).abs() <= 1e-3);

    let out = run(&[
        "value",
        &model("beetle-multi.json"),
        "--assign",
        "d_r=1,d_g=3,d_b=3,d_y=0,s_x=2,s_y=0",
    ]);
    assert_eq!(out.status.code(), Some(1), "fragile fixture fails from the south-east start");
}

#[test]
fn dt_sweep_reports_sizes_and_tree() {
    let out = run(&["dt", &model("beetle-multi.json"), "--sweep", "1,3", "--robust"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["sweep"][0]["nodes"], 1);
    assert_eq!(r["sweep"][0]["verdict"], "unsat");
    assert_eq!(r["sweep"][1]["nodes"], 3);
    assert_eq!(r["sweep"][1]["verdict"], "sat");
    assert!(r["tree_text"].as_str().unwrap().contains(">="));
    assert_eq!(r["tree"]["nodes"].as_array().unwrap().len(), 3);
}

#[test]
fn oracle_agrees_with_engine() {
    let path = model("beetle-multi.json");
    for (cmd, flag) in [("check", None), ("robust", Some("--robust"))] {
        let mut oracle_args = vec!["oracle", &path];
        if let Some(f) = flag {
            oracle_args.push(f);
        }
        let engine = run(&[cmd, &path, "--precision", "1e-4"]);
        let oracle = run(&oracle_args);
        assert_eq!(engine.status.code(), oracle.status.code(), "{cmd} disagrees with oracle");
    }
}

#[test]
fn reports_are_stable_modulo_wall_time() {
    for args in [
        vec!["check".into(), model("beetle-single.json")],
        vec!["robust".into(), model("beetle-multi.json")],
        vec!["dt".into(), model("beetle-multi.json"), "--sweep".into(), "1,3".into(), "--robust".into()],
    ] {
        let args: Vec<&str> = args.iter().map(|s| s.as_ref()).collect();
        let mut a = report(&run(&args));
        let mut b = report(&run(&args));
        a["wall_time_secs"] = 0.into();
        b["wall_time_secs"] = 0.into();
        assert_eq!(a, b, "{args:?} not deterministic");
    }
}

#[test]
fn errors_exit_with_code_two() {
    let out = run(&["check", "/no/such/file.json"]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["verdict"], "error");
    assert!(r["error"].as_str().is_some());
    assert!(!out.stderr.is_empty());
}

#[test]
fn bad_assignment_is_an_error() {
    let out = run(&["value", &model("beetle-single.json"), "--assign", "d_r=1"]);
    assert_eq!(out.status.code(), Some(2), "partial assignment must be rejected");
}
