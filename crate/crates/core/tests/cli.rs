mod common;

use std::process::Command;

use pburg::cli::run;
use serde_json::Value;

fn call(args: &[&str]) -> (i32, Value) {
    let out = run(std::iter::once("pburg").chain(args.iter().copied()));
    assert!(out.code == 1 || !out.stdout.is_empty(), "{}", out.stderr);
    let doc = if out.stdout.is_empty() { Value::Null } else { serde_json::from_str(&out.stdout).unwrap() };
    (out.code, doc)
}

#[test]
fn documented_examples() {
    let (code, doc) = call(&["classify", "--family", "P", "--f", "t*x+1"]);
    assert_eq!((code, doc["result"]["subclass"].as_str()), (0, Some("P2")));

    let t = r#"{"group":"usual-pot","alpha":2,"beta":0.1,"kappa":1.5,"mu1":0.3,"mu0":-0.2,"nu":0.4}"#;
    let (code, doc) = call(&["verify", "--transform", t, "--f", "exp(x) + t", "--family", "P"]);
    assert_eq!(code, 0);
    assert_eq!(doc["result"]["verdict"], "pass");
    assert!(doc["report"]["max_residual"].as_f64().unwrap() < 1e-6);

    let (code, doc) = call(&["equivalent", "--family", "P", "--f1", "-1", "--f2", "5"]);
    assert_eq!(code, 0);
    assert_eq!(doc["result"]["verdict"], "equivalent");
    assert!(doc["result"]["witness"].is_object());
}

#[test]
fn exit_codes() {
    let t = r#"{"group":"usual-pot","alpha":2,"beta":0.1,"kappa":1.5,"mu1":0.3,"mu0":-0.2,"nu":0.4}"#;
    let (code, doc) = call(&["verify", "--transform", t, "--f", "t*x + 1", "--f-target", "t*x + 1", "--family", "P"]);
    assert_eq!((code, doc["report"]["verdict"].as_str()), (2, Some("fail")));
    let (code, _) = call(&["equivalent", "--family", "P", "--f1", "t*x + 1", "--f2", "x + 2", "--budget", "2"]);
    assert_eq!(code, 3);
    let (code, doc) = call(&["equivalent", "--family", "P", "--f1", "exp(x)", "--f2", "-1"]);
    assert_eq!((code, doc["result"]["verdict"].as_str()), (0, Some("inequivalent")));
    let (code, _) = call(&["verify", "--transform", t, "--f", "t*x + 1", "--family", "C"]);
    assert_eq!(code, 1);
    let (code, _) = call(&["linearize", "--f", "x"]);
    assert_eq!(code, 1);
    let (code, _) = call(&["potentialize", "--family", "L", "--f", "x^3"]);
    assert_eq!(code, 1);
}

#[test]
fn witnesses_reverify_through_verify() {
    for (f1, f2) in [("-1", "5"), ("2", "-0.5"), ("x^3", "8*x^3"), ("exp(x)", "4*exp(2*x + 1)")] {
        let (code, doc) = call(&["equivalent", "--family", "P", "--f1", f1, "--f2", f2, "--n", "60"]);
        assert_eq!((code, doc["result"]["verdict"].as_str()), (0, Some("equivalent")), "{f1} {f2}: {doc}");
        let witness = serde_json::to_string(&doc["result"]["witness"]).unwrap();
        let (code, doc) = call(&["verify", "--transform", &witness, "--f", f1, "--f-target", f2, "--family", "P"]);
        assert_eq!(code, 0, "{f1} {f2}: {doc}");
    }
}

#[test]
fn build_then_apply_the_same_document() {
    let params = r#"{"alpha":1,"beta":0.2,"gamma":0.3,"delta":1,"kappa":1.5,"mu1":0.2,"mu0":-0.1,"k":2,"F2":{"kind":"quadratic"}}"#;
    let (code, doc) = call(&["build", "--group", "P3", "--params", params, "--f", "-1"]);
    assert_eq!(code, 0, "{doc}");
    let transform = serde_json::to_string(&doc["result"]["transform"]["params"]).unwrap();
    let (code, doc) = call(&["apply", "--transform", &transform, "--f", "-1", "--n", "20"]);
    assert_eq!(code, 0, "{doc}");
    assert!(doc["result"]["samples"].as_array().unwrap().len() == 5);
}

#[test]
fn output_file_and_binary() {
    let dir = std::env::temp_dir().join(format!("pburg-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("out.json");
    let out = Command::new(env!("CARGO_BIN_EXE_pburg"))
        .args(["classify", "--family", "C", "--f", "x^2 + 1", "--output"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["result"]["subclass"], "C2");
    let out = Command::new(env!("CARGO_BIN_EXE_pburg")).args(["classify", "--family", "P"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn suite_is_deterministic() {
    let a = common::run_suite();
    let b = common::run_suite();
    assert_eq!(a, b);
    assert!(a.iter().all(|(code, _)| *code != 1), "{a:?}");
}
