mod common;

use std::process::{Command, Output};

use serde_json::Value;

use common::data;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chorstrand"))
        .args(args)
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

#[test]
fn check_reports_assumptions() {
    let out = run(&["check", &data("buyer_seller.chor")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).lines().next(),
        Some("OK: 3 assumptions hold")
    );
}

#[test]
fn check_flags_violations() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("dup.chor");
    std::fs::write(&f, "A -> B : x<>. B -> A : x<>. 0").unwrap();
    assert_eq!(code(&["check", f.to_str().unwrap()]), 1);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["lts", "nonexistent.chor"]), 66);
    assert_eq!(code(&["frobnicate"]), 64);
    assert_eq!(
        code(&[
            "enumerate",
            "--proto",
            &data("buyer_seller.proto"),
            "--max-instances",
            "0"
        ]),
        64
    );
    assert_eq!(
        code(&["enumerate", "--proto", &data("buyer_seller.amap")]),
        65
    );
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.chor");
    std::fs::write(&f, "A -> : x<>. 0").unwrap();
    assert_eq!(code(&["lts", f.to_str().unwrap()]), 65);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn abs_writes_one_file_per_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let (j, d) = (dir.path().join("json"), dir.path().join("dot"));
    let out = run(&[
        "abs",
        &data("buyer_seller.chor"),
        "--json",
        j.to_str().unwrap(),
        "--dot",
        d.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_dir(&j).unwrap().count(), 3);
    assert_eq!(std::fs::read_dir(&d).unwrap().count(), 3);
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(j.join("bundle_1.json")).unwrap()).unwrap();
    assert_eq!(v["schema"], 1);
}

#[test]
fn json_outputs_carry_schema() {
    for args in [vec!["lts", "--json"], vec!["check", "--json"]] {
        let chor = data("buyer_seller.chor");
        let out = run(&[&args[..], &[chor.as_str()]].concat());
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["schema"], 1, "{args:?}");
    }
    let out = run(&[
        "deliver-once",
        "--proto",
        &data("replay_demo.proto"),
        "--max-instances",
        "2",
        "--adv-steps",
        "1",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], 1);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = [
        "faithful",
        "--proto",
        &data("buyer_seller.proto"),
        "--chor",
        &data("buyer_seller.chor"),
        "--amap",
        &data("buyer_seller.amap"),
        "--adv-steps",
        "2",
    ]
    .map(String::from);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let a = run(&args);
    let b = run(&[&args[..], &["--jobs", "3"]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let e1 = run(&[
        "enumerate",
        "--proto",
        &data("buyer_seller.proto"),
        "--adv-steps",
        "2",
    ]);
    let e2 = run(&[
        "enumerate",
        "--proto",
        &data("buyer_seller.proto"),
        "--adv-steps",
        "2",
    ]);
    assert_eq!(e1.stdout, e2.stdout);
}

#[test]
fn faithful_without_deliver_once_still_runs() {
    let out = run(&[
        "faithful",
        "--proto",
        &data("buyer_seller.proto"),
        "--chor",
        &data("buyer_seller.chor"),
        "--amap",
        &data("buyer_seller.amap"),
        "--no-deliver-once",
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["bounds"]["require_deliver_once"], false);
    assert_eq!(out.status.code(), Some(0));
}
