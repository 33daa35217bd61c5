use std::fs;
use std::path::PathBuf;

use mni_cli::{run_command, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_OK};
use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_command(std::iter::once("mni").chain(args.iter().copied()), &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

const L1_DESK: &str = r#"{"space": "l1", "rows": [[[0, 1.0], [1, 0.5]]], "y": [1.0]}"#;

const LP_HARD: &str = r#"{"space": "lp", "p": 4.0,
    "rows": [[[0, 1.0], [1, 0.3], [2, -0.7]], [[1, 1.0], [3, 2.0]], [[0, -0.4], [2, 1.1], [3, 0.2]]],
    "y": [1.0, -2.0, 0.5]}"#;

#[test]
fn mni_solve_l1_desk_instance() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "l1.json", L1_DESK);
    let r = run(&["mni", "solve", f.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let v = json(&r.out);
    assert!((v["objective"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["converged"], Value::Bool(true));
    assert_eq!(v["support"], json("[0]"));
}

#[test]
fn oracles_agree_on_desk_instance() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "l1.json", L1_DESK);
    let bp = run(&["oracle", "bp", f.to_str().unwrap()]);
    assert_eq!(bp.code, EXIT_OK);
    assert_eq!(json(&bp.out)["objective"].as_f64().unwrap(), 1.0);
    let dual = run(&["oracle", "dual", f.to_str().unwrap()]);
    assert_eq!(dual.code, EXIT_OK);
    let v = json(&dual.out);
    assert!((v["infimum"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["solution"], json("[[0, 1.0]]"));
}

#[test]
fn reg_solve_lasso_instance() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "lasso.json",
        r#"{"space": "l1", "rows": [[[0, 1.0]]], "y": [2.0], "loss": {"kind": "square"}, "lambda": 1.0}"#,
    );
    let r = run(&["reg", "solve", f.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let v = json(&r.out);
    let x = v["solution"][0][1].as_f64().unwrap();
    assert!((x - 1.5).abs() < 1e-8);

    let mni = write(&dir, "mni.json", L1_DESK);
    assert_eq!(run(&["reg", "solve", mni.to_str().unwrap()]).code, EXIT_INPUT);
}

#[test]
fn out_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "l1.json", L1_DESK);
    let target = dir.path().join("report.json");
    let r = run(&["mni", "solve", f.to_str().unwrap(), "--out", target.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.is_empty());
    assert_eq!(
        json(&fs::read_to_string(target).unwrap())["objective"]
            .as_f64()
            .unwrap(),
        1.0
    );
}

#[test]
fn non_convergence_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "lp.json", LP_HARD);
    let r = run(&["mni", "solve", f.to_str().unwrap(), "--max-iter", "1"]);
    assert_eq!(r.code, EXIT_NONCONVERGED, "{}{}", r.out, r.err);
    let r = run(&["mni", "solve", f.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
}

#[test]
fn input_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.json");
    let r = run(&["mni", "solve", missing.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_INPUT);

    let bad_len = write(
        &dir,
        "len.json",
        r#"{"space": "l1", "rows": [[[0, 1.0]]], "y": [1.0, 2.0]}"#,
    );
    let r = run(&["mni", "solve", bad_len.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.err.contains("dimension"), "{}", r.err);

    let bad_p = write(
        &dir,
        "p.json",
        r#"{"space": "lp", "p": 1.0, "rows": [[[0, 1.0]]], "y": [1.0]}"#,
    );
    assert_eq!(run(&["mni", "solve", bad_p.to_str().unwrap()]).code, EXIT_INPUT);

    let schema = write(
        &dir,
        "schema.json",
        r#"{"space": "l1", "rows": [[[0, true]]], "y": [1.0]}"#,
    );
    let r = run(&["mni", "solve", schema.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.err.contains("rows[0]"), "{}", r.err);

    let f = write(&dir, "l1.json", L1_DESK);
    assert_eq!(
        run(&["mni", "solve", f.to_str().unwrap(), "--tol", "-1"]).code,
        EXIT_INPUT
    );
    assert_eq!(run(&["mni", "frobnicate"]).code, EXIT_INPUT);
}

#[test]
fn verify_suite_is_deterministic() {
    let a = run(&["verify", "suite", "--seed", "7", "--count", "6"]);
    let b = run(&["verify", "suite", "--seed", "7", "--count", "6"]);
    assert_eq!(a.code, EXIT_OK, "{}", a.out);
    assert_eq!(a.out, b.out);
    let last = a.out.lines().last().unwrap();
    assert_eq!(json(last)["summary"]["failed"], json("0"));
    let c = run(&["verify", "suite", "--seed", "8", "--count", "6"]);
    assert_ne!(a.out, c.out);
}
