use std::process::Command;

use serde_json::Value;

fn run(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_glame")).args(args).output().expect("spawn glame");
    let v: Value = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    (out.status.code().unwrap_or(-1), v)
}

fn re_im(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

fn norm(v: &Value) -> f64 {
    let (a, b) = re_im(v);
    a.hypot(b)
}

const TAU0: &str = "0.5,0.8660254037844386";

#[test]
fn wp_vanishes_at_the_third_point() {
    let (code, v) = run(&["wp", "--tau", TAU0, "--z", "0.5,0.28867513459481287"]);
    assert_eq!(code, 0);
    assert_eq!(v["command"], "wp");
    assert!(norm(&v["outputs"]["wp"]) < 1e-10, "{v}");
    assert!(norm(&v["diagnostics"]["g2"]) < 1e-10);
    assert!(v["timing"]["seconds"].is_number());
}

#[test]
fn usage_errors_exit_with_two() {
    let (code, v) = run(&["wp", "--tau", "x", "--z", "1"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "Usage");
    let (code, v) = run(&["monodromy", "heun", "--n", "1,2", "--B", "0", "--tau", "0,1"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "Usage");
}

#[test]
fn library_errors_exit_with_one() {
    let (code, v) = run(&["wp", "--tau", "0,-1", "--z", "0.3"]);
    assert_eq!(code, 1);
    assert!(v["error"]["kind"].is_string() && v["error"]["message"].is_string(), "{v}");
}

#[test]
fn lame_monodromy_record() {
    let (code, v) = run(&["monodromy", "heun", "--n", "1", "--B", "0", "--tau", TAU0]);
    assert_eq!(code, 0, "{v}");
    for t in v["outputs"]["traces"].as_array().unwrap() {
        let (a, b) = re_im(t);
        assert!((a + 1.0).abs() < 1e-6 && b.abs() < 1e-6, "{v}");
    }
    assert!(v["diagnostics"]["commutator_norm"].as_f64().unwrap() < 1e-6);
}

#[test]
fn counterexample_finds_both_values() {
    let (code, v) = run(&["counterexample", "--box", "2", "--grid", "9", "--box1", "1", "--grid1", "7"]);
    assert_eq!(code, 0, "{v}");
    let out = &v["outputs"];
    let b1 = out["b1"].as_array().unwrap();
    assert!(b1.iter().any(|m| norm(&m["b"]) < 1e-4), "{v}");
    assert!(!out["b2"].as_array().unwrap().is_empty(), "{v}");
}

#[test]
fn zgen_reports_the_degree() {
    let (code, v) = run(&["zgen", "--n", "1,0,0,0", "--p", "0.21,0.33", "--tau", "0.1,1.1", "--a", "0.1,0.2", "--a", "-0.3,0.1"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["outputs"]["deg_sigma"], 3, "{v}");
}
