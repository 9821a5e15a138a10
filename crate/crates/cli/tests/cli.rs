use std::io::Write;
use std::process::{Command, Stdio};

use serde_json::{json, Value};

struct Run {
    code: i32,
    stdout: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }
}

fn kit(args: &[&str], input: &str) -> Run {
    let mut child = Command::new(env!("CARGO_BIN_EXE_robba-kit"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    Run { code: out.status.code().unwrap_or(-1), stdout: String::from_utf8(out.stdout).unwrap() }
}

fn laurent(terms: Value) -> Value {
    json!({"tag": "GammaCon", "r": [1, 2], "N": 12, "terms": terms})
}

fn tate1(terms: Value) -> Value {
    json!({"n": 1, "radius": [[0, 1]], "terms": terms})
}

fn mat(entries: Vec<Vec<Value>>) -> Value {
    json!(entries)
}

#[test]
fn eval_examples() {
    let u4 = json!({"tag": "GammaCon", "r": [1, 1], "N": 12, "terms": [[-4, "1"]]});
    let run = kit(&["eval", "wr", "--r", "1/2"], &u4.to_string());
    assert_eq!(run.code, 0);
    assert_eq!(run.json(), json!({"w_r": [-2, 1]}));

    let run = kit(&["eval", "gauss"], &tate1(json!([[[0], "1", "0"]])).to_string());
    assert_eq!(run.json(), json!({"v": [0, 1]}));

    let run = kit(&["eval", "gauss"], "{\"n\": 1,");
    assert_eq!(run.code, 2);
    assert_eq!(run.json()["error"], "Parse");

    let run = kit(&["eval", "derive"], &laurent(json!([[3, "1"], [-1, "2"]])).to_string());
    // coefficients known mod p^N print as residues in [0, p^N)
    let expect = (5i64.pow(12) - 2).to_string();
    assert_eq!(run.json()["derivative"]["terms"], json!([[-2, expect], [2, "3"]]));

    let run = kit(&["eval", "leading"], &tate1(json!([[[1], "3", "0"], [[2], "1", "0"]])).to_string());
    assert_eq!(run.json()["degree"], 2);
}

#[test]
fn bad_flags_and_preconditions() {
    let run = kit(&["--prime", "6", "eval", "gauss"], &tate1(json!([[[0], "1", "0"]])).to_string());
    assert_eq!(run.code, 3);
    assert_eq!(run.json()["error"], "InvalidConfig");
    let run = kit(&["eval", "nonsense"], "");
    assert_eq!(run.code, 2);
}

#[test]
fn twisted_scalar() {
    let input = json!({"lambda": "5", "x": laurent(json!([[0, "1"]]))});
    let run = kit(&["solve", "twisted"], &input.to_string());
    assert_eq!(run.code, 0);
    let out = run.json();
    let y: i128 = out["y"]["terms"][0][1].as_str().unwrap().parse().unwrap();
    // y (p - 1) = 1 mod p^12
    assert_eq!((y * 4).rem_euclid(5i128.pow(12)), 1);

    let mut cert = out.clone();
    cert["lambda"] = json!("5");
    cert["x"] = input["x"].clone();
    let run = kit(&["verify"], &cert.to_string());
    assert_eq!(run.json()["verified"], true);

    let unit = json!({"lambda": "2", "x": laurent(json!([[0, "1"]]))});
    let run = kit(&["solve", "twisted"], &unit.to_string());
    assert_eq!(run.code, 3);
    assert_eq!(run.json()["error"], "LambdaIsUnit");
}

#[test]
fn split_examples() {
    let c = |v: &str| laurent(json!([[0, v]]));
    let zero = laurent(json!([]));
    let input = json!({"A": mat(vec![vec![c("5")]]), "B": mat(vec![vec![zero]]), "D": mat(vec![vec![c("1")]]), "N": 12});
    let run = kit(&["solve", "split"], &input.to_string());
    assert_eq!(run.code, 0);
    assert_eq!(run.json()["X"][0][0]["terms"], json!([]));

    let input = json!({
        "A": mat(vec![vec![c("9"), laurent(json!([[-1, "1"], [2, "1"]]))], vec![laurent(json!([])), c("18")]]),
        "B": mat(vec![vec![c("1"), laurent(json!([[3, "4"]]))], vec![laurent(json!([[5, "1"]])), c("2")]]),
        "D": mat(vec![vec![c("3"), laurent(json!([]))], vec![laurent(json!([[1, "2"]])), c("1")]]),
        "N": 12,
    });
    let run = kit(&["--prime", "3", "solve", "split"], &input.to_string());
    assert_eq!(run.code, 0, "{}", run.stdout);
    let out = run.json();
    assert_eq!(out["conjugation_ok"], true);
    let mut cert = input.clone();
    cert["X"] = out["X"].clone();
    let run = kit(&["--prime", "3", "verify"], &cert.to_string());
    assert_eq!(run.json()["verified"], true);

    let rejected = json!({"A": mat(vec![vec![c("1")]]), "B": mat(vec![vec![c("1")]]), "D": mat(vec![vec![c("5")]])});
    let run = kit(&["solve", "split"], &rejected.to_string());
    assert_eq!(run.code, 4);
    assert_eq!(run.json()["error"], "NoContraction");
}

#[test]
fn slopes_of_diag() {
    let c = |v: &str| laurent(json!([[0, v]]));
    let m = mat(vec![vec![c("1"), c("0")], vec![c("0"), c("5")]]);
    let out = kit(&["slopes"], &m.to_string()).json();
    assert_eq!(out["slopes"], json!([[0, 1], [1, 1]]));
    assert_eq!(out["exact"], true);
    assert_eq!(out["partial_sums"], json!([[1, 0, 1], [2, 1, 1]]));
}

#[test]
fn qs_examples() {
    let one = tate1(json!([[[0], "1", "0"]]));
    let zero = tate1(json!([]));
    let run = kit(&["qs", "reduce"], &json!({"f": [one, zero]}).to_string());
    assert_eq!(run.code, 0);
    let out = run.json();
    assert_eq!(out["verified"], true);
    assert_eq!(out["M"][0][0]["terms"], json!([[[0], "1", "0"]]));
    assert_eq!(out["M"][0][1]["terms"], json!([]));
    assert_eq!(out["M"][1][1]["terms"], json!([[[0], "1", "0"]]));

    let f = tate1(json!([[[1], "1", "0"], [[2], "5", "0"]]));
    let out = kit(&["qs", "prepare"], &f.to_string()).json();
    assert_eq!(out["P"]["terms"], json!([[[1], "1", "0"]]));
    assert_eq!(out["unit"]["terms"], json!([[[0], "1", "0"], [[1], "5", "0"]]));
}

#[test]
fn certificates_reverify() {
    // (t1, 1 + t1 t2) with witness (-t2, 1)
    let two = |terms: Value| json!({"n": 2, "radius": [[0, 1], [0, 1]], "terms": terms});
    let input = json!({
        "f": [two(json!([[[1, 0], "1", "0"]])), two(json!([[[0, 0], "1", "0"], [[1, 1], "1", "0"]]))],
        "witness": [two(json!([[[0, 1], "-1", "0"]])), two(json!([[[0, 0], "1", "0"]]))],
    });
    let first = kit(&["qs", "reduce"], &input.to_string());
    assert_eq!(first.code, 0, "{}", first.stdout);
    assert_eq!(first.stdout, kit(&["qs", "reduce"], &input.to_string()).stdout);
    let run = kit(&["verify"], &first.stdout);
    assert_eq!(run.json(), json!({"kind": "reduction", "verified": true}));

    let mut tampered = first.json();
    tampered["M"][0][0] = two(json!([[[0, 0], "2", "0"]]));
    let run = kit(&["verify"], &tampered.to_string());
    assert_eq!(run.code, 1);
    assert_eq!(run.json()["verified"], false);

    let kernel = kit(&["qs", "kernel"], &input.to_string());
    assert_eq!(kernel.json()["verified"], true);
    assert_eq!(kit(&["verify"], &kernel.stdout).json()["verified"], true);

    let complete = kit(&["qs", "complete"], &input.to_string());
    assert_eq!(kit(&["verify"], &complete.stdout).json()["verified"], true);
}

#[test]
fn tj_search() {
    // t1 t2: no t2-leading unit until T_j mixes in a pure power of t2
    let f = json!({"n": 2, "radius": [[0, 1], [0, 1]], "terms": [[[1, 1], "1", "0"]]});
    let out = kit(&["qs", "tj"], &f.to_string()).json();
    assert_eq!(out["leading_unit"], true);
    assert!(out["j"].as_u64().unwrap() >= 1);
}

#[test]
fn selftest_is_deterministic() {
    let a = kit(&["selftest", "--seed", "7"], "");
    assert_eq!(a.code, 0, "{}", a.stdout);
    let out = a.json();
    assert_eq!(out["all_pass"], true);
    assert_eq!(out["seed"], 7);
    let b = kit(&["qs", "--selftest", "--seed", "7"], "");
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn tj_ring_mode_reports_lambda() {
    let f = json!({"n": 2, "radius": [[-1, 1], [-1, 1]], "terms": [[[1, 1], "1", "0"], [[0, 0], "1", "0"]]});
    let run = kit(&["qs", "tj", "--ring", "--j", "2"], &f.to_string());
    assert_eq!(run.code, 0, "{}", run.stdout);
    assert_eq!(run.json()["lambda"], json!([1, 1]));
    // unit polydisc: the integral substitution is not defined
    let unit = json!({"n": 2, "radius": [[0, 1], [0, 1]], "terms": [[[1, 1], "1", "0"]]});
    assert_eq!(kit(&["qs", "tj", "--ring"], &unit.to_string()).code, 3);
}
