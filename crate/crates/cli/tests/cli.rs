use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn hdxcsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdxcsp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, value.to_string()).unwrap();
    path
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return vec![vec![]];
    }
    (r - 1..n)
        .flat_map(|last| {
            combinations(last, r - 1).into_iter().map(move |mut c| {
                c.push(last);
                c
            })
        })
        .collect()
}

fn complete(n: usize, d: usize) -> Value {
    let top: Vec<Value> = combinations(n, d).into_iter().map(|c| json!({ "vertices": c })).collect();
    json!({ "n": n, "d": d, "top_faces": top })
}

/// 3-XOR over Z_2 with right-hand side 0 on the given scopes.
fn zero_xor(n: usize, scopes: &[[usize; 3]]) -> Value {
    let allowed: Vec<[usize; 3]> = (0..4).map(|c| [c & 1, c >> 1, ((c & 1) + (c >> 1)) % 2]).collect();
    let cons: Vec<Value> = scopes.iter().map(|s| json!({ "scope": s, "allowed": allowed })).collect();
    json!({ "n": n, "k": 3, "q": 2, "constraints": cons })
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gamma_of_complete_graph_complex() {
    let dir = TempDir::new().unwrap();
    let x = write(dir.path(), "x.json", &complete(10, 2));
    let v = stdout_json(&hdxcsp(&["complex", "gamma", "--in", path_str(&x)]));
    assert!((v["gamma"].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-12);
}

#[test]
fn complex_stats_and_eposet() {
    let dir = TempDir::new().unwrap();
    let x = write(dir.path(), "x.json", &complete(6, 3));
    let v = stdout_json(&hdxcsp(&["complex", "stats", "--in", path_str(&x)]));
    assert_eq!(v["level_sizes"], json!([1, 6, 15, 20]));
    let v = stdout_json(&hdxcsp(&["complex", "eposet", "--in", path_str(&x)]));
    assert_eq!(v["per_level"].as_array().unwrap().len(), 2);
}

#[test]
fn kneser_analytic_and_numeric() {
    let v = stdout_json(&hdxcsp(&["spectra", "kneser", "--n", "5", "--k", "2", "--analytic"]));
    assert!((v["sigma2"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    for l in [None, Some("1")] {
        let mut args = vec!["spectra", "kneser", "--n", "7", "--k", "2"];
        if let Some(l) = l {
            args.extend(["--l", l]);
        }
        let numeric = stdout_json(&hdxcsp(&args));
        args.push("--analytic");
        let analytic = stdout_json(&hdxcsp(&args));
        let (a, b) = (numeric["values"].as_array().unwrap(), analytic["values"].as_array().unwrap());
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-8);
        }
    }
}

#[test]
fn walks_and_spectra() {
    let dir = TempDir::new().unwrap();
    let x = write(dir.path(), "x.json", &complete(8, 4));
    let p = path_str(&x);
    let w = stdout_json(&hdxcsp(&["walks", "build", "--in", p, "--kind", "swap", "--k", "2", "--l", "2"]));
    for row in w["matrix"].as_array().unwrap() {
        let s: f64 = row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
    let s = stdout_json(&hdxcsp(&["spectra", "sigma2", "--in", p, "--kind", "swap", "--k", "2", "--l", "2"]));
    assert!((s["sigma2"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-10);
    let c = stdout_json(&hdxcsp(&[
        "spectra", "sigma2", "--in", p, "--kind", "canonical", "--k", "2", "--u", "2", "--method", "conditioned",
    ]));
    assert_eq!(c["method"], "pi-symmetrized");
}

#[test]
fn threshold_ranks() {
    let dir = TempDir::new().unwrap();
    let g = json!({
        "vertices": ["a", "b", "c", "d", "e", "f"],
        "edges": [
            {"u": 0, "v": 1}, {"u": 1, "v": 2}, {"u": 0, "v": 2},
            {"u": 3, "v": 4}, {"u": 4, "v": 5}, {"u": 3, "v": 5}
        ]
    });
    let g = write(dir.path(), "g.json", &g);
    let v = stdout_json(&hdxcsp(&["spectra", "trank", "--in", path_str(&g), "--tau", "0.9"]));
    assert_eq!(v["rank"], 2);
    let x = write(dir.path(), "x.json", &complete(12, 4));
    let v = stdout_json(&hdxcsp(&["spectra", "trank", "--in", path_str(&x), "--tau", "0.5", "--complex"]));
    assert_eq!(v["hd_threshold_rank"], 1);
    assert_eq!(v["trees"].as_array().unwrap().len(), 5);
    let v = stdout_json(&hdxcsp(&[
        "spectra", "trank", "--in", path_str(&x), "--tau", "0.5", "--complex", "--tree", "((1,1),(1,1))",
    ]));
    assert_eq!(v["trees"][0]["rank"], 1);
}

#[test]
fn brute_force_on_zero_xor() {
    let dir = TempDir::new().unwrap();
    let inst = write(dir.path(), "i.json", &zero_xor(5, &[[0, 1, 2], [1, 2, 3], [2, 3, 4], [0, 3, 4]]));
    let v = stdout_json(&hdxcsp(&["csp", "brute", "--in", path_str(&inst)]));
    assert_eq!(v["opt"], 1.0);
}

#[test]
fn sdp_round_and_solve() {
    let dir = TempDir::new().unwrap();
    let inst = write(dir.path(), "i.json", &zero_xor(5, &[[0, 1, 2], [1, 2, 3], [2, 3, 4], [0, 3, 4]]));
    let p = path_str(&inst);
    let log = dir.path().join("log.jsonl");
    let v = stdout_json(&hdxcsp(&["csp", "sdp", "--in", p, "--log", path_str(&log)]));
    assert!(v["objective"].as_f64().unwrap() > 1.0 - 1e-5);
    let line: Value = serde_json::from_str(std::fs::read_to_string(&log).unwrap().lines().last().unwrap()).unwrap();
    for key in ["iter", "primal_res", "psd_min_eig", "objective"] {
        assert!(line.get(key).is_some());
    }
    let r = stdout_json(&hdxcsp(&["csp", "round", "--in", p, "--trials", "10", "--checks"]));
    assert_eq!(r["rounding"]["mean_sat"], 1.0);
    assert!(r["rounding"].get("reports").is_none());
    let csv = hdxcsp(&["csp", "round", "--in", p, "--trials", "10", "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("m,eps_m,phi_m,var_1,var_2,var_3"));
    let s = stdout_json(&hdxcsp(&["csp", "solve", "--in", p, "--trials", "10", "--eps", "0.2"]));
    assert_eq!(s["report"]["best_sat"], 1.0);
    assert_eq!(s["assignment"].as_array().unwrap().len(), 5);
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let inst = write(dir.path(), "i.json", &zero_xor(6, &[[0, 1, 2], [1, 2, 3], [2, 3, 4], [3, 4, 5], [0, 4, 5]]));
    let args = ["csp", "solve", "--in", path_str(&inst), "--trials", "12", "--seed", "5", "--per-trial"];
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_hdxcsp"))
            .args(args)
            .env("HDXCSP_THREADS", threads)
            .output()
            .unwrap()
    };
    let (a, b, c) = (run("1"), run("1"), run("4"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn report_sweep_single_criterion() {
    let out = hdxcsp(&["report", "sweep", "--criterion", "3", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("3,"));
    assert!(text.contains(",true,"));
}

fn assert_error(out: &Output, code: i32, kind: &str) {
    assert_eq!(out.status.code(), Some(code), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert_eq!(err["error"]["kind"], kind);
    assert!(out.stdout.is_empty());
}

#[test]
fn validation_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", &json!({ "n": 3 }));
    assert_error(&hdxcsp(&["complex", "gamma", "--in", path_str(&bad)]), 2, "json");
    assert_error(&hdxcsp(&["complex", "gamma", "--in", "/nonexistent/x.json"]), 2, "io");
    assert_error(&hdxcsp(&["complex", "gamma"]), 2, "invalid");
    assert_error(&hdxcsp(&["complex", "bogus"]), 2, "usage");
    assert_error(&hdxcsp(&["spectra", "kneser", "--n", "3", "--k", "2", "--analytic"]), 2, "parameter");
    assert_error(&hdxcsp(&["report", "sweep", "--criterion", "12"]), 2, "parameter");
    let x = write(dir.path(), "x.json", &complete(5, 2));
    assert_error(&hdxcsp(&["walks", "build", "--in", path_str(&x), "--tol", "0"]), 2, "invalid");
    assert_error(&hdxcsp(&["complex", "stats", "--in", path_str(&x), "--format", "csv"]), 2, "invalid");
}

#[test]
fn numerical_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let x = json!({
        "n": 5, "d": 3,
        "top_faces": [
            {"vertices": [0, 1, 2], "weight": 0.1},
            {"vertices": [1, 2, 3], "weight": 0.7},
            {"vertices": [0, 2, 4], "weight": 0.3},
            {"vertices": [1, 3, 4], "weight": 0.9}
        ]
    });
    let x = write(dir.path(), "x.json", &x);
    let out = hdxcsp(&["walks", "build", "--in", path_str(&x), "--kind", "swap", "--k", "1", "--l", "1", "--tol", "1e-30"]);
    assert_error(&out, 3, "numerical");
}

#[test]
fn help_exits_zero() {
    let out = hdxcsp(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("report"));
}
