use std::path::Path;
use std::process::{Command, Output};

use sparsegap_core::x3c::{build_response, ExactCover, X3CInstance};

fn sparsegap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsegap")).args(args).output().expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn planted_instance_is_solved() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let out = sparsegap(&["gen-x3c", "--m", "6", "--plant-cover", "--seed", "7", "--out", arg(&inst)]);
    assert_eq!(out.status.code(), Some(0));
    let solved = sparsegap(&["solve-x3c", "--instance", arg(&inst), "--oracle", "brute"]);
    assert_eq!(solved.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&solved.stdout).unwrap();
    assert_eq!(v["found"], true);
    let cover = ExactCover::new(v["cover"].as_array().unwrap().iter().map(|j| j.as_u64().unwrap() as usize));
    let instance: X3CInstance = serde_json::from_str(&std::fs::read_to_string(&inst).unwrap()).unwrap();
    assert!(cover.validate(&instance).is_ok());
}

#[test]
fn domain_and_usage_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("p.json");
    let x: Vec<Vec<f64>> = (0..20).map(|i| (0..40).map(|j| ((i * 40 + j) as f64).sin()).collect()).collect();
    let body = serde_json::json!({"x": x, "y": vec![1.0; 20], "sigma": 1.0, "k": 10});
    std::fs::write(&problem, body.to_string()).unwrap();
    let out = sparsegap(&["estimate", "--problem", arg(&problem), "--method", "l0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("BudgetExceeded"));

    assert_eq!(sparsegap(&["gen-x3c", "--m", "6"]).status.code(), Some(2));
    assert_eq!(sparsegap(&["gen-x3c", "--m", "6", "--seed", "1", "--bogus"]).status.code(), Some(2));
    assert_eq!(sparsegap(&["frobnicate"]).status.code(), Some(2));
    let bad = sparsegap(&["gen-x3c", "--m", "4", "--seed", "1"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("InvalidGroundSet"));
}

#[test]
fn outputs_need_force_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let gen = |seed: &str, force: bool| {
        let mut a = vec!["gen-x3c", "--m", "6", "--seed", seed, "--out", arg(&inst)];
        if force {
            a.push("--force");
        }
        sparsegap(&a)
    };
    assert_eq!(gen("1", false).status.code(), Some(0));
    let before = std::fs::read(&inst).unwrap();
    let refused = gen("2", false);
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).starts_with("OutputExists"));
    assert_eq!(std::fs::read(&inst).unwrap(), before);
    assert_eq!(gen("2", true).status.code(), Some(0));
}

#[test]
fn cover_matrix_files() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    std::fs::write(&inst, r#"{"m": 3, "triples": [[1, 2, 3]]}"#).unwrap();
    let out_dir = dir.path().join("m");
    assert_eq!(sparsegap(&["build-m", "--instance", arg(&inst), "--out", arg(&out_dir)]).status.code(), Some(0));
    let m = std::fs::read_to_string(out_dir.join("M.csv")).unwrap();
    assert_eq!(m, "1,0,0,0\n1,0,0,0\n1,0,0,0\n1,-1,0,0\n1,0,1,0\n0,0,0,1\n");
    let y = sparsegap::io::read_matrix_csv(&out_dir.join("y.csv")).unwrap();
    let expected = build_response(&X3CInstance::new(3, vec![[1, 2, 3]]).unwrap());
    assert_eq!(y.column(0), expected);
}

#[test]
fn gap_report_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = sparsegap(&[
            "gap",
            "--m",
            "3",
            "--t",
            "2",
            "--n",
            "48",
            "--d",
            "16",
            "--gammas",
            "0.02",
            "--sigma",
            "1",
            "--trials",
            "2",
            "--theta-samples",
            "1",
            "--seed",
            "11",
            "--out",
            arg(&path),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(&path).unwrap(), path)
    };
    let (a, path) = run("a.csv");
    let (b, _) = run("b.csv");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("gamma,estimator,trials,mse_mean,mse_std,seed,runtime_s\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 3);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sparsegap::io::sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(meta["config"]["seed"], 11);
    assert!(meta["notice"].as_str().unwrap().contains("planted"));
}
