use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn nsdarcy(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsdarcy"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Dotted key paths of nested objects, stopping at arrays and at `config` and `mesh`.
fn key_paths(v: &Value, prefix: &str, out: &mut Vec<String>) {
    let Some(map) = v.as_object() else { return };
    for (k, child) in map {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        out.push(path.clone());
        if path != "config" && path != "mesh" {
            key_paths(child, &path, out);
        }
    }
}

#[test]
fn verify_passes_on_the_builtin_mesh() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("v");
    let o = nsdarcy(&["verify"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out.join("verify.json"));
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["criteria"]["compensation"]["status"], "monotone");
    assert!(v["criteria"]["inf_sup"]["beta"].as_f64().unwrap() > 0.2);
}

#[test]
fn verify_output_keys_match_the_golden_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("v");
    assert_eq!(code(&nsdarcy(&["verify", "--levels", "2"], &out)), 0);
    let mut keys = Vec::new();
    key_paths(&read_json(&out.join("verify.json")), "", &mut keys);
    keys.sort();
    let golden = include_str!("golden/verify_keys.txt");
    assert_eq!(keys, golden.lines().map(str::to_owned).collect::<Vec<_>>());
}

#[test]
fn verify_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        assert_eq!(code(&nsdarcy(&["verify", "--seed", "7", "--levels", "2"], &out)), 0);
        let mut v = read_json(&out.join("verify.json"));
        v["config"]["out"] = Value::Null;
        v
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn single_level_sweep_reports_insufficient_levels() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("v");
    assert_eq!(code(&nsdarcy(&["verify", "--levels", "1"], &out)), 0);
    let v = read_json(&out.join("verify.json"));
    assert_eq!(v["criteria"]["compensation"]["status"], "insufficient levels");
}

#[test]
fn equal_order_pair_fails_verification() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("v");
    let o = nsdarcy(&["verify", "--pair", "equal_order", "--levels", "1"], &out);
    assert_eq!(code(&o), 1);
    let v = read_json(&out.join("verify.json"));
    assert_eq!(v["criteria"]["inf_sup"]["pass"], Value::Bool(false));
    assert_eq!(v["pass"], Value::Bool(false));
}

#[test]
fn smooth_mms_meets_its_rates() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m");
    let o = nsdarcy(&["mms"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("rates.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "level,h,err_u_h1,err_u_l2,err_p_l2,err_phi_h1,rate_u_h1,rate_u_l2,rate_p_l2,rate_phi_h1"
    );
    assert_eq!(lines.count(), 4);
    assert_eq!(read_json(&out.join("mms.json"))["pass"], Value::Bool(true));
}

#[test]
fn representable_mms_is_reproduced() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m");
    assert_eq!(code(&nsdarcy(&["mms", "--mms-case", "representable", "--levels", "2"], &out)), 0);
}

#[test]
fn too_few_levels_for_rates_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m");
    assert_eq!(code(&nsdarcy(&["mms", "--levels", "2"], &out)), 3);
    assert!(!out.exists());
    assert_eq!(code(&nsdarcy(&["mms", "--levels", "2", "--no-assert"], &out)), 0);
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.json");
    let out = dir.path().join("o");
    for text in [r#"{"nu": "#, r#"{"viscosity": 1}"#, r#"{"nu": -1}"#, r#"{"solver": {"max_iters": 0}}"#] {
        fs::write(&cfg, text).unwrap();
        let o = nsdarcy(&["solve", "--config", cfg.to_str().unwrap()], &out);
        assert_eq!(code(&o), 3, "{text}");
        assert!(!out.exists(), "{text}");
    }
}

#[test]
fn bad_mesh_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    for mesh in ["builtin:3x3", "/no/such/mesh.msh"] {
        assert_eq!(code(&nsdarcy(&["mesh-info", "--mesh", mesh], &out)), 3);
    }
    assert_eq!(code(&nsdarcy(&["solve", "--bogus"], &out)), 3);
}

#[test]
fn solve_writes_its_outputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s");
    let o = nsdarcy(&["solve", "--case", "lid_driven"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["solution.json", "state.json", "solution.vtk"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let s = read_json(&out.join("solution.json"));
    assert!(s["iterations"].as_u64().unwrap() >= 1);
    assert!(fs::read_to_string(out.join("solution.vtk")).unwrap().starts_with("# vtk DataFile"));
}

#[test]
fn nonconvergence_is_a_solver_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"amplitude": 50, "solver": {"max_iters": 1}}"#).unwrap();
    let out = dir.path().join("o");
    let o = nsdarcy(&["solve", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no convergence"));
}

#[test]
fn mesh_info_counts_dofs() {
    let dir = TempDir::new().unwrap();
    let o = nsdarcy(&["mesh-info", "--mesh", "builtin:2x4"], &dir.path().join("o"));
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["triangles"]["fluid"], 8);
    assert_eq!(v["triangles"]["porous"], 8);
    assert!(v["dofs"].is_object());
}
