use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn homtype(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homtype")).args(args).output().expect("spawn homtype")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(o: &Output, key: &str) -> f64 {
    let prefix = format!("{key} = ");
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no `{key}` in output:\n{}", stdout(o)))
        .parse()
        .unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

struct Fixture {
    _dir: tempfile::TempDir,
    space: String,
    exp: String,
    weight: String,
    func: String,
    grid: String,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (space, exp, weight, func, grid) =
        (p(d, "s.json"), p(d, "p.json"), p(d, "w.json"), p(d, "f.json"), p(d, "g.json"));
    assert_eq!(code(&homtype(&["space", "gen", "--spec", "grid:dim=1,side=16,spacing=1,mass=uniform", "--out", &space])), 0);
    assert_eq!(code(&homtype(&["exp", "gen", "--space", &space, "--spec", "constant:value=2", "--out", &exp])), 0);
    assert_eq!(code(&homtype(&["weight", "gen", "--space", &space, "--spec", "unit", "--out", &weight])), 0);
    let values: Vec<String> = (0..16).map(|i| if i < 4 { "1.0".into() } else { "0.0".into() }).collect();
    std::fs::write(&func, format!("{{\"values\": [{}]}}", values.join(","))).unwrap();
    assert_eq!(code(&homtype(&["grid", "build", "--space", &space, "--seed", "0", "--out", &grid])), 0);
    Fixture { _dir: dir, space, exp, weight, func, grid }
}

#[test]
fn space_constants_on_uniform_line() {
    let f = fixture();
    let o = homtype(&["space", "constants", "--in", &f.space]);
    assert_eq!(code(&o), 0);
    assert_eq!(value(&o, "n"), 16.0);
    assert_eq!(value(&o, "a0"), 1.0);
    assert!(value(&o, "c_mu") >= 1.0);
}

#[test]
fn constant_exponent_norm_matches_closed_form() {
    let f = fixture();
    let o = homtype(&["norm", "--space", &f.space, "--exp", &f.exp, "--fn", &f.func, "--tol", "1e-12"]);
    assert_eq!(code(&o), 0);
    assert!((value(&o, "norm") - 2.0).abs() < 1e-8);
    let o = homtype(&["modular", "--space", &f.space, "--exp", &f.exp, "--fn", &f.func, "--lambda", "2"]);
    assert!((value(&o, "rho") - 1.0).abs() < 1e-12);
}

#[test]
fn unit_weight_has_apq_one() {
    let f = fixture();
    let o = homtype(&["apq", "--space", &f.space, "--exp", &f.exp, "--weight", &f.weight]);
    assert_eq!(code(&o), 0);
    assert!((value(&o, "apq") - 1.0).abs() < 1e-8);
    let o = homtype(&["apq", "--space", &f.space, "--exp", &f.exp, "--weight", &f.weight, "--grid", &f.grid]);
    assert!((value(&o, "apq_dyadic") - 1.0).abs() < 1e-8);
}

#[test]
fn grid_roundtrip_and_verify() {
    let f = fixture();
    let o = homtype(&["grid", "verify", "--space", &f.space, "--grid", &f.grid]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("= pass").count(), 5);
}

#[test]
fn maximal_file_roundtrip() {
    let f = fixture();
    let out = f.func.replace("f.json", "m.json");
    assert_eq!(code(&homtype(&["maximal", "--space", &f.space, "--fn", &f.func, "--out", &out])), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let m: serde_json::Value = serde_json::from_str(&text).unwrap();
    let values = m["values"].as_array().unwrap();
    assert_eq!(values.len(), 16);
    assert_eq!(values[0].as_f64(), Some(1.0));
    assert!(values.iter().all(|v| v.as_f64().unwrap() > 0.0));
}

#[test]
fn checks_report_bounded_constants() {
    let f = fixture();
    let o = homtype(&["check", "weak11", "--space", &f.space, "--grid", &f.grid, "--fn", &f.func]);
    assert_eq!(code(&o), 0);
    assert!(value(&o, "weak11_ratio") <= 1.0 + 1e-12);
    let o = homtype(&["check", "strongpp", "--space", &f.space, "--grid", &f.grid, "--fn", &f.func, "--p", "2"]);
    assert!(value(&o, "strongpp_ratio") <= value(&o, "bound"));
    let o = homtype(&["check", "domination", "--space", &f.space, "--fn", &f.func]);
    assert_eq!(code(&o), 0);
    assert!(value(&o, "domination_ratio") > 0.0);
}

#[test]
fn cz_report_is_json() {
    let f = fixture();
    let o = homtype(&["cz", "--space", &f.space, "--grid", &f.grid, "--fn", &f.func, "--lambda", "0.5"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["exact_cover"], true);
    assert_eq!(v["maximal"], true);
    let o = homtype(&["cz", "--space", &f.space, "--grid", &f.grid, "--fn", &f.func, "--base-a", "4"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["disjoint"], true);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&homtype(&["bogus"])), 1);
    assert_eq!(code(&homtype(&["norm", "--space", "/nonexistent.json"])), 1);
    let f = fixture();
    assert_eq!(code(&homtype(&["norm", "--space", "/nonexistent.json", "--exp", &f.exp, "--fn", &f.func])), 1);
    assert_eq!(code(&homtype(&["cz", "--space", &f.space, "--grid", &f.grid, "--fn", &f.func])), 1);
    let cfg = configs().join("small.toml");
    assert_eq!(code(&homtype(&["experiment", "nope", "--config", cfg.to_str().unwrap(), "--out", "/tmp"])), 1);
    assert_eq!(code(&homtype(&["--help"])), 0);
}

#[test]
fn mismatched_lengths_are_rejected() {
    let f = fixture();
    std::fs::write(&f.func, "{\"values\": [1.0, 2.0]}").unwrap();
    assert_eq!(code(&homtype(&["norm", "--space", &f.space, "--exp", &f.exp, "--fn", &f.func])), 1);
}

#[test]
fn failed_expectation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("small.toml")).unwrap();
    let cfg = dir.path().join("wrong.toml");
    std::fs::write(&cfg, format!("expect = \"co-diverging\"\n{text}")).unwrap();
    let out = p(dir.path(), "out");
    let o = homtype(&["experiment", "blowup", "--config", cfg.to_str().unwrap(), "--out", &out]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert!(dir.path().join("out/blowup.csv").exists());
}

#[test]
fn experiments_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("small.toml");
    for kind in ["strong-type", "weak-type", "necessity", "blowup"] {
        let mut digests = Vec::new();
        for run in 0..2 {
            let out = p(dir.path(), &format!("run{run}"));
            let o = homtype(&["experiment", kind, "--config", cfg.to_str().unwrap(), "--out", &out]);
            assert_eq!(code(&o), 0, "{kind}: {}", stdout(&o));
            let csv = std::fs::read(dir.path().join(format!("run{run}/{kind}.csv"))).unwrap();
            let json = std::fs::read(dir.path().join(format!("run{run}/{kind}.json"))).unwrap();
            digests.push((Sha256::digest(csv), Sha256::digest(json)));
        }
        assert_eq!(digests[0], digests[1], "{kind} output differs between runs");
    }
}
