use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn genbound(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genbound"))
        .current_dir(dir)
        .env_remove("GENBOUND_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn json(dir: &Path, args: &[&str]) -> Value {
    let mut full = vec!["--format", "json", "--replicas", "500"];
    full.extend_from_slice(args);
    let out = genbound(dir, &full);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn fixtures() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("flip.json"), r#"{"states":["u","d"],"Q":[[0.75,0.25],[0.25,0.75]],"nu":[0.5,0.5]}"#).unwrap();
    std::fs::write(p.join("iid.json"), r#"{"states":["u","d"],"Q":[[0.5,0.5],[0.5,0.5]],"nu":[0.5,0.5]}"#).unwrap();
    std::fs::write(
        p.join("class.json"),
        r#"{"M":1,"labeled":false,"functions":[{"name":"sign","values":[1,-1]},{"name":"tilt","values":[0.5,0.2]}]}"#,
    )
    .unwrap();
    std::fs::write(
        p.join("net.json"),
        r#"{"base":"class.json","layers":[{"neurons":[{"w":[0.7,0.3]}],"sigmoid":"tanh","L":1}]}"#,
    )
    .unwrap();
    dir
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("{key} missing in {v}"))
}

#[test]
fn analyze_two_state() {
    let d = fixtures();
    let v = json(d.path(), &["chain", "analyze", "flip.json"]);
    assert_eq!(v["schema"], "genbound/1");
    assert_eq!(v["command"], "chain analyze");
    assert!((num(&v, "lambda") - 0.5).abs() < 1e-12);
    assert!((num(&v, "gamma_star") - 0.5).abs() < 1e-12);
    assert!((num(&v, "tau_min_guarded") - 49.0 / 9.0).abs() < 1e-9);
    assert_eq!(v["t_mix"], 1);
    assert_eq!(v["reversible"], true);
}

#[test]
fn thm1_confidence() {
    let d = fixtures();
    let v = json(d.path(), &["bound", "thm1", "--chain", "flip.json", "--class", "class.json", "--n", "64"]);
    assert!((num(&v, "confidence") - 0.9634528662914924).abs() < 1e-12);
    let bound = num(&v, "bound");
    assert!((0.0..=1.0).contains(&bound));
    assert!(num(&v, "bound_raw") >= bound);
}

#[test]
fn usage_error_exits_two() {
    let d = fixtures();
    let out = genbound(d.path(), &["bound", "thm1", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domain_error_exits_one_with_json() {
    let d = fixtures();
    std::fs::write(d.path().join("bad.json"), r#"{"states":["a","b"],"Q":[[0.9,0.2],[0.5,0.5]],"nu":[1,0]}"#).unwrap();
    let out = genbound(d.path(), &["chain", "analyze", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["schema"], "genbound/1");
    assert!(err["error"]["kind"].is_string());
    assert!(err["error"]["message"].as_str().unwrap().contains("0"));

    let out = genbound(d.path(), &["chain", "analyze", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
}

#[test]
fn replica_identity_holds_only_for_iid() {
    let d = fixtures();
    let markov = json(d.path(), &["verify", "replica-identity", "--chain", "flip.json", "--class", "class.json", "--n", "3"]);
    assert_eq!(markov["pass"], false);
    let iid = json(d.path(), &["verify", "replica-identity", "--chain", "iid.json", "--class", "class.json", "--n", "3"]);
    assert_eq!(iid["pass"], true);
    assert_eq!(iid["method"], "exact-enumeration");
}

#[test]
fn sample_roundtrips_through_trajectory_flag() {
    let d = fixtures();
    let out = genbound(d.path(), &["--format", "json", "--out", "traj.json", "chain", "sample", "flip.json", "--n", "200"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let est = json(d.path(), &["chain", "estimate", "traj.json"]);
    assert_eq!(est["Q"].as_array().unwrap().len(), 2);
    let b = json(
        d.path(),
        &["bound", "two-sided", "--chain", "flip.json", "--class", "class.json", "--n", "1", "--trajectory", "traj.json"],
    );
    assert_eq!(b["n"], 200);
    assert_eq!(b["trajectory_seed"], Value::Null);
}

#[test]
fn seed_from_environment() {
    let d = fixtures();
    let run = |seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_genbound"));
        c.current_dir(d.path()).args(["--format", "json", "chain", "sample", "flip.json", "--n", "50"]);
        match seed {
            Some(s) => c.env("GENBOUND_SEED", s),
            None => c.env_remove("GENBOUND_SEED"),
        };
        c.output().unwrap().stdout
    };
    assert_eq!(run(Some("0xC0FFEE")), run(None));
    assert_ne!(run(Some("7")), run(None));
}

#[test]
fn text_format_is_key_value_lines() {
    let d = fixtures();
    let out = genbound(d.path(), &["reduce", "companion", "--a", "0.5,0.2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "command: reduce companion"));
    assert!(text.lines().any(|l| l == "max_deviation: 0"));
}

#[test]
fn arma_discretization_writes_a_chain() {
    let d = fixtures();
    let v = json(d.path(), &["reduce", "arma", "--a", "0.6", "--bins", "12", "--chain-out", "ar.json"]);
    assert_eq!(v["discretization"]["n_states"], 12);
    let a = json(d.path(), &["chain", "analyze", "ar.json"]);
    assert_eq!(a["irreducible"], true);
    assert!(num(&a, "lambda") < 1.0);
}

#[test]
fn deep_bounds_run() {
    let d = fixtures();
    for cmd in ["deep-layered", "deep-adaptive"] {
        let v = json(d.path(), &["bound", cmd, "--chain", "flip.json", "--network", "net.json", "--labels", "1,-1", "--n", "64"]);
        assert_eq!(v["theorem"], cmd);
        assert!(v["extras"]["capacity"]["Lambda"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn zeta_constraint_is_a_domain_error() {
    let d = fixtures();
    let out = genbound(
        d.path(),
        &["bound", "deep-adaptive", "--chain", "flip.json", "--network", "net.json", "--labels", "1,-1", "--n", "64", "--alpha", "2"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn levy_distance_of_files() {
    let d = fixtures();
    std::fs::write(d.path().join("a.json"), r#"{"xs":[0,1],"values":[0.5,1]}"#).unwrap();
    std::fs::write(d.path().join("b.json"), r#"{"points":[0,1],"weights":[0.5,0.5]}"#).unwrap();
    let v = json(d.path(), &["margins", "levy-distance", "a.json", "b.json"]);
    assert_eq!(num(&v, "levy_distance"), 0.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let d = fixtures();
    let args = ["--format", "json", "verify", "symmetrization", "--chain", "flip.json", "--class", "class.json", "--n", "16"];
    let a = genbound(d.path(), &args).stdout;
    let b = genbound(d.path(), &args).stdout;
    assert!(!a.is_empty());
    assert_eq!(a, b);
}
