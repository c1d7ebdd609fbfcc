use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_dmimo");

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .display()
        .to_string()
}

fn dmimo(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("DMIMO_OUT_DIR").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn dmt_writes_csv_meta_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dmimo(&["dmt", "--config", &config("dmt.toml"), "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("dmt.csv")).unwrap();
    assert!(csv.starts_with("d,g_m,g_m_integer\n"));
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("dmt.meta.json")).unwrap()).unwrap();
    for key in ["subcommand", "config", "seed", "trials", "runtime_seconds", "warnings"] {
        assert!(meta.get(key).is_some(), "meta lacks {key}");
    }
    assert_eq!(meta["config"]["dmt"]["architecture"]["l_s"], 12);
    assert!(dir.path().join("dmt.manifest.json").exists());
}

#[test]
fn existing_outputs_need_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["mux-gain", "--config", &config("mux_gain.toml"), "--out", out];
    assert!(dmimo(&args).status.success());
    let again = dmimo(&args);
    assert!(!again.status.success());
    assert!(stderr(&again).contains("mux_gain.csv") || stderr(&again).contains("manifest"), "{}", stderr(&again));
    let forced = dmimo(&[&args[..], &["--force"]].concat());
    assert!(forced.status.success(), "{}", stderr(&forced));
}

#[test]
fn seed_override_and_thread_count_reach_the_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    let text = fs::read_to_string(config("multiuser.toml"))
        .unwrap()
        .replace("trials = 20000", "trials = 30")
        .replace("n_h = 100", "n_h = 8");
    fs::write(&cfg, text).unwrap();
    let run = |sub: &str, extra: &[&str]| {
        let out = dir.path().join(sub);
        let mut args = vec!["multiuser", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = dmimo(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        (
            fs::read(out.join("multiuser.csv")).unwrap(),
            serde_json::from_slice::<Value>(&fs::read(out.join("multiuser.meta.json")).unwrap()).unwrap(),
        )
    };
    let (a, meta) = run("a", &["--seed", "99", "--threads", "1"]);
    let (b, _) = run("b", &["--seed", "99", "--threads", "3"]);
    let (c, _) = run("c", &["--threads", "1"]);
    assert_eq!(meta["seed"], 99);
    assert_eq!(meta["config"]["seed"], 99);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn out_dir_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args(["dmt", "--config", &config("dmt_partial.toml")])
        .env("DMIMO_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("dmt.csv").exists());
}

#[test]
fn bad_configs_fail_with_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.toml", "[dmt]\nd_grid = [0.0]\nfoo = 1\n[dmt.architecture]\nkind = \"fully_connected\"\nl_s = 3\n", "foo"),
        ("range.toml", "[dmt]\nd_grid = [0.0, 4.0]\n[dmt.architecture]\nkind = \"fully_connected\"\nl_s = 3\n", "d_grid"),
        ("empty.toml", "snr_grid_db = []\n[mux]\ncurves = [{ k = 1, l = 3, n_s = 3 }]\n", "snr_grid_db"),
    ];
    for (name, text, field) in cases {
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        let sub = if name == "empty.toml" { "mux-gain" } else { "dmt" };
        let out = dir.path().join(format!("out-{name}"));
        let o = dmimo(&[sub, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(!o.status.success(), "{name} was accepted");
        assert!(stderr(&o).contains(field), "{name}: {}", stderr(&o));
        assert!(!out.exists(), "{name}: wrote outputs before failing");
    }
    let missing = dmimo(&["dmt", "--config", "/nonexistent/x.toml"]);
    assert!(!missing.status.success());
    assert!(stderr(&missing).contains("/nonexistent/x.toml"));
}

#[test]
fn validate_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("validation.json");
    let o = dmimo(&["validate", "--report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let passes = stdout.lines().filter(|l| l.starts_with("PASS ")).count();
    assert_eq!(passes, dmimo::validate::check_names().len());
    let json: Value = serde_json::from_slice(&fs::read(report).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
}
