use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kstab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kstab"))
        .args(args)
        .current_dir(dir)
        .env_remove("KSTAB_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn spec(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn tc_norm_is_two_and_exact() {
    let d = tempfile::tempdir().unwrap();
    let s = spec(d.path(), "tc.spec", "family=tc beta=1\n");
    let out = kstab(&["norm", "--spec", &s, "--horizon", "20", "--step", "0.01"], d.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let lower = v["lower"].as_f64().unwrap();
    assert!((lower - 2.0).abs() < 0.02 * 2.0);
    assert_eq!(v["lower"], v["upper"]);
}

#[test]
fn small_matrix_is_solved_exactly() {
    let d = tempfile::tempdir().unwrap();
    let out = kstab(&["norm", "--matrix", "[[1,-1],[-1,1]]"], d.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["method"], "exact");
    assert_eq!(v["lower"].as_f64(), Some(4.0));
    assert_eq!(v["argmax"], serde_json::json!([1, -1]));
}

#[test]
fn non_symmetric_matrix_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let out = kstab(&["norm", "--matrix", "[[1,2],[3,1]]"], d.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("symmetric"));
}

#[test]
fn gaussian_is_unstable() {
    let d = tempfile::tempdir().unwrap();
    let s = spec(d.path(), "g.spec", "family=gaussian sigma=1\n");
    let out = kstab(
        &["stability", "--spec", &s, "--horizons", "5,10,20,40", "--step", "0.1"],
        d.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["classification"], "unstable");
    assert_eq!(v["growth_model"]["model"], "polynomial");
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let s = spec(d.path(), "tc.spec", "family=tc\n");
    let code = |args: &[&str]| kstab(args, d.path()).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["zoo"]), Some(0));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["norm"]), Some(1));
    assert_eq!(code(&["norm", "--spec", "missing.spec", "--horizon", "1"]), Some(1));
    assert_eq!(code(&["norm", "--spec", &s]), Some(1));
    assert_eq!(code(&["norm", "--spec", &s, "--horizon", "1", "--step", "-1"]), Some(1));
    assert_eq!(code(&["norm", "--spec", &s, "--horizon", "1", "--enum-limit", "26"]), Some(2));
    assert_eq!(code(&["stability", "--spec", &s, "--horizons", "1,2,3"]), Some(1));
    let bad = spec(d.path(), "bad.spec", "family=tc sigma=2\n");
    assert_eq!(code(&["norm", "--spec", &bad, "--horizon", "1"]), Some(1));
}

#[test]
fn outputs_are_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let s = spec(d.path(), "g.spec", "family=gaussian sigma=0.7 mode=discrete\n");
    let run = |tag: &str| {
        let j = format!("{tag}.json");
        let c = format!("{tag}.csv");
        let out = kstab(
            &["norm", "--spec", &s, "--horizon", "60", "--seed", "7", "--out-json", &j, "--out-csv", &c],
            d.path(),
        );
        assert_eq!(out.status.code(), Some(0));
        (out.stdout, fs::read(d.path().join(j)).unwrap(), fs::read(d.path().join(c)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn seed_environment_overrides_flag() {
    let d = tempfile::tempdir().unwrap();
    let s = spec(d.path(), "m.spec", "family=gaussian sigma=3 mode=discrete\n");
    let with = |env: Option<&str>, seed: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_kstab"));
        cmd.args(["norm", "--spec", &s, "--horizon", "40", "--restarts", "1", "--seed", seed])
            .current_dir(d.path())
            .env_remove("KSTAB_SEED");
        if let Some(v) = env {
            cmd.env("KSTAB_SEED", v);
        }
        cmd.output().unwrap()
    };
    assert_eq!(with(Some("99"), "1").stdout, with(None, "99").stdout);
    assert_eq!(with(Some("nope"), "1").status.code(), Some(1));
}

#[test]
fn failures_leave_no_partial_outputs() {
    let d = tempfile::tempdir().unwrap();
    let s = spec(d.path(), "tc.spec", "family=tc\n");
    let out = kstab(
        &["norm", "--spec", &s, "--enum-limit", "40", "--horizon", "1", "--out-json", "r.json"],
        d.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.path().join("r.json").exists());
    let out = kstab(
        &["norm", "--spec", &s, "--horizon", "1", "--out-json", "nowhere/r.json"],
        d.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let names: Vec<_> = fs::read_dir(d.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1, "{names:?}");
}

#[test]
fn single_and_boost_round_trip() {
    let d = tempfile::tempdir().unwrap();
    fs::write(
        d.path().join("u.csv"),
        "{\"mode\":\"discrete\",\"horizon\":3,\"step\":1}\n0.1\n0.3\n-1\n",
    )
    .unwrap();
    let out = kstab(&["single", "u.csv", "--out-csv", "s.csv"], d.path());
    assert_eq!(out.status.code(), Some(0));
    assert!((json(&out)["l1_norm"].as_f64().unwrap() - 1.4).abs() < 1e-12);

    let out = kstab(
        &["boost", "--matrix", "[[2,1,-1],[1,2,1],[-1,1,2]]", "u.csv", "--out-csv", "b.csv", "--quiet"],
        d.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let pattern = fs::read_to_string(d.path().join("b.csv")).unwrap();
    let f = pattern_values(&pattern);
    assert!(f.iter().all(|v| *v == 1.0 || *v == -1.0));

    let out = kstab(&["boost", "--matrix", "[[1,0],[0,1]]", "u.csv"], d.path());
    assert_eq!(out.status.code(), Some(1));
}

fn pattern_values(text: &str) -> Vec<f64> {
    text.lines().skip(1).map(|l| l.trim().parse().unwrap()).collect()
}
