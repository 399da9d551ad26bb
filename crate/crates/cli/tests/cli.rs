//! End-to-end runs of the `mfg` binary on the smoke config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn mfg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfg")).args(args).output().unwrap()
}

fn run_ok(verb: &str, config: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec![verb, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = mfg(&args);
    assert!(
        o.status.success(),
        "{verb} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn run_err(args: &[&str]) -> (String, String) {
    let o = mfg(args);
    assert!(!o.status.success(), "expected failure for {args:?}");
    (
        String::from_utf8(o.stdout).unwrap(),
        String::from_utf8(o.stderr).unwrap(),
    )
}

/// Every file under `root` except manifests, keyed by relative path.
fn numeric_artifacts(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

#[test]
fn full_pipeline_is_deterministic_and_write_once() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = smoke_config();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        for verb in ["solve-exact", "train-master", "benchmark", "export"] {
            run_ok(verb, &cfg, out, &[]);
        }
    }
    let (fa, fb) = (numeric_artifacts(&a), numeric_artifacts(&b));
    assert!(fa.len() > 20);
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(v == &fb[k], "{k} differs between reruns");
    }
    for sub in ["exact", "master", "benchmark", "export"] {
        let (ma, mb) = (manifest(&a.join(sub)), manifest(&b.join(sub)));
        assert_eq!(ma["artifacts"], mb["artifacts"]);
        assert_eq!(ma["config"]["seed"], 1);
        // Every listed artifact exists with its recorded size.
        for art in ma["artifacts"].as_array().unwrap() {
            let p = a.join(sub).join(art["path"].as_str().unwrap());
            assert_eq!(std::fs::metadata(p).unwrap().len(), art["bytes"].as_u64().unwrap());
        }
    }

    let before = std::fs::read(a.join("exact/sets.json")).unwrap();
    let (_, err) = run_err(&["solve-exact", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(err.contains("write-once"), "{err}");
    assert_eq!(std::fs::read(a.join("exact/sets.json")).unwrap(), before);
}

#[test]
fn benchmark_layout_matches_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = smoke_config();
    let out = tmp.path();
    run_ok("solve-exact", &cfg, out, &[]);
    run_ok("train-master", &cfg, out, &[]);
    run_ok("benchmark", &cfg, out, &[]);

    // Two training and three testing distributions; two master iterations.
    let curve = csv_rows(&out.join("master/master_curve.csv"));
    assert_eq!(curve.len(), 1 + 2);
    let w = csv_rows(&out.join("benchmark/w.csv"));
    assert_eq!(w[0].len(), 1 + 2 + 3);
    let labels: Vec<&str> = w[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels.len(), 2 + 4);
    assert!(labels[0].starts_with("specialized:") && labels[1].starts_with("specialized:"));
    assert_eq!(&labels[2..], ["mixture_reward", "unconditioned", "uniform_random", "master"]);
    for i in 0..2 {
        assert_eq!(w[1 + i][1 + i].parse::<f64>().unwrap(), 0.0);
    }
    let log = csv_rows(&out.join("benchmark/e_log10.csv"));
    assert_eq!(log.len(), w.len());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("benchmark/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["max_diagonal_w"], 0.0);
}

#[test]
fn missing_prerequisites_are_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = smoke_config();
    let out = tmp.path().to_str().unwrap();
    let (_, err) = run_err(&["benchmark", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert!(err.contains("exact/manifest.json") && err.contains("solve-exact"), "{err}");
    run_ok("solve-exact", &cfg, tmp.path(), &[]);
    let (_, err) = run_err(&["export", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert!(err.contains("master/manifest.json") && err.contains("train-master"), "{err}");
}

#[test]
fn prior_artifacts_must_come_from_the_same_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = smoke_config();
    run_ok("solve-exact", &cfg, tmp.path(), &[]);
    run_ok("train-master", &cfg, tmp.path(), &["--seed", "2"]);
    let (_, err) = run_err(&["benchmark", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(err.contains("different environment, seed"), "{err}");
}

#[test]
fn tampered_artifacts_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = smoke_config();
    run_ok("solve-exact", &cfg, tmp.path(), &[]);
    run_ok("train-master", &cfg, tmp.path(), &[]);
    std::fs::write(tmp.path().join("exact/curves_training.csv"), "x").unwrap();
    let (_, err) = run_err(&["benchmark", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(err.contains("curves_training.csv does not match"), "{err}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(smoke_config()).unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, text.replace("master_iterations", "master_iteration")).unwrap();
    let (_, err) = run_err(&["verify", "--config", bad.to_str().unwrap()]);
    assert!(err.contains("master_iteration"), "{err}");
    let unseeded = tmp.path().join("unseeded.toml");
    std::fs::write(&unseeded, text.replace("seed = 1\n", "")).unwrap();
    let (_, err) = run_err(&["verify", "--config", unseeded.to_str().unwrap()]);
    assert!(err.contains("seed"), "{err}");
}

#[test]
fn verify_passes_and_catches_injected_faults() {
    let cfg = smoke_config();
    let cfg = cfg.to_str().unwrap();
    let ok = mfg(&["verify", "--config", cfg]);
    let stdout = String::from_utf8_lossy(&ok.stdout);
    assert!(ok.status.success(), "{stdout}");
    assert_eq!(stdout.matches(": PASS").count(), 3, "{stdout}");

    let (stdout, _) = run_err(&["verify", "--config", cfg, "--inject", "sign-flipped-reward"]);
    assert!(stdout.contains("check monotonicity: FAIL"), "{stdout}");
    assert!(stdout.contains("check gradient_check: PASS"), "{stdout}");

    let (stdout, _) = run_err(&["verify", "--config", cfg, "--inject", "tampered-gradient"]);
    assert!(stdout.contains("check gradient_check: FAIL"), "{stdout}");
    assert!(stdout.contains("check monotonicity: PASS"), "{stdout}");
}

#[test]
fn verify_writes_a_report_when_given_an_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok("verify", &smoke_config(), tmp.path(), &[]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("verify/report.json")).unwrap()).unwrap();
    let names: Vec<&str> = report.as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["monotonicity", "gradient_check", "oracle_equivalence"]);
}

#[test]
fn dqn_mode_trains_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok("train-master", &smoke_config(), tmp.path(), &["--mode", "dqn"]);
    assert_eq!(manifest(&tmp.path().join("master"))["config"]["fp"]["mode"], "dqn");
    let curve = csv_rows(&tmp.path().join("master/unconditioned_curve.csv"));
    assert_eq!(curve.len(), 3);
}
