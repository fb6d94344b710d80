use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dnop_core::seed::sha256_hex;

const SMALL: &str = r#"
seed = 7

[grid]
n_space = 80
n_time = 12

[strikes]
list = [90.0, 95.0, 100.0, 105.0, 110.0, 115.0, 120.0]
test = [95.0, 105.0]

[operator]
n_sensors = 16
latent = 16
branch_hidden = [32, 32]
trunk_hidden = [32, 32]

[train]
epochs = 80
batch_size = 256
learning_rate = 3e-3
final_learning_rate = 1e-4
"#;

fn dnop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnop"))
        .arg("--config")
        .arg(dir.join("run.toml"))
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup(extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), format!("{SMALL}{extra}")).unwrap();
    dir
}

/// File hashes, leaving out the recorded config since it names the output directory.
fn hashes(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "run_config.toml")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), sha256_hex(&fs::read(&p).unwrap())))
        .collect();
    out.sort();
    out
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn pipeline_end_to_end() {
    let dir = setup("");
    let gen = dnop(dir.path(), &["gen-data"]);
    assert!(gen.status.success(), "{}", stderr(&gen));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/dataset/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["surfaces"].as_array().unwrap().len(), 7);
    assert_eq!(manifest["test_strikes"], serde_json::json!([95.0, 105.0]));
    assert!(manifest["surfaces"][0]["sha256"].as_str().unwrap().len() == 64);

    let train = dnop(dir.path(), &["train"]);
    assert!(train.status.success(), "{}", stderr(&train));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/model/train_report.json")).unwrap()).unwrap();
    assert!(report["final_train_loss"].as_f64().unwrap() < 1e-3);
    assert!(dir.path().join("out/model/loss_curve.csv").exists());
    assert!(dir.path().join("out/model/run_config.toml").exists());

    let eval = dnop(dir.path(), &["eval"]);
    assert!(eval.status.success(), "{}", stderr(&eval));
    assert!(dir.path().join("out/eval/predicted_K95.csv").exists());

    for k in ["113", "120"] {
        let b = dnop(dir.path(), &["boundary", "--strike", k]);
        assert!(b.status.success(), "{}", stderr(&b));
        let csv = fs::read_to_string(dir.path().join(format!("out/boundary/boundary_K{k}.csv"))).unwrap();
        assert!(csv.starts_with("t,b_fd,b_model,node_distance\n"));
        assert_eq!(csv.lines().count(), 14);
    }
    let low = dnop(dir.path(), &["boundary", "--strike", "85"]);
    assert_eq!(low.status.code(), Some(2));
    assert!(stderr(&low).contains("[90, 120]"), "{}", stderr(&low));
}

#[test]
fn reruns_are_bitwise_identical_and_seed_matters() {
    let a = setup("");
    let b = setup("");
    for d in [&a, &b] {
        assert!(dnop(d.path(), &["gen-data"]).status.success());
        assert!(dnop(d.path(), &["train"]).status.success());
    }
    for sub in ["out/dataset", "out/model"] {
        assert_eq!(hashes(&a.path().join(sub)), hashes(&b.path().join(sub)));
    }
    let c = setup("");
    assert!(dnop(c.path(), &["gen-data"]).status.success());
    assert!(dnop(c.path(), &["--seed", "8", "train"]).status.success());
    let ckpt = |d: &tempfile::TempDir| fs::read(d.path().join("out/model/operator.ckpt")).unwrap();
    assert_ne!(ckpt(&a), ckpt(&c));
    let worst_test = |d: &tempfile::TempDir| {
        let r: serde_json::Value =
            serde_json::from_slice(&fs::read(d.path().join("out/model/train_report.json")).unwrap()).unwrap();
        r["test_metrics"].as_array().unwrap().iter().map(|m| m["relative_l2"].as_f64().unwrap()).fold(0.0, f64::max)
    };
    let ratio = worst_test(&c) / worst_test(&a);
    assert!((0.5..=2.0).contains(&ratio), "{ratio}");
}

#[test]
fn missing_dataset_names_manifest() {
    let dir = setup("");
    let o = dnop(dir.path(), &["train"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("manifest.json"), "{}", stderr(&o));
}

#[test]
fn out_of_range_strike_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "[grid]\nn_space = 40\nn_time = 5\n[strikes]\nlist = [100.0, 200.0]\ntest = []\n").unwrap();
    let o = dnop(dir.path(), &["gen-data"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("outside the trained range"), "{}", stderr(&o));
}

#[test]
fn usage_errors() {
    let dir = setup("");
    let o = dnop(dir.path(), &["verify", ""]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("assumptions, approximation, lipschitz, oracles"));
    fs::write(dir.path().join("run.toml"), "bogus = 1\n").unwrap();
    assert_eq!(dnop(dir.path(), &["gen-data"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_dnop")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_oracles_and_pricing_commands() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "").unwrap();
    let o = dnop(dir.path(), &["verify", "oracles"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/verify/oracles.json")).unwrap()).unwrap();
    let names: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"put_call_parity_max_error"));
    assert!(names.contains(&"crr_step_halving_gap"));

    let bs = dnop(dir.path(), &["bs-price", "--strike", "100"]);
    let q: serde_json::Value = serde_json::from_slice(&bs.stdout).unwrap();
    assert!((q["put"].as_f64().unwrap() - 3.7534).abs() < 1e-3, "{q}");
    let crr = dnop(dir.path(), &["crr-price", "--strike", "100", "--steps", "500"]);
    let q: serde_json::Value = serde_json::from_slice(&crr.stdout).unwrap();
    assert!(q["put"].as_f64().unwrap() > q["european_put"].as_f64().unwrap());
}

#[test]
fn failing_verification_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "[verify]\nlipschitz_paths = 500\nlipschitz_strikes = [100.0, 110.0]\nlipschitz_margin = -1.5\n").unwrap();
    let o = dnop(dir.path(), &["verify", "lipschitz"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("lipschitz_K"), "{}", stderr(&o));
}
