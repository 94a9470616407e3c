use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_slimrnn"));
    cmd.env_remove("SLIMRNN_SEED");
    cmd
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn train_into(dir: &Path) -> Output {
    run(bin()
        .arg("train")
        .arg("--config")
        .arg(fixture("small.json"))
        .arg("--data")
        .arg(fixture("tweets.csv"))
        .arg("--out")
        .arg(dir))
}

#[test]
fn train_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = train_into(dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for f in ["checkpoint.json", "metrics.json", "epochs.csv", "ingest.json", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("Model\tPositive (%)\tNegative (%)\tOverall"));

    let epochs = std::fs::read_to_string(dir.path().join("epochs.csv")).unwrap();
    assert_eq!(epochs.lines().next(), Some("epoch,loss,accuracy"));
    assert_eq!(epochs.lines().count(), 4);

    let ingest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ingest.json")).unwrap()).unwrap();
    assert_eq!(ingest["total_rows"], 50);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["dataset"]["rows"], 50);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn rerun_gives_identical_metrics() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(train_into(a.path()).status.success());
    assert!(train_into(b.path()).status.success());
    for f in ["metrics.json", "epochs.csv", "checkpoint.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"variant": "LSTM1", "seed": 1, "learning_rate": 0.1}"#).unwrap();
    let out = run(bin()
        .arg("train")
        .arg("--config")
        .arg(&config)
        .arg("--data")
        .arg(fixture("tweets.csv"))
        .arg("--out")
        .arg(dir.path().join("out")));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("learning_rate"), "{}", stderr(&out));
}

#[test]
fn missing_seed_is_a_usage_error_unless_the_environment_supplies_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("noseed.json");
    let text = std::fs::read_to_string(fixture("small.json")).unwrap();
    std::fs::write(&config, text.replace("\"seed\": 11,", "")).unwrap();
    let args = |cmd: &mut Command, out: &str| {
        cmd.arg("train")
            .arg("--config")
            .arg(&config)
            .arg("--data")
            .arg(fixture("tweets.csv"))
            .arg("--out")
            .arg(dir.path().join(out));
    };
    let mut cmd = bin();
    args(&mut cmd, "a");
    assert_eq!(run(&mut cmd).status.code(), Some(1));

    let mut cmd = bin();
    args(&mut cmd, "b");
    cmd.env("SLIMRNN_SEED", "11");
    assert_eq!(run(&mut cmd).status.code(), Some(0));
    let manifest = std::fs::read_to_string(dir.path().join("b/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 11"));
}

#[test]
fn missing_column_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("nolabel.csv");
    std::fs::write(&data, "id,text\n1,hello there\n").unwrap();
    let out = run(bin()
        .arg("train")
        .arg("--config")
        .arg(fixture("small.json"))
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("out")));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sentiment"), "{}", stderr(&out));
}

#[test]
fn eval_matches_the_trained_model() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train_into(dir.path()).status.success());
    let out = run(bin()
        .arg("eval")
        .arg("--checkpoint")
        .arg(dir.path().join("checkpoint.json"))
        .arg("--data")
        .arg(fixture("tweets.csv"))
        .arg("--out")
        .arg(dir.path().join("eval")));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("eval/eval.json")).unwrap()).unwrap();
    assert_eq!(eval["samples"], 37);
}

#[test]
fn corrupt_checkpoint_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("checkpoint.json");
    std::fs::write(&ckpt, "{\"format_version\": 1}").unwrap();
    let out = run(bin()
        .arg("eval")
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--data")
        .arg(fixture("tweets.csv")));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_prints_one_column_group_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .arg("sweep")
        .arg("--config")
        .arg(fixture("small.json"))
        .arg("--data")
        .arg(fixture("tweets.csv"))
        .args(["--axis", "batch_size", "--values", "8,16", "--rows", "LSTM0,LSTM6"])
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].contains("BS=8 Pos") && lines[0].contains("BS=16 Overall"));
    assert!(lines[1].starts_with("LSTM0\t"));
    assert_eq!(lines[2].split('\t').count(), 7);
    assert!(dir.path().join("sweep.json").is_file());
    assert!(dir.path().join("sweep.tsv").is_file());
}

#[test]
fn count_params_prints_the_count() {
    let out = run(bin().args(["count-params", "LSTM6", "128", "64"]));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "12352");
    let out = run(bin().args(["count-params", "LSTM9", "128", "64"]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gradcheck_cells_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .args(["gradcheck", "cells", "--tol", "1e-5", "--seeds", "3", "--out"])
        .arg(dir.path()));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.path().join("gradcheck.json").is_file());
}

#[test]
fn gradcheck_with_an_impossible_tolerance_exits_numeric() {
    let out = run(bin().args(["gradcheck", "LSTM1", "--tol", "1e-300", "--seeds", "2"]));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_invocations_exit_one() {
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(1));
    assert_eq!(run(bin().args(["gradcheck", "nothing"])).status.code(), Some(1));
    assert_eq!(run(bin().arg("--help")).status.code(), Some(0));
}
