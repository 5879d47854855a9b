//! End-to-end tests of the command-line surface, driving the real binary.

use std::path::Path;
use std::process::Command;

use scgc::pipeline::TrainConfig;

fn scgc_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scgc"))
}

fn run_ok(args: &[&str]) -> String {
    let output = scgc_bin().args(args).output().expect("binary runs");
    assert!(
        output.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn synth_pretrain_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sbm");
    let pre = dir.path().join("pre");
    let run = dir.path().join("run");

    run_ok(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--blocks",
        "100,100,100",
        "--p-in",
        "0.1",
        "--p-out",
        "0.01",
        "--feature-dim",
        "16",
        "--noise-sigma",
        "0.5",
        "--seed",
        "0",
    ]);
    assert!(data.join("features.tsv").exists());
    assert!(data.join("edges.txt").exists());
    assert!(data.join("labels.txt").exists());

    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
            "ae_dims": [32, 8],
            "alpha": 40.0,
            "beta": 0.1,
            "tau": 0.5,
            "k": 3,
            "cluster_count": 3,
            "batch_size": 64,
            "full_batch": true,
            "pretrain_epochs": 30,
            "lr_train": 0.04,
            "variant": "scgc-star",
            "seed": 0
        }"#,
    )
    .unwrap();

    run_ok(&[
        "pretrain",
        "--data",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        pre.to_str().unwrap(),
    ]);
    assert!(pre.join("checkpoint.json").exists());
    assert!(pre.join("pretrain_history.jsonl").exists());

    run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--checkpoint",
        pre.join("checkpoint.json").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
    ]);
    for artifact in ["config.json", "history.jsonl", "checkpoint.json", "metrics.json", "embeddings.tsv"] {
        assert!(run.join(artifact).exists(), "missing {artifact}");
    }

    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
    let acc = metrics["acc"].as_f64().unwrap();
    assert!(acc >= 0.95, "end-to-end accuracy {acc}");

    // config snapshot re-parses to an identical TrainConfig
    let snapshot = TrainConfig::from_json_str(
        &std::fs::read_to_string(run.join("config.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(snapshot.alpha, 40.0);
    assert_eq!(snapshot.hops, 3);
    let re_serialized = snapshot.to_json_string().unwrap();
    assert_eq!(snapshot, TrainConfig::from_json_str(&re_serialized).unwrap());

    // eval from the trained checkpoint reproduces the reported metrics
    let eval_out = dir.path().join("eval");
    let stdout = run_ok(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--checkpoint",
        run.join("checkpoint.json").to_str().unwrap(),
        "--out",
        eval_out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("\"acc\""));
    let eval_metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_out.join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(eval_metrics["acc"], metrics["acc"]);
    assert!(eval_out.join("embeddings.tsv").exists());

    // one embedding row per node
    let embeddings = std::fs::read_to_string(run.join("embeddings.tsv")).unwrap();
    assert_eq!(embeddings.lines().count(), 300);
}

#[test]
fn flag_overrides_land_in_the_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sbm");
    run_ok(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--blocks",
        "10,10",
        "--feature-dim",
        "4",
        "--p-in",
        "0.8",
        "--p-out",
        "0.05",
    ]);
    let out = dir.path().join("pre");
    run_ok(&[
        "pretrain",
        "--data",
        data.to_str().unwrap(),
        "--variant",
        "scgc-star",
        "--beta",
        "10",
        "--epochs",
        "2",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    let snapshot = TrainConfig::from_json_str(
        &std::fs::read_to_string(out.join("config.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(snapshot.beta, 10.0);
    assert_eq!(snapshot.seed, 7);
    assert_eq!(snapshot.pretrain_epochs, 2);
    assert_eq!(snapshot.cluster_count, 2, "inferred from labels");
}

#[test]
fn eval_without_checkpoint_fails() {
    let output = scgc_bin()
        .args(["eval", "--data", "/nonexistent"])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn unknown_flag_fails() {
    let output = scgc_bin().args(["train", "--bogus"]).output().unwrap();
    assert!(!output.status.success());
}

#[test]
fn invalid_config_fails_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sbm");
    run_ok(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--blocks",
        "5,5",
        "--feature-dim",
        "3",
        "--p-in",
        "0.9",
        "--p-out",
        "0.0",
    ]);
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"alpa": 1.0}"#).unwrap();
    let output = scgc_bin()
        .args([
            "pretrain",
            "--data",
            data.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("alpa") || stderr.contains("invalid config"), "{stderr}");
}

#[test]
fn influence_subcommand_prints_stats() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sbm");
    run_ok(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--blocks",
        "10,10",
        "--feature-dim",
        "4",
        "--p-in",
        "0.5",
        "--p-out",
        "0.05",
    ]);
    let stdout = run_ok(&[
        "influence",
        "--data",
        data.to_str().unwrap(),
        "--hops",
        "2",
        "--mode",
        "cumulative",
    ]);
    assert!(stdout.contains("nodes: 20"));
    assert!(stdout.contains("density:"));
}

#[test]
fn preset_flag_applies_named_settings() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sbm");
    run_ok(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--blocks",
        "8,8,8,8",
        "--feature-dim",
        "6",
        "--p-in",
        "0.8",
        "--p-out",
        "0.02",
    ]);
    let out = dir.path().join("pre");
    // dblp preset has 4 clusters, matching the 4-block fixture; shrink the
    // net and epochs so the test stays quick
    let config = dir.path().join("small.json");
    std::fs::write(&config, r#"{"ae_dims": [8, 4], "pretrain_epochs": 2}"#).unwrap();
    run_ok(&[
        "pretrain",
        "--data",
        data.to_str().unwrap(),
        "--preset",
        "dblp-scgc-star",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let snapshot = TrainConfig::from_json_str(
        &std::fs::read_to_string(out.join("config.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(snapshot.tau, 0.25);
    assert_eq!(snapshot.cluster_count, 4);
    assert_eq!(snapshot.ae_dims, vec![8, 4], "config file overrides preset");
}

#[test]
fn sweep_writes_summary_and_run_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sbm");
    run_ok(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--blocks",
        "12,12",
        "--feature-dim",
        "4",
        "--p-in",
        "0.8",
        "--p-out",
        "0.02",
    ]);
    let grid = dir.path().join("grid.json");
    std::fs::write(
        &grid,
        r#"{
            "base": {"ae_dims": [8, 4], "pretrain_epochs": 2, "train_epochs": 3,
                     "cluster_count": 2, "tau": 0.5},
            "grid": {"alpha": [0.5, 1.0]},
            "seeds": [0, 1]
        }"#,
    )
    .unwrap();
    let out = dir.path().join("sweep");
    run_ok(&[
        "sweep",
        "--data",
        data.to_str().unwrap(),
        "--grid",
        grid.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 4);
    assert_eq!(summary["aggregates"].as_array().unwrap().len(), 2);
    assert!(out.join("combo000/seed0/history.jsonl").exists());
    assert!(out.join("combo001/seed1/metrics.json").exists());
}
