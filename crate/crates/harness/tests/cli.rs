//! Drives the `purl` binary end to end on a small task.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use purl_harness::records::{read_records, CSV_HEADER};

const SMALL: &str = r#"{
  "data": {"synthetic": {"features": 6, "train_examples": 400, "test_examples": 200, "noise": 1.0}},
  "model": {"hidden_sizes": [12, 12], "pretrain_epochs": 5},
  "env": {"retrain_subset_size": 64},
  "agent": {"hidden_sizes": [16], "epsilon_decay_steps": 20, "updates_per_step": 2},
  "driver": {"max_episodes": 6, "fine_tune_epochs": 2}
}"#;

fn purl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_purl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.json");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn prune_writes_metrics_result_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    let o = purl(&["prune", "--config", &cfg, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    let recs = read_records(&out.join("metrics.csv")).unwrap();
    assert!(recs.iter().all(|r| r.seed == 3));
    assert!(recs.iter().any(|r| r.run.ends_with(":finetune")));
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["alphas"].as_array().unwrap().len(), 3);
    let ck = purl_core::nn::Checkpoint::load(out.join("checkpoint.json")).unwrap();
    let reported = result["sparsity"]["global"].as_f64().unwrap();
    assert_eq!(purl_core::pruning::sparsity_report(&ck.network).global, reported);

    let summary = purl(&["summarize", out.join("metrics.csv").to_str().unwrap()]);
    assert_eq!(code(&summary), 0);
    let json: serde_json::Value = serde_json::from_slice(&summary.stdout).unwrap();
    assert_eq!(json["runs"][0]["train_episodes"], 6);
    assert_eq!(json["runs"][0]["terminal_sparsity"].as_f64().unwrap(), reported);
}

#[test]
fn train_then_prune_with_saved_agent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let t = dir.path().join("train");
    let o = purl(&["train", "--config", &cfg, "--out", t.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(t.join("qnet.json").exists());
    let p = dir.path().join("prune");
    let qnet = t.join("qnet.json");
    let o = purl(&[
        "prune",
        "--config",
        &cfg,
        "--agent",
        qnet.to_str().unwrap(),
        "--out",
        p.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let recs = read_records(&p.join("metrics.csv")).unwrap();
    assert!(recs.iter().all(|r| !r.run.ends_with(":train")));
    assert!(recs.iter().any(|r| r.run.ends_with(":stage2")));

    // a model checkpoint is not a Q-network
    let o = purl(&[
        "prune",
        "--config",
        &cfg,
        "--agent",
        p.join("checkpoint.json").to_str().unwrap(),
        "--out",
        p.to_str().unwrap(),
    ]);
    assert_ne!(code(&o), 0);
}

#[test]
fn gen_data_round_trips_through_dir_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let cfg = write_config(dir.path(), SMALL);
    let o = purl(&[
        "gen-data",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(data.join("train.csv").exists() && data.join("meta.json").exists());
    let dir_cfg = SMALL.replace(
        r#""synthetic": {"features": 6, "train_examples": 400, "test_examples": 200, "noise": 1.0}"#,
        &format!(r#""dir": {:?}"#, data.display().to_string()),
    );
    let cfg2 = write_config(dir.path(), &dir_cfg);
    let o = purl(&[
        "baseline",
        "--config",
        &cfg2,
        "--sparsity",
        "0.5",
        "--out",
        dir.path().join("b").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("baseline: accuracy"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();

    let bad = write_config(
        dir.path(),
        r#"{"env": {"target_sparsity": 0.6, "rewrd_mode": "dense"}}"#,
    );
    assert_eq!(code(&purl(&["prune", "--config", &bad, "--out", out])), 2);
    assert_eq!(
        code(&purl(&["prune", "--config", "/nonexistent.json", "--out", out])),
        2
    );

    let data = dir.path().join("data");
    let o = purl(&[
        "gen-data",
        "--config",
        &write_config(dir.path(), SMALL),
        "--out",
        data.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    fs::write(data.join("train.csv"), "label,x0\n0,nan-ish\n").unwrap();
    let dir_cfg = format!(r#"{{"data": {{"dir": {:?}}}}}"#, data.display().to_string());
    assert_eq!(
        code(&purl(&[
            "baseline",
            "--config",
            &write_config(dir.path(), &dir_cfg),
            "--out",
            out
        ])),
        3
    );

    let idx_cfg = r#"{"data": {"idx": {"train_images": "/dev/null", "train_labels": "/dev/null", "test_images": "/dev/null", "test_labels": "/dev/null"}}}"#;
    assert_eq!(
        code(&purl(&[
            "baseline",
            "--config",
            &write_config(dir.path(), idx_cfg),
            "--out",
            out
        ])),
        3
    );

    let blowup = SMALL.replace(
        r#""pretrain_epochs": 5"#,
        r#""pretrain_epochs": 5, "pretrain": {"lr": 1e300, "batch_size": 32}"#,
    );
    assert_eq!(
        code(&purl(&[
            "prune",
            "--config",
            &write_config(dir.path(), &blowup),
            "--out",
            out
        ])),
        4
    );
}

#[test]
fn ablate_resumes_finished_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"trials": 2, "configs": [{"id": "dense"}, {"id": "sparse", "reward_mode": "sparse"}]}"#,
    )
    .unwrap();
    let out = dir.path().join("abl");
    let args = [
        "ablate",
        "--config",
        &cfg,
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    let first = purl(&args);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let text = String::from_utf8_lossy(&first.stdout).to_string();
    assert!(text.contains("dense") && text.contains("sparse") && text.contains('±'));
    let marker = out.join("sparse").join("trial-1").join("metrics.csv");
    let before = fs::metadata(&marker).unwrap().modified().unwrap();
    let second = purl(&args);
    assert_eq!(code(&second), 0);
    assert_eq!(fs::metadata(&marker).unwrap().modified().unwrap(), before);
    assert_eq!(String::from_utf8_lossy(&second.stdout), text);
    let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
