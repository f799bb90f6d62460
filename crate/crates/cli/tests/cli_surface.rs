//! End-to-end CLI checks: every verb, the documented flags, and the exit
//! code contract.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ringdepth"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ringdepth_cli_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, scene: &Path, steps: u64) -> PathBuf {
    let cfg = format!(
        r#"{{
  "scene": {:?},
  "seed": 7,
  "out_dir": {:?},
  "network": {{"n_heads": 2, "nca_global_depth": 1}},
  "train": {{
    "rounds": [
      {{"steps": {steps}, "learning_rate": 1e-3, "sigma1": 0.1, "filter_ratio": 0.0}},
      {{"steps": {steps}, "learning_rate": 1e-3, "sigma1": 0.005, "filter_ratio": 0.3333333333}}
    ]
  }},
  "eval": {{"frame_stride": 2}}
}}"#,
        scene.to_str().unwrap(),
        dir.join("out").to_str().unwrap()
    );
    let path = dir.join("config.json");
    std::fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn full_cli_pipeline_runs() {
    let dir = temp_dir("pipeline");
    let scene = dir.join("scene.json");

    // gen-scene
    let status = bin()
        .args(["gen-scene", "--out"])
        .arg(&scene)
        .args(["--seed", "3", "--frames", "5", "--cameras", "3", "--height", "32", "--width", "64"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(scene.exists());

    let config = write_config(&dir, &scene, 2);

    // train both rounds
    let status = bin().args(["train", "--config"]).arg(&config).status().unwrap();
    assert!(status.success());
    let out = dir.join("out");
    assert!(out.join("final.ckpt").exists());
    assert!(out.join("round1.ckpt").exists());
    assert!(out.join("round2.ckpt").exists());
    assert!(out.join("train_log.csv").exists());

    // eval with mode flag
    let output = bin()
        .args(["eval", "--config"])
        .arg(&config)
        .args(["--mode", "median-scaled"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(out.join("eval_report.json").exists());
    assert!(String::from_utf8_lossy(&output.stdout).contains("MedianScaled"));

    // report
    let status = bin()
        .args(["report", "--report"])
        .arg(out.join("eval_report.json"))
        .args(["--maps"])
        .arg(out.join("eval_maps"))
        .args(["--train-log"])
        .arg(out.join("train_log.csv"))
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("report/metrics.csv").exists());
    assert!(out.join("report/metrics.txt").exists());
    assert!(out.join("report/loss_curves.csv").exists());
    assert!(out.join("report/view0_depth.ppm").exists());
    assert!(out.join("report/view0_abs_rel.pfm").exists());

    // flops
    let output = bin().args(["flops", "--config"]).arg(&config).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("network total"));
    assert!(out.join("flops.json").exists());
}

#[test]
fn round_split_training_resumes_from_round1() {
    let dir = temp_dir("rounds");
    let scene = dir.join("scene.json");
    bin()
        .args(["gen-scene", "--out"])
        .arg(&scene)
        .args(["--seed", "3", "--frames", "4", "--cameras", "3", "--height", "32", "--width", "64"])
        .status()
        .unwrap();
    let config = write_config(&dir, &scene, 2);

    // round 2 without round 1 is a config error (exit code 2)
    let status = bin()
        .args(["train", "--config"])
        .arg(&config)
        .args(["--round", "2"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let status = bin()
        .args(["train", "--config"])
        .arg(&config)
        .args(["--round", "1", "--steps", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("out/round1.ckpt").exists());

    let status = bin()
        .args(["train", "--config"])
        .arg(&config)
        .args(["--round", "2", "--steps", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("out/final.ckpt").exists());
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = temp_dir("badcfg");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\"scene\": \"nonexistent.json\", \"train\": {\"rounds\": []}}").unwrap();
    let output = bin().args(["train", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());

    // missing config file
    let output = bin()
        .args(["train", "--config"])
        .arg(dir.join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn gen_scene_rejects_bad_geometry() {
    let dir = temp_dir("badscene");
    let status = bin()
        .args(["gen-scene", "--out"])
        .arg(dir.join("s.json"))
        .args(["--height", "50", "--width", "64"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = temp_dir("envout");
    let scene = dir.join("scene.json");
    bin()
        .args(["gen-scene", "--out"])
        .arg(&scene)
        .args(["--seed", "3", "--frames", "4", "--cameras", "3", "--height", "32", "--width", "64"])
        .status()
        .unwrap();
    // config WITHOUT out_dir: the environment variable decides
    let cfg = format!(
        r#"{{"scene": {:?}, "network": {{"n_heads": 2, "nca_global_depth": 1}},
            "train": {{"rounds": [{{"steps": 1, "learning_rate": 1e-3, "sigma1": 0.0, "filter_ratio": 0.0}}]}}}}"#,
        scene.to_str().unwrap()
    );
    let config = dir.join("config.json");
    std::fs::write(&config, cfg).unwrap();
    let env_out = dir.join("env_out");
    let status = bin()
        .env("RINGDEPTH_OUT", &env_out)
        .args(["train", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(env_out.join("final.ckpt").exists());
}
