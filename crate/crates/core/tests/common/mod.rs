//! Shared helpers for the integration suites.

use std::path::{Path, PathBuf};

use ringdepth_core::harness::{RoundParams, TrainConfig};
use ringdepth_core::scene::{default_scene_with, SceneSpec};

/// Fresh temp dir under the target-adjacent tmp root.
pub fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ringdepth_it_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}

/// Writes a scene and returns its path.
pub fn write_scene(dir: &Path, spec: &SceneSpec) -> PathBuf {
    let path = dir.join("scene.json");
    spec.save(&path).expect("scene save");
    path
}

/// Small scene + config for fast pipeline tests.
#[allow(dead_code)]
pub fn tiny_setup(tag: &str, n_frames: usize, steps: (u64, u64)) -> (TrainConfig, PathBuf) {
    let dir = temp_dir(tag);
    let mut spec = default_scene_with(9, 3, 32, 64, true);
    spec.n_frames = n_frames;
    let scene_path = write_scene(&dir, &spec);
    let mut cfg = TrainConfig::for_scene(scene_path);
    cfg.seed = 5;
    cfg.network.n_heads = 2;
    cfg.network.nca_global_depth = 1;
    cfg.train.rounds = vec![
        RoundParams { steps: steps.0, learning_rate: 6e-5, sigma1: 0.1, filter_ratio: 0.0 },
        RoundParams { steps: steps.1, learning_rate: 5e-5, sigma1: 0.005, filter_ratio: 1.0 / 3.0 },
    ];
    cfg.eval.frame_stride = 3;
    let out = dir.join("out");
    cfg.out_dir = Some(out.clone());
    (cfg, out)
}
