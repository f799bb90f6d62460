//! Run configuration: JSON schema, defaults, and validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::harness::HarnessError;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    F64,
    F32,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EvalMode {
    #[serde(rename = "scale-aware")]
    #[default]
    ScaleAware,
    #[serde(rename = "median-scaled")]
    MedianScaled,
}

impl std::str::FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scale-aware" => Ok(EvalMode::ScaleAware),
            "median-scaled" => Ok(EvalMode::MedianScaled),
            other => Err(format!("unknown mode {other:?} (scale-aware | median-scaled)")),
        }
    }
}

/// One progressive training round.
#[derive(Serialize, Deserialize, Clone, Copy, Debug)]
pub struct RoundParams {
    pub steps: u64,
    pub learning_rate: f64,
    pub sigma1: f64,
    /// Fraction of matched points dropped by loss ranking (active from
    /// round 2 on).
    pub filter_ratio: f64,
}

fn default_rounds() -> Vec<RoundParams> {
    vec![
        RoundParams { steps: 600, learning_rate: 6e-5, sigma1: 0.1, filter_ratio: 0.0 },
        RoundParams { steps: 600, learning_rate: 5e-5, sigma1: 0.005, filter_ratio: 1.0 / 3.0 },
    ]
}

fn default_true() -> bool {
    true
}

fn one() -> usize {
    1
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

fn default_sigma2() -> f64 {
    0.5
}

fn default_p1() -> f64 {
    0.5
}

fn default_p2() -> f64 {
    1.0 / 6.0
}

fn default_alpha() -> f64 {
    0.85
}

fn default_log_every() -> u64 {
    10
}

fn default_frame_cache() -> usize {
    48
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TrainParams {
    #[serde(default = "default_rounds")]
    pub rounds: Vec<RoundParams>,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_eps")]
    pub adam_eps: f64,
    /// Photometric weight.
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    /// Full-resolution loss weight.
    #[serde(default = "default_p1")]
    pub p1: f64,
    /// Per-auxiliary-resolution loss weight.
    #[serde(default = "default_p2")]
    pub p2: f64,
    /// SSIM mixing weight of the photometric loss.
    #[serde(default = "default_alpha")]
    pub ssim_alpha: f64,
    /// Timestamps per optimizer step (each carries all N views).
    #[serde(default = "one")]
    pub batch_size: usize,
    #[serde(default = "default_true")]
    pub temporal_warps: bool,
    #[serde(default = "default_true")]
    pub spatial_warps: bool,
    /// Sparse pseudo-ground-truth supervision on/off.
    #[serde(default = "default_true")]
    pub sfm_supervision: bool,
    /// Optional external match file (JSON lines) injected in place of the
    /// built-in matcher.
    #[serde(default)]
    pub match_file: Option<PathBuf>,
    #[serde(default = "default_log_every")]
    pub log_every: u64,
    /// Rendered-frame cache size (timestamps).
    #[serde(default = "default_frame_cache")]
    pub frame_cache: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug)]
pub struct EvalParams {
    #[serde(default)]
    pub mode: EvalMode,
    #[serde(default = "default_max_depth")]
    pub max_depth: f64,
    /// Evaluate every k-th frame.
    #[serde(default = "default_stride")]
    pub frame_stride: usize,
}

fn default_max_depth() -> f64 {
    200.0
}

fn default_stride() -> usize {
    5
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams { mode: EvalMode::default(), max_depth: 200.0, frame_stride: 5 }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct NetworkParams {
    #[serde(default = "default_heads")]
    pub n_heads: usize,
    #[serde(default = "default_nca_depth")]
    pub nca_global_depth: usize,
    #[serde(default = "default_true")]
    pub nca_neighbor_enabled: bool,
    #[serde(default)]
    pub nca_tie_views: bool,
}

fn default_heads() -> usize {
    4
}

fn default_nca_depth() -> usize {
    3
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            n_heads: 4,
            nca_global_depth: 3,
            nca_neighbor_enabled: true,
            nca_tie_views: false,
        }
    }
}

/// Top-level run configuration (`--config` JSON file).
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TrainConfig {
    /// Path to the scene spec JSON.
    pub scene: PathBuf,
    #[serde(default)]
    pub dtype: Dtype,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory; flag and `RINGDEPTH_OUT` override/default this.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub network: NetworkParams,
    #[serde(default)]
    pub train: TrainParams,
    #[serde(default)]
    pub eval: EvalParams,
}

fn default_seed() -> u64 {
    1
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: TrainConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn for_scene(scene: PathBuf) -> Self {
        TrainConfig {
            scene,
            dtype: Dtype::F64,
            seed: 1,
            out_dir: None,
            network: NetworkParams::default(),
            train: TrainParams::default(),
            eval: EvalParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |msg: String| Err(HarnessError::Config(msg));
        if self.train.rounds.is_empty() {
            return err("at least one training round required".into());
        }
        for (i, round) in self.train.rounds.iter().enumerate() {
            if round.learning_rate <= 0.0 {
                return err(format!("round {i}: learning rate must be positive"));
            }
            if !(0.0..1.0).contains(&round.filter_ratio) {
                return err(format!("round {i}: filter_ratio must be in [0,1)"));
            }
            if round.sigma1 < 0.0 {
                return err(format!("round {i}: sigma1 must be nonnegative"));
            }
        }
        if !(0.0..=1.0).contains(&self.train.ssim_alpha) {
            return err(format!("ssim_alpha {} outside [0,1]", self.train.ssim_alpha));
        }
        for (name, v) in [
            ("sigma2", self.train.sigma2),
            ("p1", self.train.p1),
            ("p2", self.train.p2),
        ] {
            if v < 0.0 {
                return err(format!("{name} must be nonnegative"));
            }
        }
        if !(0.0..1.0).contains(&self.train.adam_beta1)
            || !(0.0..1.0).contains(&self.train.adam_beta2)
        {
            return err("adam betas must be in [0,1)".into());
        }
        if self.train.batch_size == 0 {
            return err("batch_size must be positive".into());
        }
        if self.eval.frame_stride == 0 {
            return err("frame_stride must be positive".into());
        }
        if self.eval.max_depth <= 0.0 {
            return err("max_depth must be positive".into());
        }
        if self.network.nca_global_depth == 0 {
            return err("nca_global_depth must be >= 1".into());
        }
        Ok(())
    }

    /// Output directory resolution: explicit config value, else the
    /// `RINGDEPTH_OUT` environment variable, else `./out`.
    pub fn resolve_out_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return dir.clone();
        }
        if let Ok(env_dir) = std::env::var("RINGDEPTH_OUT") {
            if !env_dir.is_empty() {
                return PathBuf::from(env_dir);
            }
        }
        PathBuf::from("out")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_hyperparameters() {
        let cfg = TrainConfig::for_scene(PathBuf::from("scene.json"));
        assert_eq!(cfg.train.rounds.len(), 2);
        assert_eq!(cfg.train.rounds[0].learning_rate, 6e-5);
        assert_eq!(cfg.train.rounds[1].learning_rate, 5e-5);
        assert_eq!(cfg.train.rounds[0].sigma1, 0.1);
        assert_eq!(cfg.train.rounds[1].sigma1, 0.005);
        assert!((cfg.train.rounds[1].filter_ratio - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(cfg.train.adam_beta1, 0.9);
        assert_eq!(cfg.train.adam_beta2, 0.999);
        assert_eq!(cfg.train.sigma2, 0.5);
        assert_eq!(cfg.train.p1, 0.5);
        assert!((cfg.train.p2 - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(cfg.train.ssim_alpha, 0.85);
        assert_eq!(cfg.network.nca_global_depth, 3);
        cfg.validate().unwrap();
    }

    #[test]
    fn minimal_json_parses_with_defaults() {
        let cfg = TrainConfig::from_json(r#"{"scene": "s.json"}"#).unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.dtype, Dtype::F64);
        assert_eq!(cfg.eval.mode, EvalMode::ScaleAware);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = r#"{"scene": "s.json", "train": {"rounds": [{"steps": 1, "learning_rate": 0.0, "sigma1": 0.1, "filter_ratio": 0.0}]}}"#;
        assert!(TrainConfig::from_json(bad).is_err());
        let bad_ratio = r#"{"scene": "s.json", "train": {"rounds": [{"steps": 1, "learning_rate": 1e-4, "sigma1": 0.1, "filter_ratio": 1.0}]}}"#;
        assert!(TrainConfig::from_json(bad_ratio).is_err());
        let bad_alpha = r#"{"scene": "s.json", "train": {"ssim_alpha": 2.0}}"#;
        assert!(TrainConfig::from_json(bad_alpha).is_err());
    }

    #[test]
    fn eval_mode_parses_cli_spelling() {
        assert_eq!("scale-aware".parse::<EvalMode>().unwrap(), EvalMode::ScaleAware);
        assert_eq!("median-scaled".parse::<EvalMode>().unwrap(), EvalMode::MedianScaled);
        assert!("other".parse::<EvalMode>().is_err());
    }
}
