//! Depth evaluation: the seven standard metrics in both evaluation modes
//! (scale-aware and per-image median-scaled), computed from the same
//! predictions.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::harness::{EvalMode, EvalParams, HarnessError};
use crate::networks::DepthNetwork;
use crate::scalar::Scalar;
use crate::scene::{image_io, render, SceneSpec};
use crate::tensor::{no_grad, Tensor};

/// The seven standard depth metrics, in the conventional column order.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricSet {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

impl MetricSet {
    pub const NAMES: [&'static str; 7] = [
        "abs_rel",
        "sq_rel",
        "rmse",
        "rmse_log",
        "delta_1.25",
        "delta_1.25^2",
        "delta_1.25^3",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.abs_rel,
            self.sq_rel,
            self.rmse,
            self.rmse_log,
            self.delta1,
            self.delta2,
            self.delta3,
        ]
    }
}

/// Metrics of one predicted/ground-truth image pair over the valid pixels
/// (`0 < gt <= max_depth`). Returns `None` when no pixel is valid.
pub fn image_metrics(pred: &[f64], gt: &[f64], max_depth: f64) -> Option<MetricSet> {
    let mut m = MetricSet::default();
    let mut count = 0.0f64;
    for (&d, &g) in pred.iter().zip(gt) {
        if !(g > 0.0 && g <= max_depth) {
            continue;
        }
        let d = d.max(1e-9);
        count += 1.0;
        m.abs_rel += (d - g).abs() / g;
        m.sq_rel += (d - g) * (d - g) / g;
        m.rmse += (d - g) * (d - g);
        m.rmse_log += (d.ln() - g.ln()) * (d.ln() - g.ln());
        let ratio = (d / g).max(g / d);
        if ratio < 1.25 {
            m.delta1 += 1.0;
        }
        if ratio < 1.25 * 1.25 {
            m.delta2 += 1.0;
        }
        if ratio < 1.25 * 1.25 * 1.25 {
            m.delta3 += 1.0;
        }
    }
    if count == 0.0 {
        return None;
    }
    m.abs_rel /= count;
    m.sq_rel /= count;
    m.rmse = (m.rmse / count).sqrt();
    m.rmse_log = (m.rmse_log / count).sqrt();
    m.delta1 /= count;
    m.delta2 /= count;
    m.delta3 /= count;
    Some(m)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default)]
pub struct RuntimeStats {
    pub seconds: f64,
    pub frames_per_second: f64,
}

/// Evaluation outcome: both modes from the same predictions, per-view
/// breakdowns, the overall prediction/ground-truth median ratio, and
/// runtime statistics.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub scale_aware: MetricSet,
    pub median_scaled: MetricSet,
    pub per_view_scale_aware: Vec<MetricSet>,
    pub per_view_median_scaled: Vec<MetricSet>,
    /// `median(pred) / median(gt)` over all valid evaluation pixels; 1.0
    /// means the metric scale was learned exactly.
    pub median_pred_over_gt: f64,
    pub n_frames: usize,
    pub n_views: usize,
    pub max_depth: f64,
    pub runtime: RuntimeStats,
}

impl EvalReport {
    pub fn primary(&self) -> &MetricSet {
        match self.mode {
            EvalMode::ScaleAware => &self.scale_aware,
            EvalMode::MedianScaled => &self.median_scaled,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report json")
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Io(e.to_string()))
    }
}

/// Optional per-view map dumps for the report stage (written for the last
/// evaluated frame).
pub struct EvalArtifacts {
    pub dir: std::path::PathBuf,
}

/// Evaluates a depth network over every `frame_stride`-th frame of the
/// scene. Pure: same weights and scene produce an identical report
/// (runtime stats aside).
pub fn evaluate<S: Scalar>(
    depth_net: &DepthNetwork<S>,
    spec: &SceneSpec,
    params: &EvalParams,
    artifacts: Option<&EvalArtifacts>,
) -> Result<EvalReport, HarnessError> {
    let started = Instant::now();
    let rig = spec.rig::<S>()?;
    let n_views = rig.n_cameras();
    let frames: Vec<usize> = (0..spec.n_frames).step_by(params.frame_stride.max(1)).collect();
    if frames.is_empty() {
        return Err(HarnessError::Config("no frames to evaluate".into()));
    }

    let mut overall_sa: Vec<MetricSet> = Vec::new();
    let mut overall_ms: Vec<MetricSet> = Vec::new();
    let mut per_view_sa: Vec<Vec<MetricSet>> = vec![Vec::new(); n_views];
    let mut per_view_ms: Vec<Vec<MetricSet>> = vec![Vec::new(); n_views];
    let mut all_pred: Vec<f64> = Vec::new();
    let mut all_gt: Vec<f64> = Vec::new();

    for (fi, &frame) in frames.iter().enumerate() {
        let rendered = render::<S>(spec, frame)?;
        let shape = rendered.images[0].shape().to_vec();
        let (h, w) = (shape[1], shape[2]);
        let stacked = {
            let views: Vec<Tensor<S>> = rendered
                .images
                .iter()
                .map(|img| img.reshape(vec![1, 1, 3, h, w]).expect("view"))
                .collect();
            let refs: Vec<&Tensor<S>> = views.iter().collect();
            Tensor::concat(&refs, 1)?
        };
        let outputs = no_grad(|| depth_net.forward(&stacked))?;
        for cam in 0..n_views {
            let pred: Vec<f64> = outputs
                .fused
                .narrow(1, cam, 1)?
                .data()
                .iter()
                .map(|v| v.to_f64().unwrap_or(0.0))
                .collect();
            let gt: Vec<f64> = rendered.depths[cam]
                .data()
                .iter()
                .map(|v| v.to_f64().unwrap_or(0.0))
                .collect();
            let valid: Vec<(f64, f64)> = pred
                .iter()
                .zip(&gt)
                .filter(|&(_, &g)| g > 0.0 && g <= params.max_depth)
                .map(|(&d, &g)| (d, g))
                .collect();
            if valid.is_empty() {
                continue;
            }
            all_pred.extend(valid.iter().map(|&(d, _)| d));
            all_gt.extend(valid.iter().map(|&(_, g)| g));
            if let Some(m) = image_metrics(&pred, &gt, params.max_depth) {
                overall_sa.push(m);
                per_view_sa[cam].push(m);
            }
            // per-image median scaling
            let mut dv: Vec<f64> = valid.iter().map(|&(d, _)| d).collect();
            let mut gv: Vec<f64> = valid.iter().map(|&(_, g)| g).collect();
            let scale = median(&mut gv) / median(&mut dv).max(1e-12);
            let scaled: Vec<f64> = pred.iter().map(|d| d * scale).collect();
            if let Some(m) = image_metrics(&scaled, &gt, params.max_depth) {
                overall_ms.push(m);
                per_view_ms[cam].push(m);
            }
            if fi + 1 == frames.len() {
                if let Some(art) = artifacts {
                    dump_view_maps(art, cam, &pred, &gt, h, w, params.max_depth)?;
                }
            }
        }
    }
    if overall_sa.is_empty() {
        return Err(HarnessError::Config("no valid ground-truth pixels in evaluation".into()));
    }

    let mean = |sets: &[MetricSet]| -> MetricSet {
        let n = sets.len().max(1) as f64;
        let mut out = MetricSet::default();
        for s in sets {
            out.abs_rel += s.abs_rel / n;
            out.sq_rel += s.sq_rel / n;
            out.rmse += s.rmse / n;
            out.rmse_log += s.rmse_log / n;
            out.delta1 += s.delta1 / n;
            out.delta2 += s.delta2 / n;
            out.delta3 += s.delta3 / n;
        }
        out
    };
    let seconds = started.elapsed().as_secs_f64();
    Ok(EvalReport {
        mode: params.mode,
        scale_aware: mean(&overall_sa),
        median_scaled: mean(&overall_ms),
        per_view_scale_aware: per_view_sa.iter().map(|v| mean(v)).collect(),
        per_view_median_scaled: per_view_ms.iter().map(|v| mean(v)).collect(),
        median_pred_over_gt: median(&mut all_pred.clone()) / median(&mut all_gt.clone()),
        n_frames: frames.len(),
        n_views,
        max_depth: params.max_depth,
        runtime: RuntimeStats {
            seconds,
            frames_per_second: frames.len() as f64 / seconds.max(1e-9),
        },
    })
}

fn dump_view_maps(
    artifacts: &EvalArtifacts,
    cam: usize,
    pred: &[f64],
    gt: &[f64],
    h: usize,
    w: usize,
    max_depth: f64,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(&artifacts.dir)?;
    let pred_t = Tensor::from_vec(vec![1, h, w], pred.to_vec())?;
    let gt_t = Tensor::from_vec(vec![1, h, w], gt.to_vec())?;
    let err: Vec<f64> = pred
        .iter()
        .zip(gt)
        .map(|(&d, &g)| {
            if g > 0.0 && g <= max_depth {
                (d - g).abs() / g
            } else {
                0.0
            }
        })
        .collect();
    let err_t = Tensor::from_vec(vec![1, h, w], err)?;
    let base = &artifacts.dir;
    image_io::write_pfm(&base.join(format!("view{cam}_depth.pfm")), &pred_t)?;
    image_io::write_pfm(&base.join(format!("view{cam}_gt.pfm")), &gt_t)?;
    image_io::write_pfm(&base.join(format!("view{cam}_abs_rel.pfm")), &err_t)?;
    Ok(())
}
