//! Report emission: metrics tables (CSV + text), per-view depth and error
//! maps (PFM + PPM), and loss curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::harness::{EvalReport, HarnessError, MetricSet};
use crate::scene::image_io;
use crate::tensor::Tensor;

fn metric_row(out: &mut String, mode: &str, view: &str, m: &MetricSet) {
    let v = m.values();
    let _ = write!(out, "{mode},{view}");
    for value in v {
        let _ = write!(out, ",{value:.9e}");
    }
    let _ = writeln!(out);
}

/// Writes the report files into `dir`:
/// - `metrics.csv` / `metrics.txt` — the seven metrics per mode and view
/// - `view{n}_depth.{pfm,ppm}`, `view{n}_abs_rel.{pfm,ppm}`, `view{n}_gt.pfm`
///   when `eval_maps` holds the dumps written by evaluation
/// - `loss_curves.csv` when a training log is supplied
///
/// Returns the written paths. Deterministic: identical inputs produce
/// byte-identical files.
pub fn write_report(
    report: &EvalReport,
    eval_maps: Option<&Path>,
    train_log: Option<&Path>,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();

    // CSV: identifying columns then exactly the seven metric columns
    let mut csv = String::from("mode,view");
    for name in MetricSet::NAMES {
        let _ = write!(csv, ",{name}");
    }
    let _ = writeln!(csv);
    metric_row(&mut csv, "scale-aware", "all", &report.scale_aware);
    metric_row(&mut csv, "median-scaled", "all", &report.median_scaled);
    for (view, m) in report.per_view_scale_aware.iter().enumerate() {
        metric_row(&mut csv, "scale-aware", &view.to_string(), m);
    }
    for (view, m) in report.per_view_median_scaled.iter().enumerate() {
        metric_row(&mut csv, "median-scaled", &view.to_string(), m);
    }
    let csv_path = dir.join("metrics.csv");
    std::fs::write(&csv_path, &csv)?;
    written.push(csv_path);

    // plain-text table
    let mut txt = String::new();
    let _ = writeln!(txt, "evaluation over {} frames x {} views (max depth {} m)", report.n_frames, report.n_views, report.max_depth);
    let _ = writeln!(txt, "median(pred)/median(gt) = {:.6}", report.median_pred_over_gt);
    let _ = writeln!(txt);
    let _ = write!(txt, "{:<16}", "mode");
    for name in MetricSet::NAMES {
        let _ = write!(txt, "{name:>14}");
    }
    let _ = writeln!(txt);
    for (mode, m) in [
        ("scale-aware", &report.scale_aware),
        ("median-scaled", &report.median_scaled),
    ] {
        let _ = write!(txt, "{mode:<16}");
        for v in m.values() {
            let _ = write!(txt, "{v:>14.6}");
        }
        let _ = writeln!(txt);
    }
    let txt_path = dir.join("metrics.txt");
    std::fs::write(&txt_path, &txt)?;
    written.push(txt_path);

    // per-view maps from the evaluation dumps
    if let Some(maps_dir) = eval_maps {
        for view in 0..report.n_views {
            for kind in ["depth", "abs_rel", "gt"] {
                let src = maps_dir.join(format!("view{view}_{kind}.pfm"));
                if !src.exists() {
                    continue;
                }
                let (c, h, w, data) = image_io::read_pfm(&src)?;
                debug_assert_eq!(c, 1);
                let t = Tensor::from_vec(vec![1, h, w], data.clone())?;
                let dst_pfm = dir.join(format!("view{view}_{kind}.pfm"));
                image_io::write_pfm(&dst_pfm, &t)?;
                written.push(dst_pfm);
                let dst_ppm = dir.join(format!("view{view}_{kind}.ppm"));
                if kind == "abs_rel" {
                    image_io::write_error_ppm(&dst_ppm, &t, 0.5)?;
                } else {
                    // normalize depth for viewing
                    let max = data.iter().copied().fold(1e-9f64, f64::max);
                    let normed = t.mul_scalar(1.0 / max);
                    image_io::write_ppm(&dst_ppm, &normed)?;
                }
                written.push(dst_ppm);
            }
        }
    }

    // loss curves: a cleaned copy of the training log
    if let Some(log) = train_log {
        if log.exists() {
            let text = std::fs::read_to_string(log)?;
            let curves_path = dir.join("loss_curves.csv");
            std::fs::write(&curves_path, text)?;
            written.push(curves_path);
        }
    }
    Ok(written)
}
