//! Pseudo-ground-truth quality probe: match, triangulate, and compare
//! against the renderer's exact depth.

use ringdepth_core::scene::{default_ring_scene, render};
use ringdepth_core::sfm::{build_pseudo_gt, match_overlap};

fn main() {
    let spec = default_ring_scene(7);
    let rig = spec.rig::<f64>().unwrap();
    let mut total_pts = 0usize;
    let mut errs: Vec<f64> = Vec::new();
    for frame in [1usize, 50, 120] {
        let rendered = render::<f64>(&spec, frame).unwrap();
        let matches = match_overlap(&rendered.images, &rig);
        let (targets, stats) = build_pseudo_gt(&matches, &rig);
        println!(
            "frame {frame}: {} matches, accepted {}, rej(res {}, deg {}, behind {})",
            matches.total_matches(),
            stats.accepted,
            stats.rejected_residual,
            stats.rejected_degenerate,
            stats.rejected_behind
        );
        for target in &targets {
            let (h, w) = (96usize, 160usize);
            let gt = &rendered.depths[target.camera_id];
            for p in &target.points {
                let gt_d = gt.data()[(p.v as usize).min(h - 1) * w + (p.u as usize).min(w - 1)];
                errs.push(((p.depth - gt_d) / gt_d).abs());
                total_pts += 1;
            }
        }
    }
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pct = |q: f64| errs[((errs.len() as f64 - 1.0) * q) as usize];
    println!(
        "{} points, |rel depth err|: p50 {:.4} p80 {:.4} p95 {:.4} max {:.4}",
        total_pts,
        pct(0.5),
        pct(0.8),
        pct(0.95),
        pct(1.0)
    );
}
