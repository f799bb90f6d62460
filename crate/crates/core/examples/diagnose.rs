//! Post-training diagnostics: pose output, per-head depth structure, and
//! supervision coverage by depth band.

use ringdepth_core::geometry::PoseDelta;
use ringdepth_core::harness::{build_networks, checkpoint, TrainConfig};
use ringdepth_core::scene::{render, SceneSpec};
use ringdepth_core::sfm::{build_pseudo_gt, match_overlap};
use ringdepth_core::tensor::{no_grad, Tensor};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let cfg = TrainConfig::load(std::path::Path::new(&args[1])).unwrap();
    let ckpt = std::path::Path::new(&args[2]);
    let spec = SceneSpec::load(&cfg.scene).unwrap();
    let (mut depth_net, mut pose_net) = build_networks::<f64>(&cfg, &spec).unwrap();
    let (tensors, _) = checkpoint::load::<f64>(ckpt).unwrap();
    let by_name: std::collections::HashMap<String, Tensor<f64>> = tensors.into_iter().collect();
    let mut slots = Vec::new();
    depth_net.collect(&mut slots);
    pose_net.collect(&mut slots);
    for (name, slot) in slots {
        if let Some(t) = by_name.get(&name) {
            *slot = t.clone().requires_grad_leaf();
        }
    }

    let stack = |frame: &ringdepth_core::scene::RenderedFrame<f64>| {
        let shape = frame.images[0].shape().to_vec();
        let views: Vec<_> = frame
            .images
            .iter()
            .map(|img| img.reshape(vec![1, 1, 3, shape[1], shape[2]]).unwrap())
            .collect();
        let refs: Vec<&_> = views.iter().collect();
        Tensor::concat(&refs, 1).unwrap()
    };

    let f5 = render::<f64>(&spec, 5).unwrap();
    let f6 = render::<f64>(&spec, 6).unwrap();
    let twist = no_grad(|| pose_net.forward(&stack(&f5), &stack(&f6)).unwrap());
    let pose = PoseDelta::from_tensor(&twist).unwrap();
    println!(
        "pose t->t+1: axis_angle {:?} (|aa| {:.4}), translation {:?} (|t| {:.4})",
        pose.axis_angle,
        ringdepth_core::geometry::mat::Vec3(pose.axis_angle).norm(),
        pose.translation,
        pose.translation_norm()
    );
    println!(
        "gt motion: yaw {:.4} rad, t (0,0,0.1); warp pose is its inverse",
        (1.8f64).to_radians()
    );

    let out = no_grad(|| depth_net.forward(&stack(&f5)).unwrap());
    let (h, w) = (96usize, 160usize);
    for (name, map, mh, mw) in [
        ("fused", &out.fused, h, w),
        ("head_full", &out.heads[0], h, w),
        ("head_1/4", &out.heads[1], h / 4, w / 4),
        ("head_1/16", &out.heads[3], h / 16, w / 16),
    ] {
        let cam0 = map.narrow(1, 0, 1).unwrap();
        let d = cam0.data();
        let row = |frac: f64| {
            let y = ((mh as f64 - 1.0) * frac) as usize;
            let mut vals: Vec<f64> = (0..mw).map(|x| d[y * mw + x]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals[mw / 2]
        };
        println!(
            "{name}: median depth top {:.2} mid {:.2} bottom {:.2}",
            row(0.1),
            row(0.5),
            row(0.92)
        );
    }
    // gt for reference
    let gtd = f5.depths[0].data();
    let gtrow = |frac: f64| {
        let y = ((h as f64 - 1.0) * frac) as usize;
        let mut vals: Vec<f64> = (0..w).map(|x| gtd[y * w + x]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals[w / 2]
    };
    println!("gt:    median depth top {:.2} mid {:.2} bottom {:.2}", gtrow(0.1), gtrow(0.5), gtrow(0.92));

    // supervision coverage by depth band
    let rig = spec.rig::<f64>().unwrap();
    let mut bands = [0usize; 4]; // <5, 5-10, 10-15, >15
    for frame in [1usize, 60, 120, 180] {
        let rendered = render::<f64>(&spec, frame).unwrap();
        let (targets, _) = build_pseudo_gt(&match_overlap(&rendered.images, &rig), &rig);
        for t in &targets {
            for p in &t.points {
                let b = if p.depth < 5.0 {
                    0
                } else if p.depth < 10.0 {
                    1
                } else if p.depth < 15.0 {
                    2
                } else {
                    3
                };
                bands[b] += 1;
            }
        }
    }
    println!("supervision depth bands over 4 frames: <5m {}  5-10m {}  10-15m {}  >15m {}", bands[0], bands[1], bands[2], bands[3]);
}
