//! The joint pose network locks onto known ego-motion when trained on a
//! rig translating 0.3 m per frame.

mod common;

use ringdepth_core::geometry::PoseDelta;
use ringdepth_core::harness::{RoundParams, TrainConfig, TrainSession};
use ringdepth_core::scene::default_scene_with;

#[test]
fn pose_converges_to_known_translation_norm() {
    let dir = common::temp_dir("pose_conv");
    let mut spec = default_scene_with(31, 3, 32, 64, true);
    spec.n_frames = 12;
    // straight drive at 0.3 m per frame, no rotation
    spec.trajectory.translation_per_frame = [0.0, 0.0, 0.3];
    spec.trajectory.axis_angle_per_frame = [0.0, 0.0, 0.0];
    let scene_path = common::write_scene(&dir, &spec);

    let mut cfg = TrainConfig::for_scene(scene_path);
    cfg.seed = 2;
    cfg.network.n_heads = 2;
    cfg.network.nca_global_depth = 1;
    // desk-scale schedule: one round, strong sparse supervision so depth
    // is metric early and the photometric loss pins the translation norm
    cfg.train.rounds = vec![RoundParams {
        steps: 350,
        learning_rate: 2e-3,
        sigma1: 0.1,
        filter_ratio: 0.0,
    }];
    let out = dir.join("out");
    cfg.out_dir = Some(out.clone());

    let mut session = TrainSession::<f64>::new(cfg, &out).unwrap();
    session.run_steps(350).unwrap();

    // query the trained pose on a fresh frame pair
    let t = ringdepth_core::scene::render::<f64>(&spec, 5).unwrap();
    let next = ringdepth_core::scene::render::<f64>(&spec, 6).unwrap();
    let stack = |frame: &ringdepth_core::scene::RenderedFrame<f64>| {
        let views: Vec<_> = frame
            .images
            .iter()
            .map(|img| img.reshape(vec![1, 1, 3, 32, 64]).unwrap())
            .collect();
        let refs: Vec<&_> = views.iter().collect();
        ringdepth_core::tensor::Tensor::concat(&refs, 1).unwrap()
    };
    let twist = ringdepth_core::tensor::no_grad(|| {
        session.pose_net.forward(&stack(&t), &stack(&next)).unwrap()
    });
    let pose = PoseDelta::from_tensor(&twist).unwrap();
    let norm = pose.translation_norm();
    assert!(
        (0.27..=0.33).contains(&norm),
        "pose translation norm {norm} outside [0.27, 0.33] (twist {:?})",
        twist.data()
    );
}
