//! Training-loop contracts: checkpoints, determinism, resume, descent,
//! and the numerical-abort path.

mod common;

use ringdepth_core::harness::{checkpoint, HarnessError, TrainSession};
use ringdepth_core::scene::default_scene_with;
use ringdepth_core::tensor::Tensor;

#[test]
fn zero_step_config_emits_initial_checkpoint() {
    let (cfg, out) = common::tiny_setup("zero_step", 4, (0, 0));
    let outcome = ringdepth_core::harness::train::<f64>(&cfg, &out).unwrap();
    assert_eq!(outcome.steps_run, 0);
    assert!(outcome.final_checkpoint.exists());
    let (tensors, meta) = checkpoint::load::<f64>(&outcome.final_checkpoint).unwrap();
    assert_eq!(meta.step, 0);
    assert!(tensors.iter().any(|(name, _)| name.starts_with("encoder.")));
    assert!(tensors.iter().any(|(name, _)| name.starts_with("nca.0.")));
    assert!(tensors.iter().any(|(name, _)| name.starts_with("pose.")));
}

#[test]
fn single_step_descends_on_a_fixed_batch() {
    // a 3-frame scene has exactly one trainable timestamp, so successive
    // steps revisit the same batch; the documented learning rates are
    // small enough that one update must reduce the loss
    let (cfg, out) = common::tiny_setup("descent", 3, (4, 0));
    let mut session = TrainSession::<f64>::new(cfg, &out).unwrap();
    session.run_steps(4).unwrap();
    let log = std::fs::read_to_string(session.log_path()).unwrap();
    let totals: Vec<f64> = log
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(totals.len(), 4);
    assert!(
        totals[1] < totals[0],
        "first update should descend: {totals:?}"
    );
    assert!(
        totals[3] < totals[0],
        "loss should keep descending on the fixed batch: {totals:?}"
    );
}

#[test]
fn training_is_deterministic_per_seed() {
    let (cfg, out) = common::tiny_setup("det_a", 4, (3, 0));
    let a = ringdepth_core::harness::train::<f64>(&cfg, &out).unwrap();
    let (mut cfg2, _) = common::tiny_setup("det_b", 4, (3, 0));
    cfg2.scene = cfg.scene.clone();
    let out2 = common::temp_dir("det_b_out");
    cfg2.out_dir = Some(out2.clone());
    let b = ringdepth_core::harness::train::<f64>(&cfg2, &out2).unwrap();
    let (ta, _) = checkpoint::load::<f64>(&a.final_checkpoint).unwrap();
    let (tb, _) = checkpoint::load::<f64>(&b.final_checkpoint).unwrap();
    assert_eq!(ta.len(), tb.len());
    for ((na, va), (nb, vb)) in ta.iter().zip(&tb) {
        assert_eq!(na, nb);
        assert_eq!(va.data(), vb.data(), "parameter {na} differs");
    }
}

#[test]
fn resumed_run_bit_matches_uninterrupted_run() {
    // 6 steps straight
    let (cfg, out) = common::tiny_setup("resume_full", 5, (4, 2));
    let straight = ringdepth_core::harness::train::<f64>(&cfg, &out).unwrap();

    // 3 steps, checkpoint, resume, 3 more
    let dir = common::temp_dir("resume_split");
    let mut cfg2 = cfg.clone();
    cfg2.out_dir = Some(dir.clone());
    let mut session = TrainSession::<f64>::new(cfg2.clone(), &dir).unwrap();
    session.run_steps(3).unwrap();
    let mid = dir.join("mid.ckpt");
    session.save_checkpoint(&mid).unwrap();
    drop(session);
    let mut resumed = TrainSession::<f64>::resume(cfg2, &dir, &mid).unwrap();
    assert_eq!(resumed.step, 3);
    let outcome = resumed.run_all().unwrap();

    let (ta, _) = checkpoint::load::<f64>(&straight.final_checkpoint).unwrap();
    let (tb, _) = checkpoint::load::<f64>(&outcome.final_checkpoint).unwrap();
    for ((na, va), (nb, vb)) in ta.iter().zip(&tb) {
        assert_eq!(na, nb);
        let bits_a: Vec<u64> = va.data().iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u64> = vb.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b, "parameter {na} differs after resume");
    }
}

#[test]
fn non_finite_loss_aborts_with_diagnostic_dump() {
    let (cfg, out) = common::tiny_setup("nan_abort", 4, (2, 0));
    let mut session = TrainSession::<f64>::new(cfg, &out).unwrap();
    // poison one weight
    let mut slots = Vec::new();
    session.depth_net.collect(&mut slots);
    for (name, t) in slots {
        if name == "encoder.stem_a.weight" {
            let mut data = t.data().to_vec();
            data[0] = f64::NAN;
            *t = Tensor::param(t.shape().to_vec(), data).unwrap();
        }
    }
    let err = session.run_steps(1).unwrap_err();
    match err {
        HarnessError::Numerical(_) => {}
        other => panic!("expected numerical abort, got {other:?}"),
    }
    assert_eq!(err.exit_code(), 3);
    let dump = out.join("nan_dump.json");
    assert!(dump.exists());
    let text = std::fs::read_to_string(dump).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(parsed["step"].is_number());
    assert!(parsed["components"].is_array());
}

#[test]
fn pseudo_gt_dump_written_for_inspection() {
    let (cfg, out) = common::tiny_setup("pgt_dump", 4, (2, 0));
    ringdepth_core::harness::train::<f64>(&cfg, &out).unwrap();
    let dump = out.join("pseudo_gt.json");
    assert!(dump.exists());
    let targets: Vec<ringdepth_core::losses::SparseDepthTarget> =
        serde_json::from_str(&std::fs::read_to_string(dump).unwrap()).unwrap();
    assert_eq!(targets.len(), 3); // one per camera
}

#[test]
fn injected_match_file_replaces_builtin_matcher() {
    use ringdepth_core::geometry::project_point;
    use ringdepth_core::scene::render;
    use ringdepth_core::sfm::{save_match_file, Match, MatchPair, MatchSet};

    let dir = common::temp_dir("inject");
    let mut spec = default_scene_with(9, 3, 32, 64, false);
    spec.n_frames = 4;
    let scene_path = common::write_scene(&dir, &spec);
    let rig = spec.rig::<f64>().unwrap();

    // exact correspondences of known world points for every frame
    let mut frames = Vec::new();
    for frame in 0..4usize {
        let world = ringdepth_core::scene::vehicle_to_world(&spec, frame);
        let mut ms = MatchSet::default();
        let mut matches = Vec::new();
        let to_cam = |cam: usize, p: &ringdepth_core::geometry::mat::Vec3<f64>| {
            rig.camera(cam)
                .cam_to_vehicle
                .inverse_rigid()
                .mul_point(&world.inverse_rigid().mul_point(p))
        };
        for k in 0..6 {
            // points on the wall ahead of cameras 0/1
            let p = ringdepth_core::geometry::mat::Vec3::new(
                -2.0 + k as f64 * 0.9,
                -0.5 + (k % 3) as f64 * 0.4,
                14.0,
            );
            let pa = to_cam(0, &p);
            let pb = to_cam(1, &p);
            let (Some((ua, va)), Some((ub, vb))) = (
                project_point(pa.0, &rig.camera(0).intrinsics),
                project_point(pb.0, &rig.camera(1).intrinsics),
            ) else {
                continue;
            };
            let inside = |u: f64, v: f64| u >= 0.0 && u <= 63.0 && v >= 0.0 && v <= 31.0;
            if inside(ua, va) && inside(ub, vb) {
                matches.push(Match { ua, va, ub, vb, confidence: 1.0 });
            }
        }
        assert!(matches.len() >= 2, "frame {frame}: too few synthetic matches");
        ms.pairs.push(MatchPair { cam_a: 0, cam_b: 1, matches });
        frames.push((frame, ms));
    }
    let match_path = dir.join("matches.jsonl");
    save_match_file(&match_path, &frames).unwrap();

    let mut cfg = ringdepth_core::harness::TrainConfig::for_scene(scene_path);
    cfg.seed = 5;
    cfg.network.n_heads = 2;
    cfg.network.nca_global_depth = 1;
    cfg.train.rounds.truncate(1);
    cfg.train.rounds[0].steps = 2;
    cfg.train.match_file = Some(match_path);
    let out = dir.join("out");
    cfg.out_dir = Some(out.clone());
    ringdepth_core::harness::train::<f64>(&cfg, &out).unwrap();

    // the dump must contain exactly the injected (triangulated) points
    let targets: Vec<ringdepth_core::losses::SparseDepthTarget> =
        serde_json::from_str(&std::fs::read_to_string(out.join("pseudo_gt.json")).unwrap())
            .unwrap();
    let total: usize = targets.iter().map(|t| t.len()).sum();
    assert!(total >= 4, "injected matches should produce targets, got {total}");
    // injected exact matches triangulate to the planted depth
    let _ = render::<f64>(&spec, 1); // smoke: renderer still fine with this spec
    for t in &targets {
        for p in &t.points {
            assert!(p.depth > 5.0 && p.depth < 30.0, "depth {}", p.depth);
        }
    }
}
