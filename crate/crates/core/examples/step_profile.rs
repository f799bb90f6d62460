//! Rough per-stage timing of one training step. Run with
//! `cargo run --release -p ringdepth-core --example step_profile`.

use std::time::Instant;

use ringdepth_core::harness::{TrainConfig, TrainSession};
use ringdepth_core::scene::default_scene_with;

fn main() {
    let dir = std::env::temp_dir().join("ringdepth_profile");
    std::fs::create_dir_all(&dir).unwrap();
    let scene_path = dir.join("scene.json");
    let spec = default_scene_with(5, 6, 96, 160, true);
    let mut spec = spec;
    spec.n_frames = 12;
    spec.save(&scene_path).unwrap();

    let t0 = Instant::now();
    let rendered = ringdepth_core::scene::render::<f64>(&spec, 1).unwrap();
    println!("render 1 frame (6 cams): {:.1} ms", t0.elapsed().as_secs_f64() * 1e3);

    let mut cfg = TrainConfig::for_scene(scene_path);
    cfg.out_dir = Some(dir.join("out"));
    cfg.seed = 3;

    let t0 = Instant::now();
    let mut session = TrainSession::<f64>::new(cfg, &dir.join("out")).unwrap();
    println!("session init: {:.1} ms", t0.elapsed().as_secs_f64() * 1e3);

    // isolate the network passes
    let views: Vec<_> = rendered
        .images
        .iter()
        .map(|img| img.reshape(vec![1, 1, 3, 96, 160]).unwrap())
        .collect();
    let refs: Vec<&_> = views.iter().collect();
    let stacked = ringdepth_core::tensor::Tensor::concat(&refs, 1).unwrap();

    let t0 = Instant::now();
    let out = session.depth_net.forward(&stacked).unwrap();
    println!("depth forward: {:.1} ms", t0.elapsed().as_secs_f64() * 1e3);

    let t0 = Instant::now();
    let loss = out.fused.mean_all();
    loss.backward().unwrap();
    println!("depth backward (trivial loss): {:.1} ms", t0.elapsed().as_secs_f64() * 1e3);

    for i in 0..4 {
        let t0 = Instant::now();
        session.run_steps(1).unwrap();
        println!("full step {}: {:.1} ms", i, t0.elapsed().as_secs_f64() * 1e3);
    }

    // micro-benchmarks of the hot ops at decoder sizes
    use ringdepth_core::tensor::{Conv2dSpec, Tensor};
    let reps = 20;
    let x = Tensor::<f64>::from_vec(vec![6, 16, 96, 160], (0..6*16*96*160).map(|i| (i as f64 * 0.01).sin()).collect()).unwrap().requires_grad_leaf();
    let w = Tensor::<f64>::from_vec(vec![8, 16, 3, 3], (0..8*16*9).map(|i| (i as f64 * 0.1).cos() * 0.1).collect()).unwrap().requires_grad_leaf();
    let t0 = Instant::now();
    for _ in 0..reps { let _ = ringdepth_core::tensor::no_grad(|| x.conv2d(&w, None, Conv2dSpec::new(1, 1)).unwrap()); }
    println!("conv16x8@full fwd: {:.1} ms", t0.elapsed().as_secs_f64()*1e3/reps as f64);
    let t0 = Instant::now();
    for _ in 0..reps { let y = x.conv2d(&w, None, Conv2dSpec::new(1, 1)).unwrap(); y.sum_all().backward().unwrap(); x.zero_grad(); w.zero_grad(); }
    println!("conv16x8@full fwd+bwd: {:.1} ms", t0.elapsed().as_secs_f64()*1e3/reps as f64);

    let half = Tensor::<f64>::from_vec(vec![6, 16, 48, 80], vec![0.3; 6*16*48*80]).unwrap().requires_grad_leaf();
    let t0 = Instant::now();
    for _ in 0..reps { let y = half.interpolate_bilinear(96, 160).unwrap(); y.sum_all().backward().unwrap(); half.zero_grad(); }
    println!("upsample 2x fwd+bwd: {:.1} ms", t0.elapsed().as_secs_f64()*1e3/reps as f64);

    let img = Tensor::<f64>::from_vec(vec![1, 3, 96, 160], (0..3*96*160).map(|i| (i as f64*0.03).sin().abs()).collect()).unwrap().requires_grad_leaf();
    let t0 = Instant::now();
    for _ in 0..reps { let y = img.mean_filter3().unwrap(); y.sum_all().backward().unwrap(); img.zero_grad(); }
    println!("mean_filter3 3ch fwd+bwd: {:.1} ms", t0.elapsed().as_secs_f64()*1e3/reps as f64);

    let a = Tensor::<f64>::from_vec(vec![16, 96, 160], vec![0.5; 16*96*160]).unwrap().requires_grad_leaf();
    let b = Tensor::<f64>::from_vec(vec![16, 96, 160], vec![0.25; 16*96*160]).unwrap().requires_grad_leaf();
    let t0 = Instant::now();
    for _ in 0..reps { let y = a.mul(&b).unwrap(); y.sum_all().backward().unwrap(); a.zero_grad(); b.zero_grad(); }
    println!("mul 16ch@full fwd+bwd: {:.1} ms", t0.elapsed().as_secs_f64()*1e3/reps as f64);

    let u = Tensor::<f64>::from_vec(vec![96*160], (0..96*160).map(|i| (i % 160) as f64 * 0.99).collect()).unwrap().requires_grad_leaf();
    let v = Tensor::<f64>::from_vec(vec![96*160], (0..96*160).map(|i| (i / 160) as f64 * 0.99).collect()).unwrap().requires_grad_leaf();
    let src = Tensor::<f64>::from_vec(vec![3, 96, 160], vec![0.4; 3*96*160]).unwrap().requires_grad_leaf();
    let t0 = Instant::now();
    for _ in 0..reps { let y = src.grid_sample(&u, &v).unwrap(); y.output.sum_all().backward().unwrap(); src.zero_grad(); u.zero_grad(); v.zero_grad(); }
    println!("grid_sample 3ch fwd+bwd: {:.1} ms", t0.elapsed().as_secs_f64()*1e3/reps as f64);
}

#[allow(dead_code)]
fn micro() {}
