//! Sweeps the temporal-warp pose around the ground truth at fixed GT
//! depth: the photometric loss must be minimized at the true warp pose.

use ringdepth_core::geometry::{warp_temporal, PoseDelta};
use ringdepth_core::losses::{photometric_loss, PhotoSource};
use ringdepth_core::scene::{default_ring_scene, ego_sequence, render};

fn main() {
    let mut spec = default_ring_scene(11);
    spec.n_frames = 10;
    let rig = spec.rig::<f64>().unwrap();
    let t = 5usize;
    let frame_t = render::<f64>(&spec, t).unwrap();
    let frame_next = render::<f64>(&spec, t + 1).unwrap();
    let motion = ego_sequence(&spec, spec.n_frames)[t];
    let true_fwd = motion.inverse(); // X_{t -> t+1}
    println!("true forward warp pose: aa {:?} t {:?}", true_fwd.axis_angle, true_fwd.translation);

    let loss_at = |pose: &PoseDelta<f64>| -> f64 {
        let mut total = 0.0;
        for cam in 0..rig.n_cameras() {
            let warped = warp_temporal(
                &rig,
                cam,
                &frame_t.depths[cam],
                &pose.to_tensor(),
                &frame_next.images[cam],
            )
            .unwrap();
            let loss = photometric_loss(
                &frame_t.images[cam],
                &[PhotoSource { image: warped.image, mask: warped.mask }],
                0.85,
            )
            .unwrap();
            total += loss.item();
        }
        total / rig.n_cameras() as f64
    };

    println!("-- yaw sweep (around true yaw {:.4}):", true_fwd.axis_angle[1]);
    for dyaw in [-0.3, -0.1, -0.03, -0.01, 0.0, 0.01, 0.03, 0.1, 0.3] {
        let mut p = true_fwd;
        p.axis_angle[1] += dyaw;
        println!("  yaw offset {dyaw:+.3}: loss {:.6}", loss_at(&p));
    }
    println!("-- z-translation sweep (around true {:.3}):", true_fwd.translation[2]);
    for dz in [-0.3, -0.1, -0.03, 0.0, 0.03, 0.1, 0.3] {
        let mut p = true_fwd;
        p.translation[2] += dz;
        println!("  tz offset {dz:+.3}: loss {:.6}", loss_at(&p));
    }
    println!("-- identity pose: loss {:.6}", loss_at(&PoseDelta::identity()));
    println!(
        "-- eviction probe yaw 3.7: loss {:.6}",
        loss_at(&PoseDelta::new([0.0, 3.7, 0.0], [0.0, 0.0, 0.0]))
    );
}
