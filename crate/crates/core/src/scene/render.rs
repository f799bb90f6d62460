//! Ray-cast renderer: nearest primitive per ray, exact camera-frame depth.

use crate::geometry::mat::{Mat4, Vec3};
use crate::geometry::{CameraRig, PoseDelta};
use crate::scalar::{s, Scalar};
use crate::scene::texture::albedo;
use crate::scene::{Primitive, SceneError, SceneSpec};
use crate::tensor::Tensor;

/// All cameras of one timestamp plus exact depth ground truth.
pub struct RenderedFrame<S: Scalar> {
    pub frame_index: usize,
    /// `[3, H, W]` per camera.
    pub images: Vec<Tensor<S>>,
    /// `[1, H, W]` per camera; camera-frame z in meters.
    pub depths: Vec<Tensor<S>>,
}

/// Vehicle-to-world transform of frame `t` under the scene trajectory.
pub fn vehicle_to_world(spec: &SceneSpec, frame: usize) -> Mat4<f64> {
    let motion = PoseDelta::new(
        spec.trajectory.axis_angle_per_frame,
        spec.trajectory.translation_per_frame,
    )
    .to_matrix();
    let mut w = Mat4::identity();
    for _ in 0..frame {
        w = w.mul(&motion);
    }
    w
}

/// Ground-truth ego-motion deltas: element `t` is the vehicle-frame motion
/// from frame `t` to `t+1` (`n_frames - 1` entries).
pub fn ego_sequence(spec: &SceneSpec, n_frames: usize) -> Vec<PoseDelta<f64>> {
    let delta = PoseDelta::new(
        spec.trajectory.axis_angle_per_frame,
        spec.trajectory.translation_per_frame,
    );
    vec![delta; n_frames.saturating_sub(1)]
}

struct Hit {
    t: f64,
    normal: Vec3<f64>,
    tex_u: f64,
    tex_v: f64,
    seed: u64,
}

fn intersect_rect(
    o: &Vec3<f64>,
    d: &Vec3<f64>,
    origin: &[f64; 3],
    edge_u: &[f64; 3],
    edge_v: &[f64; 3],
    seed: u64,
) -> Option<Hit> {
    let eu = Vec3(*edge_u);
    let ev = Vec3(*edge_v);
    let org = Vec3(*origin);
    let n = eu.cross(&ev);
    let denom = d.dot(&n);
    if denom.abs() < 1e-14 {
        return None;
    }
    let t = org.sub(o).dot(&n) / denom;
    if t <= 1e-6 {
        return None;
    }
    let p = o.add(&d.scale(t));
    let rel = p.sub(&org);
    let eu_len_sq = eu.dot(&eu);
    let ev_len_sq = ev.dot(&ev);
    let a = rel.dot(&eu) / eu_len_sq;
    let b = rel.dot(&ev) / ev_len_sq;
    if a.abs() > 1.0 || b.abs() > 1.0 {
        return None;
    }
    Some(Hit {
        t,
        normal: n.normalized(),
        tex_u: a * eu_len_sq.sqrt(),
        tex_v: b * ev_len_sq.sqrt(),
        seed,
    })
}

fn intersect_box(
    o: &Vec3<f64>,
    d: &Vec3<f64>,
    bmin: &[f64; 3],
    bmax: &[f64; 3],
    seed: u64,
) -> Option<Hit> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut near_axis = 0usize;
    let mut near_sign = -1.0f64;
    for axis in 0..3 {
        let od = o.0[axis];
        let dd = d.0[axis];
        if dd.abs() < 1e-14 {
            if od < bmin[axis] || od > bmax[axis] {
                return None;
            }
            continue;
        }
        let mut t0 = (bmin[axis] - od) / dd;
        let mut t1 = (bmax[axis] - od) / dd;
        let mut sign = -1.0;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
            sign = 1.0;
        }
        if t0 > t_near {
            t_near = t0;
            near_axis = axis;
            near_sign = sign;
        }
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    if t_near <= 1e-6 {
        return None;
    }
    let p = o.add(&d.scale(t_near));
    let mut normal = Vec3::zero();
    normal.0[near_axis] = near_sign;
    // texture from the two in-face coordinates, face-distinguishing seed
    let (u_axis, v_axis) = match near_axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    Some(Hit {
        t: t_near,
        normal,
        tex_u: p.0[u_axis],
        tex_v: p.0[v_axis],
        seed: seed.wrapping_add(near_axis as u64 * 3 + if near_sign > 0.0 { 1 } else { 0 }),
    })
}

fn closest_hit(spec: &SceneSpec, o: &Vec3<f64>, d: &Vec3<f64>) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for prim in &spec.primitives {
        let hit = match prim {
            Primitive::Rect { origin, edge_u, edge_v, texture_seed } => {
                intersect_rect(o, d, origin, edge_u, edge_v, *texture_seed)
            }
            Primitive::Box { min, max, texture_seed } => {
                intersect_box(o, d, min, max, *texture_seed)
            }
        };
        if let Some(h) = hit {
            if h.t < spec.max_depth && best.as_ref().is_none_or(|b| h.t < b.t) {
                best = Some(h);
            }
        }
    }
    best
}

/// Renders every camera of one frame. Rays are parameterized so that the
/// ray parameter at the hit equals the camera-frame z depth.
pub fn render<S: Scalar>(spec: &SceneSpec, frame: usize) -> Result<RenderedFrame<S>, SceneError> {
    let rig: CameraRig<f64> = spec.rig()?;
    let (h, w) = rig.image_size();
    let world = vehicle_to_world(spec, frame);
    let light = Vec3(spec.light_dir).normalized();
    let ambient = spec.ambient.clamp(0.0, 1.0);

    let mut images = Vec::with_capacity(rig.n_cameras());
    let mut depths = Vec::with_capacity(rig.n_cameras());
    for cam in rig.cameras() {
        let cam_to_world = world.mul(&cam.cam_to_vehicle);
        let origin = cam_to_world.translation();
        let k = cam.intrinsics;
        let mut img = vec![S::zero(); 3 * h * w];
        let mut dep = vec![S::zero(); h * w];
        for y in 0..h {
            for x in 0..w {
                let dir_cam = Vec3::new(
                    (x as f64 - k.cx) / k.fx,
                    (y as f64 - k.cy) / k.fy,
                    1.0,
                );
                let dir_world = cam_to_world.mul_dir(&dir_cam);
                let idx = y * w + x;
                match closest_hit(spec, &origin, &dir_world) {
                    Some(hit) => {
                        let shade = ambient + (1.0 - ambient) * hit.normal.dot(&light).abs();
                        // on-surface pixel extent: angular size times range,
                        // stretched by the incidence angle
                        let dir_norm = dir_world.norm();
                        let cos_inc =
                            (hit.normal.dot(&dir_world) / dir_norm).abs().max(0.05);
                        let footprint = hit.t * dir_norm / k.fx / cos_inc;
                        for c in 0..3 {
                            let a = albedo(
                                &spec.texture,
                                hit.seed,
                                hit.tex_u,
                                hit.tex_v,
                                c,
                                footprint,
                            );
                            img[c * h * w + idx] = s((a * shade).clamp(0.0, 1.0));
                        }
                        dep[idx] = s(hit.t);
                    }
                    None => {
                        for c in 0..3 {
                            img[c * h * w + idx] = s(spec.background_albedo * ambient);
                        }
                        dep[idx] = s(spec.max_depth);
                    }
                }
            }
        }
        images.push(Tensor::from_vec(vec![3, h, w], img).expect("image tensor"));
        depths.push(Tensor::from_vec(vec![1, h, w], dep).expect("depth tensor"));
    }
    Ok(RenderedFrame { frame_index: frame, images, depths })
}
