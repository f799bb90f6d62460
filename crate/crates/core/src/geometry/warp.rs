//! Differentiable view synthesis: temporal and spatial inverse warping.
//!
//! A warp back-projects the target camera's pixels through its depth map,
//! moves them by a rigid transform into the source camera's frame, projects
//! them with the source intrinsics, and bilinearly samples the source image.
//! The validity mask marks pixels whose sample stayed inside the source
//! raster with positive depth; masked pixels carry no gradient.

use crate::geometry::project::{backproject, project};
use crate::geometry::rig::{CameraRig, Pinhole};
use crate::geometry::se3::{mat4_tensor, se3_exp};
use crate::geometry::GeometryError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Synthesized image and its validity mask.
pub struct Warped<S: Scalar> {
    /// `[C, H, W]`, zero where invalid.
    pub image: Tensor<S>,
    /// Constant `[1, H, W]` mask in `{0, 1}`.
    pub mask: Tensor<S>,
}

impl<S: Scalar> Warped<S> {
    /// Fraction of valid pixels.
    pub fn mask_fraction(&self) -> f64 {
        let total = self.mask.numel().max(1);
        let ones: f64 = self
            .mask
            .data()
            .iter()
            .map(|&v| v.to_f64().unwrap_or(0.0))
            .sum();
        ones / total as f64
    }
}

/// Core warp: `transform` is the `[4,4]` map from target-camera coordinates
/// to source-camera coordinates.
pub fn warp_with_transform<S: Scalar>(
    depth: &Tensor<S>,
    transform: &Tensor<S>,
    k_target: &Pinhole<S>,
    k_source: &Pinhole<S>,
    source: &Tensor<S>,
) -> Result<Warped<S>, GeometryError> {
    let dshape = depth.shape();
    let (h, w) = match dshape {
        [1, h, w] => (*h, *w),
        [h, w] => (*h, *w),
        _ => {
            return Err(GeometryError::ShapeMismatch(format!(
                "depth must be [1,H,W] or [H,W], got {dshape:?}"
            )))
        }
    };
    let sshape = source.shape();
    if sshape.len() != 3 || sshape[1] != h || sshape[2] != w {
        return Err(GeometryError::ShapeMismatch(format!(
            "source image {sshape:?} does not match depth raster {h}x{w}"
        )));
    }
    let c = sshape[0];

    let points = backproject(depth, k_target)?; // [3, HW]
    let rot = transform.narrow(0, 0, 3)?.narrow(1, 0, 3)?; // [3,3]
    let trans = transform.narrow(0, 0, 3)?.narrow(1, 3, 1)?; // [3,1]
    let moved = rot.matmul(&points)?.add(&trans)?; // [3, HW]
    let projected = project(&moved, k_source)?;
    let hw = h * w;
    let u = projected.uv.narrow(0, 0, 1)?.reshape(vec![hw])?;
    let v = projected.uv.narrow(0, 1, 1)?.reshape(vec![hw])?;
    let sampled = source.grid_sample(&u, &v)?;
    // both masks are constants; combine outside the graph
    let mask = sampled.mask.mul(&projected.mask)?.detach().reshape(vec![1, h, w])?;
    let image = sampled.output.reshape(vec![c, h, w])?.mul(&mask)?;
    Ok(Warped { image, mask })
}

/// Pyramid level of a depth/image raster relative to the rig resolution.
fn level_factor<S: Scalar>(
    rig: &CameraRig<S>,
    h: usize,
    w: usize,
) -> Result<usize, GeometryError> {
    let (rig_h, rig_w) = rig.image_size();
    if h == 0 || w == 0 || rig_h % h != 0 || rig_w % w != 0 || rig_h / h != rig_w / w {
        return Err(GeometryError::ShapeMismatch(format!(
            "raster {h}x{w} is not an integer pyramid level of {rig_h}x{rig_w}"
        )));
    }
    Ok(rig_h / h)
}

/// Warps the same camera's frame from `t + dt` onto frame `t` (Eq.-style
/// temporal reprojection): the vehicle-frame ego-motion `pose` (a `[6]`
/// twist for `t -> t+dt`) is conjugated into the camera frame by the
/// camera's extrinsics.
pub fn warp_temporal<S: Scalar>(
    rig: &CameraRig<S>,
    cam: usize,
    depth: &Tensor<S>,
    pose: &Tensor<S>,
    source: &Tensor<S>,
) -> Result<Warped<S>, GeometryError> {
    let dshape = depth.shape();
    let (h, w) = match dshape {
        [1, h, w] => (*h, *w),
        [h, w] => (*h, *w),
        _ => {
            return Err(GeometryError::ShapeMismatch(format!(
                "depth must be [1,H,W] or [H,W], got {dshape:?}"
            )))
        }
    };
    let factor = level_factor(rig, h, w)?;
    let camera = rig.camera(cam);
    let k = camera.intrinsics.scaled_down(factor);
    let ego = se3_exp(pose)?;
    let cam_to_vehicle = mat4_tensor(&camera.cam_to_vehicle);
    let vehicle_to_cam = mat4_tensor(&camera.cam_to_vehicle.inverse_rigid());
    let transform = vehicle_to_cam.matmul(&ego)?.matmul(&cam_to_vehicle)?;
    warp_with_transform(depth, &transform, &k, &k, source)
}

/// Warps a ring-adjacent camera's frame (same timestamp) onto camera `cam`.
/// `delta` selects the neighbor (+1 next, -1 previous in ring order);
/// `source` must be that neighbor's image.
pub fn warp_spatial<S: Scalar>(
    rig: &CameraRig<S>,
    cam: usize,
    delta: i32,
    depth: &Tensor<S>,
    source: &Tensor<S>,
) -> Result<Warped<S>, GeometryError> {
    if delta != 1 && delta != -1 {
        return Err(GeometryError::NotAdjacent { a: cam, b: cam });
    }
    let neighbor = rig.neighbor(cam, delta)?;
    let dshape = depth.shape();
    let (h, w) = match dshape {
        [1, h, w] => (*h, *w),
        [h, w] => (*h, *w),
        _ => {
            return Err(GeometryError::ShapeMismatch(format!(
                "depth must be [1,H,W] or [H,W], got {dshape:?}"
            )))
        }
    };
    let factor = level_factor(rig, h, w)?;
    let k_target = rig.camera(cam).intrinsics.scaled_down(factor);
    let k_source = rig.camera(neighbor).intrinsics.scaled_down(factor);
    let target_to_vehicle = rig.camera(cam).cam_to_vehicle;
    let vehicle_to_source = rig.camera(neighbor).cam_to_vehicle.inverse_rigid();
    let transform = mat4_tensor(&vehicle_to_source.mul(&target_to_vehicle));
    warp_with_transform(depth, &transform, &k_target, &k_source, source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mat::{Mat3, Mat4, Vec3};
    use crate::geometry::rig::RigCamera;
    use crate::geometry::PoseDelta;

    fn simple_rig(second_offset: f64, second_yaw: f64) -> CameraRig<f64> {
        let k = Pinhole::new(60.0, 60.0, 31.5, 23.5);
        let rot = crate::geometry::mat::rodrigues(&Vec3::new(0.0, second_yaw, 0.0));
        CameraRig::new(
            vec![
                RigCamera { id: 0, intrinsics: k, cam_to_vehicle: Mat4::identity() },
                RigCamera {
                    id: 1,
                    intrinsics: k,
                    cam_to_vehicle: Mat4::from_rt(&rot, &Vec3::new(second_offset, 0.0, 0.0)),
                },
            ],
            (48, 64),
            vec![0, 1],
        )
        .unwrap()
    }

    fn textured_image(h: usize, w: usize) -> Tensor<f64> {
        let data: Vec<f64> = (0..3 * h * w)
            .map(|i| {
                let x = (i % w) as f64;
                let y = ((i / w) % h) as f64;
                let c = (i / (h * w)) as f64;
                0.5 + 0.3 * ((x * 0.37 + c).sin() * (y * 0.23).cos())
            })
            .collect();
        Tensor::from_vec(vec![3, h, w], data).unwrap()
    }

    #[test]
    fn identity_pose_reproduces_source() {
        let rig = simple_rig(1.0, 0.0);
        let img = textured_image(48, 64);
        let depth = Tensor::<f64>::full(vec![1, 48, 64], 7.0);
        let warped =
            warp_temporal(&rig, 0, &depth, &PoseDelta::identity().to_tensor(), &img).unwrap();
        assert!((warped.mask_fraction() - 1.0).abs() < 1e-12);
        for (a, b) in warped.image.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn colocated_cameras_spatial_warp_is_identity() {
        let rig = simple_rig(0.0, 0.0); // second camera coincides with first
        let img = textured_image(48, 64);
        let depth = Tensor::<f64>::full(vec![1, 48, 64], 5.0);
        let warped = warp_spatial(&rig, 0, 1, &depth, &img).unwrap();
        assert!((warped.mask_fraction() - 1.0).abs() < 1e-12);
        for (a, b) in warped.image.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_facing_cameras_have_empty_overlap() {
        let rig = simple_rig(0.0, std::f64::consts::PI);
        let img = textured_image(48, 64);
        let depth = Tensor::<f64>::full(vec![1, 48, 64], 5.0);
        let warped = warp_spatial(&rig, 0, 1, &depth, &img).unwrap();
        assert!(warped.mask_fraction() < 0.01, "fraction {}", warped.mask_fraction());
    }

    #[test]
    fn pure_z_translation_magnifies_fronto_parallel_plane() {
        // Camera looks at a plane at depth d; moving forward by m, the
        // reprojection is the homography u' = cx + (u-cx)*d/(d-m).
        let rig = simple_rig(1.0, 0.0);
        let (h, w) = (48usize, 64usize);
        let img = textured_image(h, w);
        let d = 10.0;
        let m = 2.0;
        let depth = Tensor::<f64>::full(vec![1, h, w], d);
        // vehicle (== camera 0) moves forward by m: X_{t->t+dt} maps frame-t
        // points to frame-(t+dt) coordinates, i.e. z shrinks by m.
        let pose = PoseDelta::new([0.0, 0.0, 0.0], [0.0, 0.0, -m]);
        let warped = warp_temporal(&rig, 0, &depth, &pose.to_tensor(), &img).unwrap();

        let k = rig.camera(0).intrinsics;
        let scale = d / (d - m);
        let mut checked = 0;
        for y in (4..h - 4).step_by(7) {
            for x in (4..w - 4).step_by(9) {
                let su = k.cx + (x as f64 - k.cx) * scale;
                let sv = k.cy + (y as f64 - k.cy) * scale;
                let inside = su >= 0.0 && su <= (w - 1) as f64 && sv >= 0.0 && sv <= (h - 1) as f64;
                let mask_v = warped.mask.data()[y * w + x];
                assert_eq!(mask_v > 0.5, inside, "mask mismatch at ({x},{y})");
                if !inside {
                    continue;
                }
                // compare against direct bilinear sampling of the source
                let x0 = su.floor() as usize;
                let y0 = sv.floor() as usize;
                let fx = su - x0 as f64;
                let fy = sv - y0 as f64;
                for c in 0..3 {
                    let at = |yy: usize, xx: usize| img.data()[c * h * w + yy * w + xx];
                    let x1 = (x0 + 1).min(w - 1);
                    let y1 = (y0 + 1).min(h - 1);
                    let expect = (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1))
                        + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1));
                    let got = warped.image.data()[c * h * w + y * w + x];
                    assert!((got - expect).abs() < 1e-10, "({x},{y},{c}): {got} vs {expect}");
                }
                checked += 1;
            }
        }
        assert!(checked > 10);
        // corners fall outside the shrunken field of view
        assert!(warped.mask.data()[0] < 0.5);
        assert!(warped.mask.data()[w - 1] < 0.5);
    }

    #[test]
    fn forward_backward_warp_composition_restores_image() {
        // Warp by pose p, then warp the result by -p, resampling through the
        // ground-truth depth of a fronto-parallel plane.
        let rig = simple_rig(1.0, 0.0);
        let (h, w) = (48usize, 64usize);
        let img = textured_image(h, w);
        let d = 10.0;
        let m = 0.8;
        let pose = PoseDelta::new([0.0, 0.0, 0.0], [0.05, -0.03, -m]);
        let depth_t = Tensor::<f64>::full(vec![1, h, w], d);
        let once = warp_temporal(&rig, 0, &depth_t, &pose.to_tensor(), &img).unwrap();
        // depth of the same plane as seen after the motion
        let depth_after = Tensor::<f64>::full(vec![1, h, w], d - m);
        let back =
            warp_temporal(&rig, 0, &depth_after, &pose.inverse().to_tensor(), &once.image)
                .unwrap();
        let both = back.mask.mul(&once.mask).unwrap();
        let mut err_sum = 0.0;
        let mut count = 0.0;
        for i in 0..h * w {
            if both.data()[i] > 0.5 {
                for c in 0..3 {
                    err_sum += (back.image.data()[c * h * w + i] - img.data()[c * h * w + i]).abs();
                    count += 1.0;
                }
            }
        }
        assert!(count > 0.0);
        let mean_err = err_sum / count;
        assert!(mean_err < 1e-2, "mean abs composition error {mean_err}");
    }

    #[test]
    fn spatial_masks_are_geometrically_consistent() {
        // Every valid pixel of the 0->1 warp must, by construction, land in
        // camera 1's raster; check the forward mapping directly.
        let rig = simple_rig(0.8, 0.9);
        let (h, w) = (48usize, 64usize);
        let depth = Tensor::<f64>::full(vec![1, h, w], 6.0);
        let img = textured_image(h, w);
        let warped = warp_spatial(&rig, 0, 1, &depth, &img).unwrap();
        let k = rig.camera(0).intrinsics;
        let t = rig.camera(1).cam_to_vehicle.inverse_rigid().mul(&rig.camera(0).cam_to_vehicle);
        for y in (0..h).step_by(5) {
            for x in (0..w).step_by(5) {
                if warped.mask.data()[y * w + x] < 0.5 {
                    continue;
                }
                let pc = Vec3::new((x as f64 - k.cx) / k.fx * 6.0, (y as f64 - k.cy) / k.fy * 6.0, 6.0);
                let ps = t.mul_point(&pc);
                assert!(ps.0[2] > 0.0);
                let (u, v) =
                    crate::geometry::project::project_point(ps.0, &rig.camera(1).intrinsics)
                        .unwrap();
                assert!(u >= -1e-9 && u <= (w - 1) as f64 + 1e-9, "u {u}");
                assert!(v >= -1e-9 && v <= (h - 1) as f64 + 1e-9, "v {v}");
            }
        }
        let _ = Mat3::<f64>::identity();
    }

    #[test]
    fn shape_mismatch_errors() {
        let rig = simple_rig(1.0, 0.0);
        let depth = Tensor::<f64>::full(vec![1, 48, 64], 5.0);
        let wrong_img = Tensor::<f64>::ones(vec![3, 24, 32]);
        assert!(warp_temporal(&rig, 0, &depth, &PoseDelta::identity().to_tensor(), &wrong_img)
            .is_err());
        let bad_depth = Tensor::<f64>::full(vec![1, 30, 64], 5.0);
        let img = Tensor::<f64>::ones(vec![3, 30, 64]);
        assert!(
            warp_temporal(&rig, 0, &bad_depth, &PoseDelta::identity().to_tensor(), &img).is_err()
        );
    }

    #[test]
    fn warp_gradients_match_finite_differences() {
        let rig = simple_rig(1.0, 0.0);
        let (h, w) = (6usize, 8usize);
        let rig_small = CameraRig::new(
            vec![
                RigCamera {
                    id: 0,
                    intrinsics: Pinhole::new(6.0, 6.0, 3.5, 2.5),
                    cam_to_vehicle: Mat4::identity(),
                },
                RigCamera {
                    id: 1,
                    intrinsics: Pinhole::new(6.0, 6.0, 3.5, 2.5),
                    cam_to_vehicle: Mat4::from_rt(&Mat3::identity(), &Vec3::new(0.4, 0.0, 0.0)),
                },
            ],
            (h, w),
            vec![0, 1],
        )
        .unwrap();
        let _ = rig;
        let img_data: Vec<f64> = (0..3 * h * w).map(|i| 0.5 + 0.4 * ((i as f64) * 0.7).sin()).collect();
        let img = Tensor::from_vec(vec![3, h, w], img_data).unwrap();

        // gradient wrt depth
        let depth0 = Tensor::from_vec(
            vec![1, h, w],
            (0..h * w).map(|i| 4.0 + 0.1 * (i as f64 * 0.9).sin()).collect(),
        )
        .unwrap();
        let pose = PoseDelta::new([0.01, -0.02, 0.005], [0.05, 0.02, -0.3]);
        let pose_t = pose.to_tensor();
        let rig2 = rig_small.clone();
        let img2 = img.clone();
        crate::gradcheck::assert_grad_close(&depth0, 1e-3, &|d| {
            warp_temporal(&rig2, 0, d, &pose_t, &img2)
                .unwrap()
                .image
                .sum_all()
        });

        // gradient wrt pose
        let depth = Tensor::<f64>::full(vec![1, h, w], 4.0);
        let rig3 = rig_small.clone();
        let img3 = img.clone();
        crate::gradcheck::assert_grad_close(&pose.to_tensor(), 1e-3, &|p| {
            warp_temporal(&rig3, 0, &depth, p, &img3)
                .unwrap()
                .image
                .sum_all()
        });
    }
}
