//! Deterministic synthetic multi-camera world with exact ground truth.
//!
//! The renderer ray-casts textured planes and axis-aligned boxes under a
//! view-independent Lambertian shading model, returning the per-pixel
//! camera-frame depth alongside every image. Identical inputs render
//! bit-identically, which makes this module the oracle for every
//! geometric and photometric consistency check in the crate.

pub mod image_io;
mod render;
pub mod texture;

pub use render::{ego_sequence, render, vehicle_to_world, RenderedFrame};
pub use texture::TextureSpec;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::rig::RigFile;
use crate::geometry::CameraRig;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug)]
pub enum SceneError {
    Parse(String),
    Invalid(String),
    Io(std::io::Error),
}

impl std::fmt::Display for SceneError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SceneError::Parse(msg) => write!(f, "scene parse: {msg}"),
            SceneError::Invalid(msg) => write!(f, "invalid scene: {msg}"),
            SceneError::Io(e) => write!(f, "scene io: {e}"),
        }
    }
}

impl std::error::Error for SceneError {}

/// Textured geometry primitive with a metric pose.
#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    /// Finite rectangle: points `origin + a*edge_u + b*edge_v`, `a,b` in
    /// `[-1, 1]`. Texture coordinates are metric distances along the edges.
    Rect {
        origin: [f64; 3],
        edge_u: [f64; 3],
        edge_v: [f64; 3],
        texture_seed: u64,
    },
    /// Axis-aligned box between two corners.
    Box {
        min: [f64; 3],
        max: [f64; 3],
        texture_seed: u64,
    },
}

/// Constant per-frame vehicle motion, expressed in the vehicle frame:
/// `vehicle_to_world(t+1) = vehicle_to_world(t) * exp(motion)`.
#[derive(Serialize, Deserialize, Clone, Copy, Debug)]
pub struct Trajectory {
    pub translation_per_frame: [f64; 3],
    pub axis_angle_per_frame: [f64; 3],
}

/// Complete scene description; serializes to the scene JSON file.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct SceneSpec {
    pub seed: u64,
    pub rig: RigFile,
    pub primitives: Vec<Primitive>,
    pub trajectory: Trajectory,
    pub texture: TextureSpec,
    /// Frames in the rendered sequence.
    pub n_frames: usize,
    /// Albedo of rays that hit nothing; such pixels carry `max_depth`.
    pub background_albedo: f64,
    /// Ambient light fraction in `[0, 1]`.
    pub ambient: f64,
    /// Directional light (world frame; y points down).
    pub light_dir: [f64; 3],
    pub max_depth: f64,
}

impl SceneSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization")
    }

    pub fn from_json(text: &str) -> Result<SceneSpec, SceneError> {
        serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), SceneError> {
        std::fs::write(path, self.to_json()).map_err(SceneError::Io)
    }

    pub fn load(path: &Path) -> Result<SceneSpec, SceneError> {
        let text = std::fs::read_to_string(path).map_err(SceneError::Io)?;
        Self::from_json(&text)
    }

    pub fn rig<S: Scalar>(&self) -> Result<CameraRig<S>, SceneError> {
        CameraRig::from_file(&self.rig).map_err(|e| SceneError::Invalid(e.to_string()))
    }

    /// Renders frame 0 and checks that every camera sees at least one
    /// primitive.
    pub fn validate<S: Scalar>(&self) -> Result<(), SceneError> {
        if self.n_frames == 0 {
            return Err(SceneError::Invalid("n_frames must be positive".into()));
        }
        if self.primitives.is_empty() {
            return Err(SceneError::Invalid("scene has no primitives".into()));
        }
        let _rig: CameraRig<S> = self.rig()?;
        let frame = render::<S>(self, 0).map_err(|e| SceneError::Invalid(e.to_string()))?;
        for (cam, depth) in frame.depths.iter().enumerate() {
            let limit = crate::scalar::s::<S>(self.max_depth - 1e-9);
            if !depth.data().iter().any(|&d| d < limit) {
                return Err(SceneError::Invalid(format!("camera {cam} sees no primitive")));
            }
        }
        Ok(())
    }
}

/// Synchronized multi-view images at one timestamp.
pub struct MultiViewFrame<S: Scalar> {
    pub frame_index: usize,
    /// One `[3, H, W]` image per camera, indexed by camera id.
    pub images: Vec<Tensor<S>>,
}

/// Standard surround rig: `n` outward-facing cameras spaced evenly on a
/// 1 m ring, 80 degrees horizontal FOV (about 20 degrees overlap between
/// neighbors at 60-degree spacing — wide enough for matching, and the
/// meter-scale baseline keeps triangulation conditioned).
pub fn ring_rig(n_cameras: usize, height: usize, width: usize) -> RigFile {
    use crate::geometry::mat::{rodrigues, Mat4, Vec3};
    let hfov: f64 = 80.0_f64.to_radians();
    let fx = (width as f64 / 2.0) / (hfov / 2.0).tan();
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let cameras = (0..n_cameras)
        .map(|id| {
            let yaw = id as f64 * std::f64::consts::TAU / n_cameras as f64;
            let rot = rodrigues(&Vec3::new(0.0, yaw, 0.0));
            // mounted 1 m outward along the viewing direction
            let pos = rot.mul_vec(&Vec3::new(0.0, 0.0, 1.0));
            let m = Mat4::from_rt(&rot, &pos);
            crate::geometry::rig::RigCameraFile {
                id,
                k: vec![fx, 0.0, cx, 0.0, fx, cy, 0.0, 0.0, 1.0],
                r: m.to_row_major().to_vec(),
            }
        })
        .collect();
    RigFile {
        cameras,
        image_size: [height, width],
        ring: (0..n_cameras).collect(),
    }
}

/// Default desk-scale world: a 40 m square room (textured walls and floor),
/// scattered boxes for parallax and occlusion, and a gentle circular drive.
/// The world frame is y-down; the floor sits 1.4 m below the vehicle origin.
pub fn default_ring_scene(seed: u64) -> SceneSpec {
    default_scene_with(seed, 6, 96, 160, true)
}

/// Scene builder with explicit rig geometry; `with_boxes = false` yields a
/// room of smooth surfaces only (no depth discontinuities).
pub fn default_scene_with(
    seed: u64,
    n_cameras: usize,
    height: usize,
    width: usize,
    with_boxes: bool,
) -> SceneSpec {
    let mut primitives = Vec::new();
    let half = 20.0;
    let floor_y = 1.4;
    let wall_top = floor_y - 15.0;
    // floor
    primitives.push(Primitive::Rect {
        origin: [0.0, floor_y, 0.0],
        edge_u: [half + 5.0, 0.0, 0.0],
        edge_v: [0.0, 0.0, half + 5.0],
        texture_seed: seed.wrapping_add(1),
    });
    // four walls, facing inward
    let wall_mid = (floor_y + wall_top) / 2.0;
    let wall_half_h = (floor_y - wall_top) / 2.0;
    for (i, (nx, nz)) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
        .into_iter()
        .enumerate()
    {
        primitives.push(Primitive::Rect {
            origin: [nx * half, wall_mid, nz * half],
            edge_u: [nz * half, 0.0, nx * half],
            edge_v: [0.0, wall_half_h, 0.0],
            texture_seed: seed.wrapping_add(10 + i as u64),
        });
    }
    if with_boxes {
        let mut rng = crate::rng::Rng::seed_from(seed ^ 0xb0c5);
        for i in 0..14 {
            let angle = rng.uniform_in(0.0, std::f64::consts::TAU);
            let radius = rng.uniform_in(4.0, 14.0);
            let (cx, cz) = (radius * angle.cos(), radius * angle.sin());
            let sx = rng.uniform_in(0.6, 1.6);
            let sz = rng.uniform_in(0.6, 1.6);
            let h = rng.uniform_in(0.8, 3.0);
            primitives.push(Primitive::Box {
                min: [cx - sx, floor_y - h, cz - sz],
                max: [cx + sx, floor_y, cz + sz],
                texture_seed: seed.wrapping_add(100 + i as u64),
            });
        }
    }
    SceneSpec {
        seed,
        rig: ring_rig(n_cameras, height, width),
        primitives,
        trajectory: Trajectory {
            translation_per_frame: [0.0, 0.0, 0.06],
            axis_angle_per_frame: [0.0, 0.9_f64.to_radians(), 0.0],
        },
        texture: TextureSpec::default(),
        n_frames: 200,
        background_albedo: 0.5,
        ambient: 0.55,
        light_dir: [0.35, 0.85, 0.2],
        max_depth: crate::geometry::MAX_DEPTH_DEFAULT,
    }
}
