//! Camera rig model, SE(3) math, and differentiable multi-view warping.
//!
//! Conventions: extrinsics map camera coordinates to the common vehicle
//! frame; pixel coordinate `(u, v)` = (column, row) with integer values on
//! pixel centers; depth is the camera-frame `z` in meters.

pub mod mat;
mod project;
pub mod rig;
mod se3;
mod triangulate;
mod warp;

pub use project::{backproject, pixel_grid, project, project_point, Projected, Z_MIN};
pub use rig::{CameraRig, Pinhole, RigCamera};
pub use se3::se3_exp;
pub use triangulate::{triangulate, Triangulation};
pub use warp::{warp_spatial, warp_temporal, warp_with_transform, Warped};

use crate::scalar::{s, Scalar};
use crate::tensor::{Tensor, TensorError};
use mat::{se3_exp_mat, se3_log_mat, Mat4, Vec3};

/// Default far plane; depth beyond this is not supervised or evaluated.
pub const MAX_DEPTH_DEFAULT: f64 = 200.0;

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    InvalidRig(String),
    /// Spatial warps and triangulation only pair ring-adjacent cameras.
    NotAdjacent { a: usize, b: usize },
    /// Triangulation system is rank-deficient (parallel/identical rays).
    DegenerateRays { condition: f64 },
    ShapeMismatch(String),
    InvalidDepth(String),
    Tensor(TensorError),
}

impl std::fmt::Display for GeometryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeometryError::InvalidRig(msg) => write!(f, "invalid rig: {msg}"),
            GeometryError::NotAdjacent { a, b } => {
                write!(f, "cameras {a} and {b} are not ring-adjacent")
            }
            GeometryError::DegenerateRays { condition } => {
                write!(f, "degenerate rays (condition {condition:.3e})")
            }
            GeometryError::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            GeometryError::InvalidDepth(msg) => write!(f, "invalid depth: {msg}"),
            GeometryError::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for GeometryError {}

impl From<TensorError> for GeometryError {
    fn from(e: TensorError) -> Self {
        GeometryError::Tensor(e)
    }
}

/// One rigid ego-motion step: axis-angle (radians x unit axis) plus
/// translation in meters, both in the vehicle frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseDelta<S> {
    pub axis_angle: [S; 3],
    pub translation: [S; 3],
}

impl<S: Scalar> PoseDelta<S> {
    pub fn identity() -> Self {
        PoseDelta { axis_angle: [S::zero(); 3], translation: [S::zero(); 3] }
    }

    pub fn new(axis_angle: [S; 3], translation: [S; 3]) -> Self {
        PoseDelta { axis_angle, translation }
    }

    /// Canonical range: rotation angle strictly below pi.
    pub fn is_canonical(&self) -> bool {
        Vec3(self.axis_angle).norm() < s(std::f64::consts::PI)
    }

    pub fn to_matrix(&self) -> Mat4<S> {
        se3_exp_mat(&Vec3(self.axis_angle), &Vec3(self.translation))
    }

    /// Extracts the canonical delta from a rigid transform.
    pub fn from_matrix(m: &Mat4<S>) -> Self {
        let (aa, t) = se3_log_mat(m);
        PoseDelta { axis_angle: aa.0, translation: t.0 }
    }

    /// The delta of the inverse transform (twist negation).
    pub fn inverse(&self) -> Self {
        PoseDelta {
            axis_angle: [
                -self.axis_angle[0],
                -self.axis_angle[1],
                -self.axis_angle[2],
            ],
            translation: [
                -self.translation[0],
                -self.translation[1],
                -self.translation[2],
            ],
        }
    }

    /// Flat `[6]` tensor `(axis_angle, translation)` for differentiable use.
    pub fn to_tensor(&self) -> Tensor<S> {
        Tensor::from_vec(
            vec![6],
            vec![
                self.axis_angle[0],
                self.axis_angle[1],
                self.axis_angle[2],
                self.translation[0],
                self.translation[1],
                self.translation[2],
            ],
        )
        .expect("pose tensor")
    }

    pub fn from_tensor(t: &Tensor<S>) -> Result<Self, GeometryError> {
        if t.shape() != [6] {
            return Err(GeometryError::ShapeMismatch(format!(
                "pose tensor must be [6], got {:?}",
                t.shape()
            )));
        }
        let d = t.data();
        Ok(PoseDelta { axis_angle: [d[0], d[1], d[2]], translation: [d[3], d[4], d[5]] })
    }

    pub fn translation_norm(&self) -> S {
        Vec3(self.translation).norm()
    }
}

/// Metric depth map of one camera: `[1, H, W]`, strictly positive, bounded
/// by `max_depth`.
#[derive(Clone, Debug)]
pub struct DepthMap<S: Scalar> {
    pub values: Tensor<S>,
    pub camera_id: usize,
}

impl<S: Scalar> DepthMap<S> {
    pub fn new(values: Tensor<S>, camera_id: usize, max_depth: f64) -> Result<Self, GeometryError> {
        if values.rank() != 3 || values.shape()[0] != 1 {
            return Err(GeometryError::ShapeMismatch(format!(
                "depth map must be [1,H,W], got {:?}",
                values.shape()
            )));
        }
        let limit: S = s(max_depth);
        for &v in values.data() {
            if !(v > S::zero() && v <= limit) {
                return Err(GeometryError::InvalidDepth(format!(
                    "value {v} outside (0, {max_depth}]"
                )));
            }
        }
        Ok(DepthMap { values, camera_id })
    }

    pub fn height(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[2]
    }
}
