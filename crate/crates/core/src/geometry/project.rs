//! Differentiable pinhole projection and back-projection.

use crate::geometry::rig::Pinhole;
use crate::geometry::GeometryError;
use crate::scalar::{s, Scalar};
use crate::tensor::{Tensor, TensorError};

/// Points with camera-frame depth at or below this are flagged invalid.
pub const Z_MIN: f64 = 1e-6;

/// Projection result: pixel coordinates and the depth-validity mask.
pub struct Projected<S: Scalar> {
    /// `[2, M]`: row 0 = u (column), row 1 = v (row).
    pub uv: Tensor<S>,
    /// Constant `[M]` mask, 1 where `z > Z_MIN`.
    pub mask: Tensor<S>,
}

/// Constant pixel-center coordinate grids, each `[H*W]`, row-major.
pub fn pixel_grid<S: Scalar>(h: usize, w: usize) -> (Tensor<S>, Tensor<S>) {
    let mut us = Vec::with_capacity(h * w);
    let mut vs = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            us.push(s::<S>(x as f64));
            vs.push(s::<S>(y as f64));
        }
    }
    (
        Tensor::from_vec(vec![h * w], us).expect("grid"),
        Tensor::from_vec(vec![h * w], vs).expect("grid"),
    )
}

/// Lifts a depth map (`[1,H,W]` or `[H,W]`) to camera-frame points `[3, H*W]`.
pub fn backproject<S: Scalar>(
    depth: &Tensor<S>,
    k: &Pinhole<S>,
) -> Result<Tensor<S>, GeometryError> {
    let shape = depth.shape();
    let (h, w) = match shape {
        [1, h, w] => (*h, *w),
        [h, w] => (*h, *w),
        _ => {
            return Err(GeometryError::ShapeMismatch(format!(
                "depth must be [1,H,W] or [H,W], got {shape:?}"
            )))
        }
    };
    let hw = h * w;
    // Unit-depth ray directions are constants of the raster.
    let mut dirs = Vec::with_capacity(3 * hw);
    for y in 0..h {
        for x in 0..w {
            let _ = y;
            dirs.push((s::<S>(x as f64) - k.cx) / k.fx);
        }
    }
    for y in 0..h {
        for _x in 0..w {
            dirs.push((s::<S>(y as f64) - k.cy) / k.fy);
        }
    }
    dirs.extend(std::iter::repeat_n(S::one(), hw));
    let dirs = Tensor::from_vec(vec![3, hw], dirs)?;
    let flat = depth.reshape(vec![hw])?;
    Ok(dirs.mul(&flat)?) // [3,HW] * [HW] broadcasts over rows
}

/// Projects camera-frame points `[3, M]` to pixel coordinates.
pub fn project<S: Scalar>(
    points: &Tensor<S>,
    k: &Pinhole<S>,
) -> Result<Projected<S>, GeometryError> {
    let shape = points.shape();
    if shape.len() != 2 || shape[0] != 3 {
        return Err(GeometryError::ShapeMismatch(format!(
            "points must be [3,M], got {shape:?}"
        )));
    }
    let m = shape[1];
    let x = points.narrow(0, 0, 1)?;
    let y = points.narrow(0, 1, 1)?;
    let z = points.narrow(0, 2, 1)?;
    let z_safe = z.clamp_min(Z_MIN);
    let u = x
        .div(&z_safe)?
        .mul_scalar(k.fx.to_f64().unwrap())
        .add_scalar(k.cx.to_f64().unwrap());
    let v = y
        .div(&z_safe)?
        .mul_scalar(k.fy.to_f64().unwrap())
        .add_scalar(k.cy.to_f64().unwrap());
    let uv = Tensor::concat(&[&u, &v], 0)?;
    let zmin: S = s(Z_MIN);
    let mask: Vec<S> = z
        .data()
        .iter()
        .map(|&zv| if zv > zmin { S::one() } else { S::zero() })
        .collect();
    Ok(Projected { uv, mask: Tensor::from_vec(vec![m], mask).map_err(TensorError::from)? })
}

/// Plain (non-differentiable) pinhole projection of one point.
pub fn project_point<S: Scalar>(p: [S; 3], k: &Pinhole<S>) -> Option<(S, S)> {
    if p[2] <= s(Z_MIN) {
        return None;
    }
    Some((k.fx * p[0] / p[2] + k.cx, k.fy * p[1] / p[2] + k.cy))
}
