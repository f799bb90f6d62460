//! Differentiable SE(3) exponential over tensors.

use crate::geometry::mat::Mat4;
use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor, TensorError};

/// Converts a rigid transform matrix into a constant `[4,4]` tensor.
pub(crate) fn mat4_tensor<S: Scalar>(m: &Mat4<S>) -> Tensor<S> {
    Tensor::from_vec(vec![4, 4], m.to_row_major().to_vec()).expect("mat4 tensor")
}

/// SE(3) exponential of a `[6]` twist `(axis_angle, translation)` into a
/// `[4,4]` homogeneous rigid transform, differentiable in all six inputs.
/// Rotation follows the Rodrigues formula; below `|theta| = 1e-8` the
/// coefficients switch to their second-order series.
pub fn se3_exp<S: Scalar>(pose: &Tensor<S>) -> Result<Tensor<S>> {
    if pose.shape() != [6] {
        return Err(TensorError::ShapeMismatch {
            op: "se3_exp",
            detail: format!("expected [6], got {:?}", pose.shape()),
        });
    }
    let aa = pose.narrow(0, 0, 3)?;
    let t = pose.narrow(0, 3, 3)?.reshape(vec![3, 1])?;
    let theta_sq = aa.square().sum_all(); // [1]

    // a = sin(t)/t, b = (1-cos(t))/t^2, c = (1 - sin(t)/t)/t^2
    let (a, b, c) = if theta_sq.item() < crate::scalar::s(1e-16) {
        (
            theta_sq.mul_scalar(-1.0 / 6.0).add_scalar(1.0),
            theta_sq.mul_scalar(-1.0 / 24.0).add_scalar(0.5),
            theta_sq.mul_scalar(-1.0 / 120.0).add_scalar(1.0 / 6.0),
        )
    } else {
        let theta = theta_sq.sqrt();
        let a = theta.sin().div(&theta)?;
        let b = theta.cos().neg().add_scalar(1.0).div(&theta_sq)?;
        let c = a.neg().add_scalar(1.0).div(&theta_sq)?;
        (a, b, c)
    };

    let k = skew3(&aa)?;
    let k2 = k.matmul(&k)?;
    let eye = Tensor::from_vec(
        vec![3, 3],
        vec![
            S::one(),
            S::zero(),
            S::zero(),
            S::zero(),
            S::one(),
            S::zero(),
            S::zero(),
            S::zero(),
            S::one(),
        ],
    )?;
    let r = eye.add(&k.mul(&a)?)?.add(&k2.mul(&b)?)?;
    let v = eye.add(&k.mul(&b)?)?.add(&k2.mul(&c)?)?;
    let vt = v.matmul(&t)?; // [3,1]

    let top = Tensor::concat(&[&r, &vt], 1)?; // [3,4]
    let bottom = Tensor::from_vec(vec![1, 4], vec![S::zero(), S::zero(), S::zero(), S::one()])?;
    Tensor::concat(&[&top, &bottom], 0)
}

/// Skew-symmetric `[3,3]` matrix of a `[3]` vector, differentiable.
fn skew3<S: Scalar>(v: &Tensor<S>) -> Result<Tensor<S>> {
    let x = v.narrow(0, 0, 1)?;
    let y = v.narrow(0, 1, 1)?;
    let z = v.narrow(0, 2, 1)?;
    let o = Tensor::zeros(vec![1]);
    let nx = x.neg();
    let ny = y.neg();
    let nz = z.neg();
    Tensor::concat(&[&o, &nz, &y, &z, &o, &nx, &ny, &x, &o], 0)?.reshape(vec![3, 3])
}
