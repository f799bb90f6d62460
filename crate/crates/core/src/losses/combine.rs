//! Weighted combination of the per-resolution loss triples.

use crate::losses::LossWeights;
use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor, TensorError};

/// The three loss components of one resolution, as scalar tensors.
pub struct ResolutionLosses<S: Scalar> {
    pub sfm: Tensor<S>,
    pub photo: Tensor<S>,
    pub smooth: Tensor<S>,
}

/// Final training loss over exactly four resolutions, ordered
/// `[full, 1/4, 1/8, 1/16]`:
/// per resolution `L = sigma1*L_sfm + sigma2*L_photo + L_smooth`, then
/// `L_final = p1*L_full + p2*(L_1/4 + L_1/8 + L_1/16)`.
pub fn combine_losses<S: Scalar>(
    per_resolution: &[ResolutionLosses<S>],
    weights: &LossWeights,
) -> Result<Tensor<S>> {
    if per_resolution.len() != 4 {
        return Err(TensorError::ShapeMismatch {
            op: "combine_losses",
            detail: format!("expected 4 resolutions, got {}", per_resolution.len()),
        });
    }
    let per_level = |r: &ResolutionLosses<S>| -> Result<Tensor<S>> {
        r.sfm
            .mul_scalar(weights.sigma1)
            .add(&r.photo.mul_scalar(weights.sigma2))?
            .add(&r.smooth)
    };
    let full = per_level(&per_resolution[0])?;
    let mut aux = per_level(&per_resolution[1])?;
    aux = aux.add(&per_level(&per_resolution[2])?)?;
    aux = aux.add(&per_level(&per_resolution[3])?)?;
    full.mul_scalar(weights.p1).add(&aux.mul_scalar(weights.p2))
}
