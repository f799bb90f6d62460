//! Edge-aware smoothness on mean-normalized disparity.

use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor, TensorError};

/// `mean(|dx d*| e^{-|dx I|}) + mean(|dy d*| e^{-|dy I|})` where `d*` is
/// disparity (1/depth) normalized by its mean and the image gradient is
/// averaged over channels.
pub fn smoothness_loss<S: Scalar>(depth: &Tensor<S>, image: &Tensor<S>) -> Result<Tensor<S>> {
    let dshape = depth.shape();
    let ishape = image.shape();
    if dshape.len() != 3 || dshape[0] != 1 || ishape.len() != 3 {
        return Err(TensorError::ShapeMismatch {
            op: "smoothness",
            detail: format!("depth {dshape:?}, image {ishape:?}"),
        });
    }
    if dshape[1] != ishape[1] || dshape[2] != ishape[2] {
        return Err(TensorError::ShapeMismatch {
            op: "smoothness",
            detail: format!("depth {dshape:?} vs image {ishape:?}"),
        });
    }
    let (h, w) = (dshape[1], dshape[2]);
    let c = ishape[0];

    let disp = depth.recip();
    let mean = disp.mean_all().add_scalar(1e-12);
    let dstar = disp.div(&mean)?;

    // channel-mean image gradients
    let grad_img = |a: &Tensor<S>, axis: usize, lo: usize| -> Result<Tensor<S>> {
        let len = a.shape()[axis] - 1;
        let hi = a.narrow(axis, lo, len)?;
        let lo = a.narrow(axis, 0, len)?;
        Ok(hi.sub(&lo)?.abs())
    };

    let mut loss = Tensor::zeros(vec![1]);
    for (axis, _) in [(2usize, w), (1usize, h)] {
        let d_grad = grad_img(&dstar, axis, 1)?;
        let i_grad_all = grad_img(image, axis, 1)?;
        let mut i_grad = i_grad_all.narrow(0, 0, 1)?;
        for ch in 1..c {
            i_grad = i_grad.add(&i_grad_all.narrow(0, ch, 1)?)?;
        }
        let weight = i_grad.mul_scalar(1.0 / c as f64).neg().exp();
        loss = loss.add(&d_grad.mul(&weight)?.mean_all())?;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_depth_has_zero_smoothness() {
        let depth = Tensor::<f64>::full(vec![1, 6, 8], 7.5);
        let image = Tensor::from_vec(
            vec![3, 6, 8],
            (0..3 * 48).map(|i| (i as f64 * 0.37).sin().abs()).collect(),
        )
        .unwrap();
        let loss = smoothness_loss(&depth, &image).unwrap();
        assert!(loss.item().abs() < 1e-12);
    }

    #[test]
    fn image_edges_damp_the_penalty() {
        // same depth ramp, flat image vs strongly textured image
        let (h, w) = (6usize, 8usize);
        let depth = Tensor::from_vec(
            vec![1, h, w],
            (0..h * w).map(|i| 2.0 + (i % w) as f64 * 0.3).collect(),
        )
        .unwrap();
        let flat = Tensor::<f64>::full(vec![3, h, w], 0.5);
        let textured = Tensor::from_vec(
            vec![3, h, w],
            (0..3 * h * w).map(|i| ((i % 2) as f64) * 0.9).collect(),
        )
        .unwrap();
        let on_flat = smoothness_loss(&depth, &flat).unwrap().item();
        let on_textured = smoothness_loss(&depth, &textured).unwrap().item();
        assert!(on_flat > on_textured, "{on_flat} vs {on_textured}");
    }

    #[test]
    fn linear_disparity_ramp_matches_closed_form() {
        // disparity(x) = a + s*x on a constant image: the x-term of the
        // loss is s / mean(disparity), the y-term is 0.
        let (h, w) = (5usize, 9usize);
        let (a, slope) = (0.5f64, 0.04f64);
        let disp: Vec<f64> = (0..h * w).map(|i| a + slope * (i % w) as f64).collect();
        let mean_disp = disp.iter().sum::<f64>() / disp.len() as f64;
        let depth =
            Tensor::from_vec(vec![1, h, w], disp.iter().map(|d| 1.0 / d).collect()).unwrap();
        let image = Tensor::<f64>::full(vec![3, h, w], 0.3);
        let expect = slope / mean_disp; // e^{-0} weights, mean of |slope|/mean
        let got = smoothness_loss(&depth, &image).unwrap().item();
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (h, w) = (4usize, 5usize);
        let depth0 = Tensor::from_vec(
            vec![1, h, w],
            (0..h * w).map(|i| 3.0 + ((i * 7) % 5) as f64 * 0.21).collect(),
        )
        .unwrap();
        let image = Tensor::from_vec(
            vec![3, h, w],
            (0..3 * h * w).map(|i| 0.5 + 0.3 * ((i as f64) * 0.51).cos()).collect(),
        )
        .unwrap();
        crate::gradcheck::assert_grad_close(&depth0, 1e-4, &|d| {
            smoothness_loss(d, &image).unwrap()
        });
    }
}
