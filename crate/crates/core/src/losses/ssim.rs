//! Structural similarity with 3x3 mean-pooled local statistics.

use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor, TensorError};

const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// Per-pixel SSIM map of two `[C, H, W]` images in `[0, 1]`. Local means
/// and (co)variances come from a 3x3 replicate-border mean filter; the
/// output lies in `[-1, 1]`.
pub fn ssim_map<S: Scalar>(x: &Tensor<S>, y: &Tensor<S>) -> Result<Tensor<S>> {
    if x.shape() != y.shape() || x.rank() != 3 {
        return Err(TensorError::ShapeMismatch {
            op: "ssim",
            detail: format!("{:?} vs {:?}", x.shape(), y.shape()),
        });
    }
    let shape = x.shape().to_vec();
    let x4 = x.reshape(vec![1, shape[0], shape[1], shape[2]])?;
    let y4 = y.reshape(vec![1, shape[0], shape[1], shape[2]])?;

    let mu_x = x4.mean_filter3()?;
    let mu_y = y4.mean_filter3()?;
    let sigma_x = x4.square().mean_filter3()?.sub(&mu_x.square())?;
    let sigma_y = y4.square().mean_filter3()?.sub(&mu_y.square())?;
    let sigma_xy = x4.mul(&y4)?.mean_filter3()?.sub(&mu_x.mul(&mu_y)?)?;

    let numer = mu_x
        .mul(&mu_y)?
        .mul_scalar(2.0)
        .add_scalar(C1)
        .mul(&sigma_xy.mul_scalar(2.0).add_scalar(C2))?;
    let denom = mu_x
        .square()
        .add(&mu_y.square())?
        .add_scalar(C1)
        .mul(&sigma_x.add(&sigma_y)?.add_scalar(C2))?;
    numer.div(&denom)?.reshape(shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(h: usize, w: usize, f: impl Fn(usize, usize, usize) -> f64) -> Tensor<f64> {
        let data: Vec<f64> = (0..3 * h * w)
            .map(|i| f(i / (h * w), (i / w) % h, i % w))
            .collect();
        Tensor::from_vec(vec![3, h, w], data).unwrap()
    }

    #[test]
    fn self_similarity_is_one() {
        let x = image(8, 10, |c, y, xx| 0.5 + 0.4 * ((c + y * 3 + xx * 7) as f64 * 0.37).sin());
        let map = ssim_map(&x, &x).unwrap();
        for &v in map.data() {
            assert!((v - 1.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn checkerboard_against_inverse_is_anticorrelated() {
        let x = image(8, 8, |_, y, xx| ((y + xx) % 2) as f64);
        let y = image(8, 8, |_, yy, xx| 1.0 - ((yy + xx) % 2) as f64);
        let map = ssim_map(&x, &y).unwrap();
        // interior pixels see a perfectly anticorrelated window
        let mut negatives = 0;
        for &v in map.data() {
            if v < 0.0 {
                negatives += 1;
            }
        }
        assert!(negatives > map.numel() / 2, "{negatives} of {}", map.numel());
    }

    #[test]
    fn constant_images_reduce_to_luminance_term() {
        let (c1v, c2v) = (0.3f64, 0.7f64);
        let x = Tensor::<f64>::full(vec![3, 6, 6], c1v);
        let y = Tensor::<f64>::full(vec![3, 6, 6], c2v);
        let map = ssim_map(&x, &y).unwrap();
        let expect = (2.0 * c1v * c2v + C1) / (c1v * c1v + c2v * c2v + C1);
        for &v in map.data() {
            assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        }
    }

    #[test]
    fn symmetry() {
        let x = image(6, 7, |c, y, xx| 0.5 + 0.3 * ((c * 13 + y * 5 + xx) as f64 * 0.71).cos());
        let y = image(6, 7, |c, yy, xx| 0.4 + 0.35 * ((c * 7 + yy * 3 + xx * 2) as f64 * 0.53).sin());
        let ab = ssim_map(&x, &y).unwrap();
        let ba = ssim_map(&y, &x).unwrap();
        for (a, b) in ab.data().iter().zip(ba.data()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn output_within_unit_interval_bounds() {
        let x = image(8, 8, |c, y, xx| ((c + y + xx) % 3) as f64 * 0.5);
        let y = image(8, 8, |c, yy, xx| ((c * 2 + yy * 5 + xx * 3) % 4) as f64 * 0.33);
        let map = ssim_map(&x, &y).unwrap();
        for &v in map.data() {
            assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&v), "{v}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = image(5, 6, |c, y, xx| 0.5 + 0.3 * ((c + y * 2 + xx * 3) as f64 * 0.43).sin());
        let y0 = image(5, 6, |c, yy, xx| 0.45 + 0.25 * ((c * 3 + yy + xx * 2) as f64 * 0.67).cos());
        let yc = y0.clone();
        crate::gradcheck::assert_grad_close(&x, 1e-5, &|t| {
            ssim_map(t, &yc).unwrap().mean_all()
        });
    }
}
