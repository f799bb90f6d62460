//! Bilinear resampling: fixed-grid resizing and differentiable sampling at
//! arbitrary (sub-pixel) coordinates with an out-of-raster validity mask.

use crate::scalar::{s, Scalar};
use crate::tensor::{Result, Tensor, TensorError};

/// Result of sampling an image at arbitrary coordinates: the sampled values
/// and a constant `{0,1}` mask marking samples that fell inside the raster.
pub struct GridSample<S: Scalar> {
    pub output: Tensor<S>,
    pub mask: Tensor<S>,
}

impl<S: Scalar> Tensor<S> {
    /// Bilinear resize of `[B, C, H, W]` to `(out_h, out_w)`, align-corners
    /// convention: corners map to corners, so inputs affine in the pixel
    /// coordinates are reproduced exactly at every output location.
    pub fn interpolate_bilinear(&self, out_h: usize, out_w: usize) -> Result<Tensor<S>> {
        let shape = self.shape();
        if shape.len() != 4 {
            return Err(TensorError::ShapeMismatch {
                op: "interpolate_bilinear",
                detail: format!("needs [B,C,H,W], got {shape:?}"),
            });
        }
        if out_h == 0 || out_w == 0 {
            return Err(TensorError::InvalidGeometry {
                op: "interpolate_bilinear",
                detail: "zero output size".into(),
            });
        }
        let (b, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let scale = |out_n: usize, in_n: usize| -> f64 {
            if out_n > 1 { (in_n - 1) as f64 / (out_n - 1) as f64 } else { 0.0 }
        };
        let sy = scale(out_h, h);
        let sx = scale(out_w, w);
        // Precompute per-row/column source taps and weights.
        let taps = |n_out: usize, n_in: usize, sc: f64| -> Vec<(usize, usize, S)> {
            (0..n_out)
                .map(|o| {
                    let pos = o as f64 * sc;
                    let i0 = (pos.floor() as usize).min(n_in - 1);
                    let i1 = (i0 + 1).min(n_in - 1);
                    (i0, i1, s::<S>(pos - i0 as f64))
                })
                .collect()
        };
        let ytaps = taps(out_h, h, sy);
        let xtaps = taps(out_w, w, sx);
        let x = self.data();
        let mut out = vec![S::zero(); b * c * out_h * out_w];
        for bc in 0..b * c {
            let in_base = bc * h * w;
            let out_base = bc * out_h * out_w;
            for (oy, &(y0, y1, fy)) in ytaps.iter().enumerate() {
                let r0 = in_base + y0 * w;
                let r1 = in_base + y1 * w;
                let orow = out_base + oy * out_w;
                for (ox, &(x0, x1, fx)) in xtaps.iter().enumerate() {
                    let top = x[r0 + x0] + fx * (x[r0 + x1] - x[r0 + x0]);
                    let bot = x[r1 + x0] + fx * (x[r1 + x1] - x[r1 + x0]);
                    out[orow + ox] = top + fy * (bot - top);
                }
            }
        }
        Ok(Tensor::from_op(
            vec![b, c, out_h, out_w],
            out,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let mut dx = vec![S::zero(); parents[0].numel()];
                for bc in 0..b * c {
                    let in_base = bc * h * w;
                    let out_base = bc * out_h * out_w;
                    for (oy, &(y0, y1, fy)) in ytaps.iter().enumerate() {
                        let r0 = in_base + y0 * w;
                        let r1 = in_base + y1 * w;
                        let orow = out_base + oy * out_w;
                        for (ox, &(x0, x1, fx)) in xtaps.iter().enumerate() {
                            let gv = g[orow + ox];
                            let one = S::one();
                            dx[r0 + x0] += gv * (one - fy) * (one - fx);
                            dx[r0 + x1] += gv * (one - fy) * fx;
                            dx[r1 + x0] += gv * fy * (one - fx);
                            dx[r1 + x1] += gv * fy * fx;
                        }
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Samples a `[C, H, W]` image at continuous pixel coordinates
    /// (`u` columns, `v` rows; integer coordinates sit on pixel centers).
    /// Samples outside `[0, W-1] x [0, H-1]` produce value 0, mask 0, and a
    /// zero gradient with respect to both the image and the coordinates.
    pub fn grid_sample(&self, u: &Tensor<S>, v: &Tensor<S>) -> Result<GridSample<S>> {
        let shape = self.shape();
        if shape.len() != 3 {
            return Err(TensorError::ShapeMismatch {
                op: "grid_sample",
                detail: format!("source must be [C,H,W], got {shape:?}"),
            });
        }
        if u.shape() != v.shape() || u.rank() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "grid_sample",
                detail: format!("coords must be equal rank-1, got {:?}/{:?}", u.shape(), v.shape()),
            });
        }
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let m = u.numel();
        let src = self.data();
        let ud = u.data();
        let vd = v.data();
        let wmax = s::<S>((w - 1) as f64);
        let hmax = s::<S>((h - 1) as f64);

        let mut out = vec![S::zero(); c * m];
        let mut mask = vec![S::zero(); m];
        for i in 0..m {
            let (uu, vv) = (ud[i], vd[i]);
            if !(uu >= S::zero() && uu <= wmax && vv >= S::zero() && vv <= hmax) {
                continue;
            }
            mask[i] = S::one();
            let x0f = uu.floor();
            let y0f = vv.floor();
            let x0 = x0f.to_usize().unwrap_or(0).min(w - 1);
            let y0 = y0f.to_usize().unwrap_or(0).min(h - 1);
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let fx = uu - s::<S>(x0 as f64);
            let fy = vv - s::<S>(y0 as f64);
            for ch in 0..c {
                let base = ch * h * w;
                let tl = src[base + y0 * w + x0];
                let tr = src[base + y0 * w + x1];
                let bl = src[base + y1 * w + x0];
                let br = src[base + y1 * w + x1];
                let top = tl + fx * (tr - tl);
                let bot = bl + fx * (br - bl);
                out[ch * m + i] = top + fy * (bot - top);
            }
        }
        let mask_t = Tensor::from_vec(vec![m], mask.clone())?;
        let output = Tensor::from_op(
            vec![c, m],
            out,
            vec![self.clone(), u.clone(), v.clone()],
            Box::new(move |g, parents| {
                let src = parents[0].data();
                let ud = parents[1].data();
                let vd = parents[2].data();
                let mut dsrc = parents[0].requires_grad().then(|| vec![S::zero(); src.len()]);
                let mut du = parents[1].requires_grad().then(|| vec![S::zero(); m]);
                let mut dv = parents[2].requires_grad().then(|| vec![S::zero(); m]);
                for i in 0..m {
                    if mask[i] == S::zero() {
                        continue;
                    }
                    let (uu, vv) = (ud[i], vd[i]);
                    let x0 = uu.floor().to_usize().unwrap_or(0).min(w - 1);
                    let y0 = vv.floor().to_usize().unwrap_or(0).min(h - 1);
                    let x1 = (x0 + 1).min(w - 1);
                    let y1 = (y0 + 1).min(h - 1);
                    let fx = uu - s::<S>(x0 as f64);
                    let fy = vv - s::<S>(y0 as f64);
                    let one = S::one();
                    for ch in 0..c {
                        let base = ch * h * w;
                        let gv = g[ch * m + i];
                        if gv == S::zero() {
                            continue;
                        }
                        if let Some(dsrc) = dsrc.as_mut() {
                            dsrc[base + y0 * w + x0] += gv * (one - fy) * (one - fx);
                            dsrc[base + y0 * w + x1] += gv * (one - fy) * fx;
                            dsrc[base + y1 * w + x0] += gv * fy * (one - fx);
                            dsrc[base + y1 * w + x1] += gv * fy * fx;
                        }
                        let tl = src[base + y0 * w + x0];
                        let tr = src[base + y0 * w + x1];
                        let bl = src[base + y1 * w + x0];
                        let br = src[base + y1 * w + x1];
                        if let Some(du) = du.as_mut() {
                            let d_dx = (tr - tl) * (one - fy) + (br - bl) * fy;
                            du[i] += gv * d_dx;
                        }
                        if let Some(dv) = dv.as_mut() {
                            let d_dy = (bl - tl) * (one - fx) + (br - tr) * fx;
                            dv[i] += gv * d_dy;
                        }
                    }
                }
                vec![dsrc, du, dv]
            }),
        );
        Ok(GridSample { output, mask: mask_t })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_map_stays_constant_at_any_size() {
        let x = Tensor::<f64>::full(vec![1, 1, 3, 4], 0.42);
        for (h, w) in [(1, 1), (2, 7), (9, 9), (3, 4)] {
            let y = x.interpolate_bilinear(h, w).unwrap();
            assert_eq!(y.shape(), &[1, 1, h, w]);
            for &v in y.data() {
                assert!((v - 0.42).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn affine_inputs_interpolate_exactly() {
        // f(x, y) = 2x + 3y + 1 on a 4x5 grid
        let (h, w) = (4usize, 5usize);
        let data: Vec<f64> = (0..h)
            .flat_map(|y| (0..w).map(move |x| 2.0 * x as f64 + 3.0 * y as f64 + 1.0))
            .collect();
        let t = Tensor::from_vec(vec![1, 1, h, w], data).unwrap();
        let (oh, ow) = (7usize, 9usize);
        let up = t.interpolate_bilinear(oh, ow).unwrap();
        for oy in 0..oh {
            for ox in 0..ow {
                let xf = ox as f64 * (w - 1) as f64 / (ow - 1) as f64;
                let yf = oy as f64 * (h - 1) as f64 / (oh - 1) as f64;
                let expect = 2.0 * xf + 3.0 * yf + 1.0;
                let got = up.data()[oy * ow + ox];
                assert!((got - expect).abs() < 1e-12, "({ox},{oy}): {got} vs {expect}");
            }
        }
    }

    #[test]
    fn grid_sample_at_integer_coords_is_lookup() {
        let img = Tensor::from_vec(vec![1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let u = Tensor::from_vec(vec![3], vec![0.0, 2.0, 1.0]).unwrap();
        let v = Tensor::from_vec(vec![3], vec![0.0, 1.0, 0.0]).unwrap();
        let gs = img.grid_sample(&u, &v).unwrap();
        assert_eq!(gs.output.data(), &[1.0, 6.0, 2.0]);
        assert_eq!(gs.mask.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn grid_sample_outside_is_zero_and_masked() {
        let img = Tensor::<f64>::ones(vec![1, 2, 2]);
        let u = Tensor::from_vec(vec![4], vec![-0.5, 0.5, 1.5, 0.0]).unwrap();
        let v = Tensor::from_vec(vec![4], vec![0.0, 0.5, 0.0, 5.0]).unwrap();
        let gs = img.grid_sample(&u, &v).unwrap();
        assert_eq!(gs.mask.data(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(gs.output.data(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn grid_sample_subpixel_bilinear_value() {
        let img = Tensor::from_vec(vec![1, 2, 2], vec![0.0f64, 1.0, 2.0, 3.0]).unwrap();
        let u = Tensor::from_vec(vec![1], vec![0.25]).unwrap();
        let v = Tensor::from_vec(vec![1], vec![0.5]).unwrap();
        let gs = img.grid_sample(&u, &v).unwrap();
        // (1-fy)((1-fx)*0 + fx*1) + fy((1-fx)*2 + fx*3) = 0.5*0.25 + 0.5*2.25
        assert!((gs.output.data()[0] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn grid_sample_coordinate_gradient_matches_slope() {
        let img = Tensor::from_vec(vec![1, 1, 3], vec![0.0f64, 10.0, 20.0]).unwrap();
        let u = Tensor::from_vec(vec![1], vec![0.7]).unwrap().requires_grad_leaf();
        let v = Tensor::from_vec(vec![1], vec![0.0]).unwrap();
        let gs = img.grid_sample(&u, &v).unwrap();
        gs.output.sum_all().backward().unwrap();
        assert!((u.grad().unwrap()[0] - 10.0).abs() < 1e-12);
    }
}
