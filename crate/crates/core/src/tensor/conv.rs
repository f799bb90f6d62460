//! 2-D convolution (grouped, zero padding), 2x2 average pooling, and a 3x3
//! replicate-border mean filter used by local image statistics.

use crate::scalar::{s, Scalar};
use crate::tensor::{Result, Tensor, TensorError};

/// Stride/padding/groups of a convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub groups: usize,
}

impl Conv2dSpec {
    pub fn new(stride: usize, padding: usize) -> Self {
        Conv2dSpec { stride: (stride, stride), padding: (padding, padding), groups: 1 }
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }
}

struct ConvDims {
    batch: usize,
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    out_h: usize,
    out_w: usize,
}

fn conv_dims<S: Scalar>(
    input: &Tensor<S>,
    weight: &Tensor<S>,
    spec: Conv2dSpec,
) -> Result<ConvDims> {
    let ishape = input.shape();
    let wshape = weight.shape();
    if ishape.len() != 4 || wshape.len() != 4 {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!("input {ishape:?}, weight {wshape:?}; both must be rank 4"),
        });
    }
    let (batch, c_in, h, w) = (ishape[0], ishape[1], ishape[2], ishape[3]);
    let (c_out, wc, kh, kw) = (wshape[0], wshape[1], wshape[2], wshape[3]);
    if spec.groups == 0 || c_in % spec.groups != 0 || c_out % spec.groups != 0 {
        return Err(TensorError::InvalidGeometry {
            op: "conv2d",
            detail: format!("groups {} must divide c_in {c_in} and c_out {c_out}", spec.groups),
        });
    }
    if wc != c_in / spec.groups {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!("weight channel dim {wc} != c_in/groups {}", c_in / spec.groups),
        });
    }
    let (sy, sx) = spec.stride;
    let (py, px) = spec.padding;
    if sy == 0 || sx == 0 {
        return Err(TensorError::InvalidGeometry { op: "conv2d", detail: "zero stride".into() });
    }
    let h_pad = h + 2 * py;
    let w_pad = w + 2 * px;
    if h_pad < kh || w_pad < kw {
        return Err(TensorError::InvalidGeometry {
            op: "conv2d",
            detail: format!("kernel {kh}x{kw} larger than padded input {h_pad}x{w_pad}"),
        });
    }
    let out_h = (h_pad - kh) / sy + 1;
    let out_w = (w_pad - kw) / sx + 1;
    if out_h == 0 || out_w == 0 {
        return Err(TensorError::InvalidGeometry {
            op: "conv2d",
            detail: format!("nonpositive output size {out_h}x{out_w}"),
        });
    }
    Ok(ConvDims { batch, c_in, h, w, c_out, kh, kw, out_h, out_w })
}

/// Valid output-column range `[lo, hi)` such that `wo*sx + kw - px` stays in
/// `[0, w)`.
#[inline]
fn col_range(out_w: usize, w: usize, sx: usize, px: usize, kx: usize) -> (usize, usize) {
    let lo = px.saturating_sub(kx).div_ceil(sx);
    let hi = if w + px > kx { (((w + px - kx - 1) / sx) + 1).min(out_w) } else { 0 };
    (lo.min(hi), hi)
}

#[allow(clippy::too_many_arguments)]
fn conv2d_forward<S: Scalar>(
    x: &[S],
    wgt: &[S],
    bias: Option<&[S]>,
    d: &ConvDims,
    spec: Conv2dSpec,
) -> Vec<S> {
    let (sy, sx) = spec.stride;
    let (py, px) = spec.padding;
    let cig = d.c_in / spec.groups;
    let cog = d.c_out / spec.groups;
    let mut out = vec![S::zero(); d.batch * d.c_out * d.out_h * d.out_w];
    for b in 0..d.batch {
        for g in 0..spec.groups {
            for co_g in 0..cog {
                let co = g * cog + co_g;
                let out_base = (b * d.c_out + co) * d.out_h * d.out_w;
                if let Some(bias) = bias {
                    let bv = bias[co];
                    for o in &mut out[out_base..out_base + d.out_h * d.out_w] {
                        *o = bv;
                    }
                }
                for ci_g in 0..cig {
                    let ci = g * cig + ci_g;
                    let in_base = (b * d.c_in + ci) * d.h * d.w;
                    let w_base = ((co * cig) + ci_g) * d.kh * d.kw;
                    for ky in 0..d.kh {
                        for kx in 0..d.kw {
                            let wv = wgt[w_base + ky * d.kw + kx];
                            if wv == S::zero() {
                                continue;
                            }
                            let (lo, hi) = col_range(d.out_w, d.w, sx, px, kx);
                            if lo >= hi {
                                continue;
                            }
                            for ho in 0..d.out_h {
                                let iy = (ho * sy + ky) as isize - py as isize;
                                if iy < 0 || iy as usize >= d.h {
                                    continue;
                                }
                                let in_row = in_base + iy as usize * d.w;
                                let out_row = out_base + ho * d.out_w;
                                if sx == 1 {
                                    let src = &x[in_row + lo + kx - px..in_row + hi + kx - px];
                                    let dst = &mut out[out_row + lo..out_row + hi];
                                    for (o, &v) in dst.iter_mut().zip(src) {
                                        *o += wv * v;
                                    }
                                } else {
                                    for wo in lo..hi {
                                        let ix = wo * sx + kx - px;
                                        out[out_row + wo] += wv * x[in_row + ix];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

impl<S: Scalar> Tensor<S> {
    /// Grouped 2-D convolution over `[B, C, H, W]` input with zero padding.
    /// `weight` is `[C_out, C_in/groups, kh, kw]`, `bias` is `[C_out]`.
    /// `groups == C` with `C_out == C` gives a depthwise convolution.
    pub fn conv2d(
        &self,
        weight: &Tensor<S>,
        bias: Option<&Tensor<S>>,
        spec: Conv2dSpec,
    ) -> Result<Tensor<S>> {
        let d = conv_dims(self, weight, spec)?;
        if let Some(b) = bias {
            if b.shape() != [d.c_out] {
                return Err(TensorError::ShapeMismatch {
                    op: "conv2d",
                    detail: format!("bias shape {:?}, expected [{}]", b.shape(), d.c_out),
                });
            }
        }
        let out = conv2d_forward(self.data(), weight.data(), bias.map(|b| b.data()), &d, spec);
        let out_shape = vec![d.batch, d.c_out, d.out_h, d.out_w];

        let mut parents = vec![self.clone(), weight.clone()];
        let has_bias = bias.is_some();
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        let dims = d;
        Ok(Tensor::from_op(
            out_shape,
            out,
            parents,
            Box::new(move |g, parents| {
                let d = &dims;
                let (sy, sx) = spec.stride;
                let (py, px) = spec.padding;
                let cig = d.c_in / spec.groups;
                let cog = d.c_out / spec.groups;
                let x = parents[0].data();
                let wgt = parents[1].data();
                let want_dx = parents[0].requires_grad();
                let want_dw = parents[1].requires_grad();
                let mut dx = want_dx.then(|| vec![S::zero(); x.len()]);
                let mut dw = want_dw.then(|| vec![S::zero(); wgt.len()]);
                for b in 0..d.batch {
                    for grp in 0..spec.groups {
                        for co_g in 0..cog {
                            let co = grp * cog + co_g;
                            let out_base = (b * d.c_out + co) * d.out_h * d.out_w;
                            for ci_g in 0..cig {
                                let ci = grp * cig + ci_g;
                                let in_base = (b * d.c_in + ci) * d.h * d.w;
                                let w_base = ((co * cig) + ci_g) * d.kh * d.kw;
                                for ky in 0..d.kh {
                                    for kx in 0..d.kw {
                                        let wv = wgt[w_base + ky * d.kw + kx];
                                        let mut wacc = S::zero();
                                        let (lo, hi) = col_range(d.out_w, d.w, sx, px, kx);
                                        if lo >= hi {
                                            continue;
                                        }
                                        for ho in 0..d.out_h {
                                            let iy = (ho * sy + ky) as isize - py as isize;
                                            if iy < 0 || iy as usize >= d.h {
                                                continue;
                                            }
                                            let in_row = in_base + iy as usize * d.w;
                                            let out_row = out_base + ho * d.out_w;
                                            let g_row = &g[out_row + lo..out_row + hi];
                                            if sx == 1 {
                                                let span = in_row + lo + kx - px
                                                    ..in_row + hi + kx - px;
                                                if let Some(dx) = dx.as_mut() {
                                                    for (o, &gv) in
                                                        dx[span.clone()].iter_mut().zip(g_row)
                                                    {
                                                        *o += wv * gv;
                                                    }
                                                }
                                                if want_dw {
                                                    for (&xv, &gv) in
                                                        x[span].iter().zip(g_row)
                                                    {
                                                        wacc += xv * gv;
                                                    }
                                                }
                                            } else {
                                                match (dx.as_mut(), want_dw) {
                                                    (Some(dx), true) => {
                                                        for (i, &gv) in g_row.iter().enumerate() {
                                                            let ix = (lo + i) * sx + kx - px;
                                                            dx[in_row + ix] += wv * gv;
                                                            wacc += x[in_row + ix] * gv;
                                                        }
                                                    }
                                                    (Some(dx), false) => {
                                                        for (i, &gv) in g_row.iter().enumerate() {
                                                            let ix = (lo + i) * sx + kx - px;
                                                            dx[in_row + ix] += wv * gv;
                                                        }
                                                    }
                                                    (None, true) => {
                                                        for (i, &gv) in g_row.iter().enumerate() {
                                                            let ix = (lo + i) * sx + kx - px;
                                                            wacc += x[in_row + ix] * gv;
                                                        }
                                                    }
                                                    (None, false) => {}
                                                }
                                            }
                                        }
                                        if let Some(dw) = dw.as_mut() {
                                            dw[w_base + ky * d.kw + kx] += wacc;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                let mut grads = vec![dx, dw];
                if has_bias {
                    let db = parents[2].requires_grad().then(|| {
                        let mut db = vec![S::zero(); d.c_out];
                        let plane = d.out_h * d.out_w;
                        for b in 0..d.batch {
                            for co in 0..d.c_out {
                                let base = (b * d.c_out + co) * plane;
                                db[co] += g[base..base + plane].iter().copied().sum::<S>();
                            }
                        }
                        db
                    });
                    grads.push(db);
                }
                grads
            }),
        ))
    }

    /// 2x2 average pooling with stride 2; spatial dimensions must be even.
    pub fn avg_pool2(&self) -> Result<Tensor<S>> {
        let shape = self.shape();
        if shape.len() != 4 || shape[2] % 2 != 0 || shape[3] % 2 != 0 {
            return Err(TensorError::InvalidGeometry {
                op: "avg_pool2",
                detail: format!("needs [B,C,H,W] with even H,W, got {shape:?}"),
            });
        }
        let (b, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let (oh, ow) = (h / 2, w / 2);
        let x = self.data();
        let quarter: S = s(0.25);
        let mut out = vec![S::zero(); b * c * oh * ow];
        for bc in 0..b * c {
            let in_base = bc * h * w;
            let out_base = bc * oh * ow;
            for y in 0..oh {
                let r0 = in_base + (2 * y) * w;
                let r1 = r0 + w;
                for xo in 0..ow {
                    let i = 2 * xo;
                    out[out_base + y * ow + xo] =
                        (x[r0 + i] + x[r0 + i + 1] + x[r1 + i] + x[r1 + i + 1]) * quarter;
                }
            }
        }
        Ok(Tensor::from_op(
            vec![b, c, oh, ow],
            out,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let mut dx = vec![S::zero(); parents[0].numel()];
                for bc in 0..b * c {
                    let in_base = bc * h * w;
                    let out_base = bc * oh * ow;
                    for y in 0..oh {
                        let r0 = in_base + (2 * y) * w;
                        let r1 = r0 + w;
                        for xo in 0..ow {
                            let gv = g[out_base + y * ow + xo] * quarter;
                            let i = 2 * xo;
                            dx[r0 + i] += gv;
                            dx[r0 + i + 1] += gv;
                            dx[r1 + i] += gv;
                            dx[r1 + i + 1] += gv;
                        }
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// 3x3 mean filter with replicated borders; output has the input's size.
    /// Used for local image statistics (SSIM windows). Implemented as two
    /// separable passes.
    pub fn mean_filter3(&self) -> Result<Tensor<S>> {
        let shape = self.shape();
        if shape.len() != 4 {
            return Err(TensorError::ShapeMismatch {
                op: "mean_filter3",
                detail: format!("needs [B,C,H,W], got {shape:?}"),
            });
        }
        let (b, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let x = self.data();
        let mut tmp = vec![S::zero(); x.len()];
        mean3_rows(x, &mut tmp, b * c, h, w);
        let mut out = vec![S::zero(); x.len()];
        mean3_cols(&tmp, &mut out, b * c, h, w);
        Ok(Tensor::from_op(
            shape.to_vec(),
            out,
            vec![self.clone()],
            Box::new(move |g, parents| {
                // both passes are symmetric linear maps, so the transpose
                // is the same pass applied in reverse order
                let mut tmp = vec![S::zero(); parents[0].numel()];
                mean3_cols_t(g, &mut tmp, b * c, h, w);
                let mut dx = vec![S::zero(); parents[0].numel()];
                mean3_rows_t(&tmp, &mut dx, b * c, h, w);
                vec![Some(dx)]
            }),
        ))
    }
}

/// Horizontal 3-tap mean with replicated borders, per row.
fn mean3_rows<S: Scalar>(x: &[S], out: &mut [S], planes: usize, h: usize, w: usize) {
    let third: S = S::one() / s::<S>(3.0);
    for p in 0..planes * h {
        let row = &x[p * w..(p + 1) * w];
        let dst = &mut out[p * w..(p + 1) * w];
        if w == 1 {
            dst[0] = row[0];
            continue;
        }
        dst[0] = (row[0] + row[0] + row[1]) * third;
        for i in 1..w - 1 {
            dst[i] = (row[i - 1] + row[i] + row[i + 1]) * third;
        }
        dst[w - 1] = (row[w - 2] + row[w - 1] + row[w - 1]) * third;
    }
}

/// Transpose of [`mean3_rows`]: scatter form of the replicated 3-tap mean.
fn mean3_rows_t<S: Scalar>(g: &[S], out: &mut [S], planes: usize, h: usize, w: usize) {
    let third: S = S::one() / s::<S>(3.0);
    for p in 0..planes * h {
        let grow = &g[p * w..(p + 1) * w];
        let dst = &mut out[p * w..(p + 1) * w];
        if w == 1 {
            dst[0] += grow[0];
            continue;
        }
        dst[0] += (grow[0] + grow[0] + grow[1]) * third;
        for i in 1..w - 1 {
            dst[i] += (grow[i - 1] + grow[i] + grow[i + 1]) * third;
        }
        dst[w - 1] += (grow[w - 2] + grow[w - 1] + grow[w - 1]) * third;
    }
}

/// Vertical 3-tap mean with replicated borders, per column.
fn mean3_cols<S: Scalar>(x: &[S], out: &mut [S], planes: usize, h: usize, w: usize) {
    let third: S = S::one() / s::<S>(3.0);
    for p in 0..planes {
        let base = p * h * w;
        for y in 0..h {
            let y0 = base + y.saturating_sub(1) * w;
            let y1 = base + y * w;
            let y2 = base + (y + 1).min(h - 1) * w;
            let dst = &mut out[base + y * w..base + (y + 1) * w];
            for (i, o) in dst.iter_mut().enumerate() {
                *o = (x[y0 + i] + x[y1 + i] + x[y2 + i]) * third;
            }
        }
    }
}

/// Transpose of [`mean3_cols`]; the vertical mean is symmetric in the same
/// replicated sense, so the transpose has the identical tap pattern.
fn mean3_cols_t<S: Scalar>(g: &[S], out: &mut [S], planes: usize, h: usize, w: usize) {
    mean3_cols(g, out, planes, h, w);
}
