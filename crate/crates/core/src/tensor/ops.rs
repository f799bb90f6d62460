//! Elementwise operations (with trailing-dimension broadcasting), scalar
//! ops, activations, and reductions.

use crate::scalar::{s, Scalar};
use crate::tensor::{strides_of, Result, Tensor, TensorError};

/// Broadcast shape of two operand shapes under standard trailing-dimension
/// rules: dimensions align from the right, sizes must match or be 1.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        if da != db && da != 1 && db != 1 {
            return Err(TensorError::NotBroadcastable { lhs: a.to_vec(), rhs: b.to_vec() });
        }
        out[i] = da.max(db);
    }
    Ok(out)
}

/// Walks the broadcast output space, calling `f(a_flat, b_flat)` for every
/// output element in row-major order.
fn bcast_for_each(
    out_shape: &[usize],
    a_shape: &[usize],
    b_shape: &[usize],
    mut f: impl FnMut(usize, usize),
) {
    let rank = out_shape.len();
    let pad = |src: &[usize]| {
        let mut p = vec![1usize; rank];
        p[rank - src.len()..].copy_from_slice(src);
        p
    };
    let pa = pad(a_shape);
    let pb = pad(b_shape);
    // effective strides: zero along broadcast dimensions
    let eff = |p: &[usize]| {
        let raw = strides_of(p);
        p.iter()
            .zip(raw)
            .map(|(&d, s)| if d == 1 { 0 } else { s })
            .collect::<Vec<usize>>()
    };
    let sa = eff(&pa);
    let sb = eff(&pb);
    let numel: usize = out_shape.iter().product();
    let mut coords = vec![0usize; rank];
    let (mut ai, mut bi) = (0usize, 0usize);
    for _ in 0..numel {
        f(ai, bi);
        for d in (0..rank).rev() {
            coords[d] += 1;
            ai += sa[d];
            bi += sb[d];
            if coords[d] < out_shape[d] {
                break;
            }
            coords[d] = 0;
            ai -= sa[d] * out_shape[d];
            bi -= sb[d] * out_shape[d];
        }
    }
}

impl<S: Scalar> Tensor<S> {
    fn binary_op(
        &self,
        other: &Tensor<S>,
        f: impl Fn(S, S) -> S,
        da: impl Fn(S, S) -> S + Copy + Send + Sync + 'static,
        db: impl Fn(S, S) -> S + Copy + Send + Sync + 'static,
    ) -> Result<Tensor<S>> {
        if self.shape() == other.shape() {
            let a = self.data();
            let b = other.data();
            let out: Vec<S> = a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect();
            return Ok(Tensor::from_op(
                self.shape().to_vec(),
                out,
                vec![self.clone(), other.clone()],
                Box::new(move |g, parents| {
                    let a = parents[0].data();
                    let b = parents[1].data();
                    let ga = parents[0].requires_grad().then(|| {
                        g.iter()
                            .zip(a.iter().zip(b))
                            .map(|(&gi, (&x, &y))| gi * da(x, y))
                            .collect()
                    });
                    let gb = parents[1].requires_grad().then(|| {
                        g.iter()
                            .zip(a.iter().zip(b))
                            .map(|(&gi, (&x, &y))| gi * db(x, y))
                            .collect()
                    });
                    vec![ga, gb]
                }),
            ));
        }

        let out_shape = broadcast_shape(self.shape(), other.shape())?;
        let a = self.data();
        let b = other.data();
        let numel: usize = out_shape.iter().product();
        let mut out = Vec::with_capacity(numel);
        bcast_for_each(&out_shape, self.shape(), other.shape(), |i, j| {
            out.push(f(a[i], b[j]));
        });
        let a_shape = self.shape().to_vec();
        let b_shape = other.shape().to_vec();
        let out_shape_saved = out_shape.clone();
        Ok(Tensor::from_op(
            out_shape,
            out,
            vec![self.clone(), other.clone()],
            Box::new(move |g, parents| {
                let a = parents[0].data();
                let b = parents[1].data();
                let mut ga = parents[0]
                    .requires_grad()
                    .then(|| vec![S::zero(); a.len()]);
                let mut gb = parents[1]
                    .requires_grad()
                    .then(|| vec![S::zero(); b.len()]);
                let mut k = 0usize;
                bcast_for_each(&out_shape_saved, &a_shape, &b_shape, |i, j| {
                    let (x, y) = (a[i], b[j]);
                    if let Some(ga) = ga.as_mut() {
                        ga[i] += g[k] * da(x, y);
                    }
                    if let Some(gb) = gb.as_mut() {
                        gb[j] += g[k] * db(x, y);
                    }
                    k += 1;
                });
                vec![ga, gb]
            }),
        ))
    }

    fn unary_op(
        &self,
        f: impl Fn(S) -> S,
        // (x, y) -> dy/dx, where y = f(x)
        df: impl Fn(S, S) -> S + Send + Sync + 'static,
    ) -> Tensor<S> {
        let out: Vec<S> = self.data().iter().map(|&x| f(x)).collect();
        let saved = out.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            out,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let x = parents[0].data();
                let gx = g
                    .iter()
                    .zip(x.iter().zip(&saved))
                    .map(|(&gi, (&xi, &yi))| gi * df(xi, yi))
                    .collect();
                vec![Some(gx)]
            }),
        )
    }

    pub fn add(&self, other: &Tensor<S>) -> Result<Tensor<S>> {
        self.binary_op(other, |a, b| a + b, |_, _| S::one(), |_, _| S::one())
    }

    pub fn sub(&self, other: &Tensor<S>) -> Result<Tensor<S>> {
        self.binary_op(other, |a, b| a - b, |_, _| S::one(), |_, _| -S::one())
    }

    pub fn mul(&self, other: &Tensor<S>) -> Result<Tensor<S>> {
        self.binary_op(other, |a, b| a * b, |_, b| b, |a, _| a)
    }

    pub fn div(&self, other: &Tensor<S>) -> Result<Tensor<S>> {
        self.binary_op(other, |a, b| a / b, |_, b| S::one() / b, |a, b| -a / (b * b))
    }

    /// Elementwise minimum; on ties the gradient routes to `self`.
    pub fn minimum(&self, other: &Tensor<S>) -> Result<Tensor<S>> {
        self.binary_op(
            other,
            |a, b| a.min(b),
            |a, b| if a <= b { S::one() } else { S::zero() },
            |a, b| if a <= b { S::zero() } else { S::one() },
        )
    }

    /// Elementwise maximum; on ties the gradient routes to `self`.
    pub fn maximum(&self, other: &Tensor<S>) -> Result<Tensor<S>> {
        self.binary_op(
            other,
            |a, b| a.max(b),
            |a, b| if a >= b { S::one() } else { S::zero() },
            |a, b| if a >= b { S::zero() } else { S::one() },
        )
    }

    pub fn neg(&self) -> Tensor<S> {
        self.unary_op(|x| -x, |_, _| -S::one())
    }

    pub fn abs(&self) -> Tensor<S> {
        self.unary_op(
            |x| x.abs(),
            |x, _| {
                if x > S::zero() {
                    S::one()
                } else if x < S::zero() {
                    -S::one()
                } else {
                    S::zero()
                }
            },
        )
    }

    pub fn exp(&self) -> Tensor<S> {
        self.unary_op(|x| x.exp(), |_, y| y)
    }

    pub fn ln(&self) -> Tensor<S> {
        self.unary_op(|x| x.ln(), |x, _| S::one() / x)
    }

    pub fn sqrt(&self) -> Tensor<S> {
        self.unary_op(|x| x.sqrt(), |_, y| S::one() / (s::<S>(2.0) * y))
    }

    pub fn sin(&self) -> Tensor<S> {
        self.unary_op(|x| x.sin(), |x, _| x.cos())
    }

    pub fn cos(&self) -> Tensor<S> {
        self.unary_op(|x| x.cos(), |x, _| -x.sin())
    }

    pub fn tanh(&self) -> Tensor<S> {
        self.unary_op(|x| x.tanh(), |_, y| S::one() - y * y)
    }

    pub fn sigmoid(&self) -> Tensor<S> {
        self.unary_op(
            |x| S::one() / (S::one() + (-x).exp()),
            |_, y| y * (S::one() - y),
        )
    }

    pub fn relu(&self) -> Tensor<S> {
        self.unary_op(
            |x| x.max(S::zero()),
            |x, _| if x > S::zero() { S::one() } else { S::zero() },
        )
    }

    /// ELU with `alpha = 1`.
    pub fn elu(&self) -> Tensor<S> {
        self.unary_op(
            |x| if x > S::zero() { x } else { x.exp() - S::one() },
            |x, y| if x > S::zero() { S::one() } else { y + S::one() },
        )
    }

    /// GELU, tanh approximation.
    pub fn gelu(&self) -> Tensor<S> {
        let c: S = s(0.797_884_560_802_865_4); // sqrt(2/pi)
        let k: S = s(0.044715);
        let half: S = s(0.5);
        let three: S = s(3.0);
        self.unary_op(
            move |x| {
                let u = c * (x + k * x * x * x);
                half * x * (S::one() + u.tanh())
            },
            move |x, _| {
                let u = c * (x + k * x * x * x);
                let t = u.tanh();
                let du = c * (S::one() + three * k * x * x);
                half * (S::one() + t) + half * x * (S::one() - t * t) * du
            },
        )
    }

    pub fn recip(&self) -> Tensor<S> {
        self.unary_op(|x| S::one() / x, |_, y| -(y * y))
    }

    pub fn square(&self) -> Tensor<S> {
        self.unary_op(|x| x * x, |x, _| s::<S>(2.0) * x)
    }

    pub fn add_scalar(&self, c: impl Into<f64>) -> Tensor<S> {
        let c: S = s(c.into());
        self.unary_op(move |x| x + c, |_, _| S::one())
    }

    pub fn mul_scalar(&self, c: impl Into<f64>) -> Tensor<S> {
        let c: S = s(c.into());
        self.unary_op(move |x| x * c, move |_, _| c)
    }

    /// Clamps below at `lo`; gradient is zero where the clamp is active.
    pub fn clamp_min(&self, lo: impl Into<f64>) -> Tensor<S> {
        let lo: S = s(lo.into());
        self.unary_op(
            move |x| x.max(lo),
            move |x, _| if x >= lo { S::one() } else { S::zero() },
        )
    }

    pub fn clamp(&self, lo: impl Into<f64>, hi: impl Into<f64>) -> Tensor<S> {
        let lo: S = s(lo.into());
        let hi: S = s(hi.into());
        self.unary_op(
            move |x| x.max(lo).min(hi),
            move |x, _| if x >= lo && x <= hi { S::one() } else { S::zero() },
        )
    }

    pub fn sum_all(&self) -> Tensor<S> {
        let total: S = self.data().iter().copied().sum();
        Tensor::from_op(
            vec![1],
            vec![total],
            vec![self.clone()],
            Box::new(|g, parents| {
                vec![Some(vec![g[0]; parents[0].numel()])]
            }),
        )
    }

    pub fn mean_all(&self) -> Tensor<S> {
        let n = self.numel().max(1);
        let inv: S = S::one() / s::<S>(n as f64);
        let total: S = self.data().iter().copied().sum::<S>() * inv;
        Tensor::from_op(
            vec![1],
            vec![total],
            vec![self.clone()],
            Box::new(move |g, parents| {
                vec![Some(vec![g[0] * inv; parents[0].numel()])]
            }),
        )
    }

    /// Sums over one axis, keeping it as size 1.
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor<S>> {
        if axis >= self.rank() {
            return Err(TensorError::ShapeMismatch {
                op: "sum_axis",
                detail: format!("axis {axis} out of range for shape {:?}", self.shape()),
            });
        }
        let shape = self.shape();
        let outer: usize = shape[..axis].iter().product();
        let axis_len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out_shape = shape.to_vec();
        out_shape[axis] = 1;
        let x = self.data();
        let mut out = vec![S::zero(); outer * inner];
        for o in 0..outer {
            for a in 0..axis_len {
                let base = (o * axis_len + a) * inner;
                let obase = o * inner;
                for i in 0..inner {
                    out[obase + i] += x[base + i];
                }
            }
        }
        Ok(Tensor::from_op(
            out_shape,
            out,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let mut gx = vec![S::zero(); parents[0].numel()];
                for o in 0..outer {
                    for a in 0..axis_len {
                        let base = (o * axis_len + a) * inner;
                        let obase = o * inner;
                        for i in 0..inner {
                            gx[base + i] = g[obase + i];
                        }
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Tensor<S>> {
        let n = self.shape().get(axis).copied().unwrap_or(1).max(1);
        Ok(self.sum_axis(axis)?.mul_scalar(1.0 / n as f64))
    }
}
