//! Matrix multiplication, softmax, layer normalization.

use crate::scalar::{s, Scalar};
use crate::tensor::{Result, Tensor, TensorError};

/// `c[m,n] += a[m,k] @ b[k,n]`, plain row-major kernels shared by forward
/// and backward passes.
fn matmul_acc<S: Scalar>(c: &mut [S], a: &[S], b: &[S], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[m,n] += a[m,k] @ b[n,k]^T`.
fn matmul_bt_acc<S: Scalar>(c: &mut [S], a: &[S], b: &[S], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = S::zero();
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            c[i * n + j] += acc;
        }
    }
}

/// `c[k,n] += a[m,k]^T @ b[m,n]`.
fn matmul_at_acc<S: Scalar>(c: &mut [S], a: &[S], b: &[S], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let b_row = &b[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            let c_row = &mut c[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

impl<S: Scalar> Tensor<S> {
    /// 2-D matrix product `[m,k] @ [k,n] -> [m,n]`.
    pub fn matmul(&self, other: &Tensor<S>) -> Result<Tensor<S>> {
        let (a_shape, b_shape) = (self.shape(), other.shape());
        if a_shape.len() != 2 || b_shape.len() != 2 || a_shape[1] != b_shape[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                detail: format!("{a_shape:?} @ {b_shape:?}"),
            });
        }
        let (m, k, n) = (a_shape[0], a_shape[1], b_shape[1]);
        let mut out = vec![S::zero(); m * n];
        matmul_acc(&mut out, self.data(), other.data(), m, k, n);
        Ok(Tensor::from_op(
            vec![m, n],
            out,
            vec![self.clone(), other.clone()],
            Box::new(move |g, parents| {
                let a = parents[0].data();
                let b = parents[1].data();
                let ga = parents[0].requires_grad().then(|| {
                    let mut ga = vec![S::zero(); m * k];
                    matmul_bt_acc(&mut ga, g, b, m, n, k); // dA = dC @ B^T
                    ga
                });
                let gb = parents[1].requires_grad().then(|| {
                    let mut gb = vec![S::zero(); k * n];
                    matmul_at_acc(&mut gb, a, g, m, k, n); // dB = A^T @ dC
                    gb
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Batched matrix product `[B,m,k] @ [B,k,n] -> [B,m,n]`.
    pub fn bmm(&self, other: &Tensor<S>) -> Result<Tensor<S>> {
        let (a_shape, b_shape) = (self.shape(), other.shape());
        if a_shape.len() != 3
            || b_shape.len() != 3
            || a_shape[0] != b_shape[0]
            || a_shape[2] != b_shape[1]
        {
            return Err(TensorError::ShapeMismatch {
                op: "bmm",
                detail: format!("{a_shape:?} @ {b_shape:?}"),
            });
        }
        let (bs, m, k, n) = (a_shape[0], a_shape[1], a_shape[2], b_shape[2]);
        let mut out = vec![S::zero(); bs * m * n];
        for i in 0..bs {
            matmul_acc(
                &mut out[i * m * n..(i + 1) * m * n],
                &self.data()[i * m * k..(i + 1) * m * k],
                &other.data()[i * k * n..(i + 1) * k * n],
                m,
                k,
                n,
            );
        }
        Ok(Tensor::from_op(
            vec![bs, m, n],
            out,
            vec![self.clone(), other.clone()],
            Box::new(move |g, parents| {
                let a = parents[0].data();
                let b = parents[1].data();
                let ga = parents[0].requires_grad().then(|| {
                    let mut ga = vec![S::zero(); bs * m * k];
                    for i in 0..bs {
                        matmul_bt_acc(
                            &mut ga[i * m * k..(i + 1) * m * k],
                            &g[i * m * n..(i + 1) * m * n],
                            &b[i * k * n..(i + 1) * k * n],
                            m,
                            n,
                            k,
                        );
                    }
                    ga
                });
                let gb = parents[1].requires_grad().then(|| {
                    let mut gb = vec![S::zero(); bs * k * n];
                    for i in 0..bs {
                        matmul_at_acc(
                            &mut gb[i * k * n..(i + 1) * k * n],
                            &a[i * m * k..(i + 1) * m * k],
                            &g[i * m * n..(i + 1) * m * n],
                            m,
                            k,
                            n,
                        );
                    }
                    gb
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Softmax over the last axis; rows sum to one.
    pub fn softmax_last(&self) -> Result<Tensor<S>> {
        if self.rank() == 0 || self.shape().is_empty() {
            return Err(TensorError::ShapeMismatch {
                op: "softmax",
                detail: "rank-0 tensor".into(),
            });
        }
        let cols = *self.shape().last().unwrap();
        let rows = self.numel() / cols.max(1);
        let x = self.data();
        let mut out = vec![S::zero(); self.numel()];
        for r in 0..rows {
            let row = &x[r * cols..(r + 1) * cols];
            let max = row.iter().copied().fold(S::neg_infinity(), S::max);
            let mut sum = S::zero();
            for (o, &v) in out[r * cols..(r + 1) * cols].iter_mut().zip(row) {
                *o = (v - max).exp();
                sum += *o;
            }
            let inv = S::one() / sum;
            for o in &mut out[r * cols..(r + 1) * cols] {
                *o = *o * inv;
            }
        }
        let saved = out.clone();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            vec![self.clone()],
            Box::new(move |g, _| {
                let mut gx = vec![S::zero(); saved.len()];
                for r in 0..rows {
                    let y = &saved[r * cols..(r + 1) * cols];
                    let gr = &g[r * cols..(r + 1) * cols];
                    let dot: S = y.iter().zip(gr).map(|(&yi, &gi)| yi * gi).sum();
                    for ((o, &yi), &gi) in gx[r * cols..(r + 1) * cols].iter_mut().zip(y).zip(gr) {
                        *o = yi * (gi - dot);
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Layer normalization over the last axis with optional affine weights
    /// (`gamma`, `beta` shaped `[last_dim]`).
    pub fn layer_norm_last(
        &self,
        gamma: Option<&Tensor<S>>,
        beta: Option<&Tensor<S>>,
        eps: f64,
    ) -> Result<Tensor<S>> {
        let cols = *self.shape().last().ok_or(TensorError::ShapeMismatch {
            op: "layer_norm",
            detail: "rank-0 tensor".into(),
        })?;
        for affine in [gamma, beta].into_iter().flatten() {
            if affine.shape() != [cols] {
                return Err(TensorError::ShapeMismatch {
                    op: "layer_norm",
                    detail: format!("affine shape {:?}, expected [{cols}]", affine.shape()),
                });
            }
        }
        let rows = self.numel() / cols;
        let eps: S = s(eps);
        let x = self.data();
        let mut xhat = vec![S::zero(); self.numel()];
        let mut inv_std = vec![S::zero(); rows];
        let inv_n = S::one() / s::<S>(cols as f64);
        for r in 0..rows {
            let row = &x[r * cols..(r + 1) * cols];
            let mean = row.iter().copied().sum::<S>() * inv_n;
            let var = row
                .iter()
                .map(|&v| (v - mean) * (v - mean))
                .sum::<S>()
                * inv_n;
            let istd = S::one() / (var + eps).sqrt();
            inv_std[r] = istd;
            for (o, &v) in xhat[r * cols..(r + 1) * cols].iter_mut().zip(row) {
                *o = (v - mean) * istd;
            }
        }
        let out: Vec<S> = match (gamma, beta) {
            (Some(gm), Some(bt)) => xhat
                .iter()
                .enumerate()
                .map(|(i, &v)| v * gm.data()[i % cols] + bt.data()[i % cols])
                .collect(),
            (Some(gm), None) => xhat
                .iter()
                .enumerate()
                .map(|(i, &v)| v * gm.data()[i % cols])
                .collect(),
            (None, Some(bt)) => xhat
                .iter()
                .enumerate()
                .map(|(i, &v)| v + bt.data()[i % cols])
                .collect(),
            (None, None) => xhat.clone(),
        };

        let mut parents = vec![self.clone()];
        let gamma_idx = gamma.map(|gm| {
            parents.push(gm.clone());
            parents.len() - 1
        });
        let beta_idx = beta.map(|bt| {
            parents.push(bt.clone());
            parents.len() - 1
        });
        let n_parents = parents.len();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            parents,
            Box::new(move |g, parents| {
                let mut grads: Vec<Option<Vec<S>>> = vec![None; n_parents];
                let gamma_data = gamma_idx.map(|i| parents[i].data());
                if parents[0].requires_grad() {
                    let mut gx = vec![S::zero(); xhat.len()];
                    for r in 0..rows {
                        let xh = &xhat[r * cols..(r + 1) * cols];
                        let gr = &g[r * cols..(r + 1) * cols];
                        // d/dxhat = g * gamma
                        let dxhat: Vec<S> = match gamma_data {
                            Some(gm) => gr.iter().zip(gm).map(|(&gi, &w)| gi * w).collect(),
                            None => gr.to_vec(),
                        };
                        let mean_dxhat = dxhat.iter().copied().sum::<S>() * inv_n;
                        let mean_dxhat_xhat = dxhat
                            .iter()
                            .zip(xh)
                            .map(|(&d, &h)| d * h)
                            .sum::<S>()
                            * inv_n;
                        for ((o, &d), &h) in gx[r * cols..(r + 1) * cols]
                            .iter_mut()
                            .zip(&dxhat)
                            .zip(xh)
                        {
                            *o = inv_std[r] * (d - mean_dxhat - h * mean_dxhat_xhat);
                        }
                    }
                    grads[0] = Some(gx);
                }
                if let Some(gi) = gamma_idx {
                    if parents[gi].requires_grad() {
                        let mut gg = vec![S::zero(); cols];
                        for r in 0..rows {
                            for c in 0..cols {
                                gg[c] += g[r * cols + c] * xhat[r * cols + c];
                            }
                        }
                        grads[gi] = Some(gg);
                    }
                }
                if let Some(bi) = beta_idx {
                    if parents[bi].requires_grad() {
                        let mut gb = vec![S::zero(); cols];
                        for r in 0..rows {
                            for c in 0..cols {
                                gb[c] += g[r * cols + c];
                            }
                        }
                        grads[bi] = Some(gb);
                    }
                }
                grads
            }),
        ))
    }
}
