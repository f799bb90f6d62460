//! Shape manipulation: reshape, permute, narrow, concat.

use crate::scalar::Scalar;
use crate::tensor::{strides_of, Result, Tensor, TensorError};

impl<S: Scalar> Tensor<S> {
    /// Reinterprets the buffer with a new shape of identical element count.
    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Tensor<S>> {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        if n != self.numel() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                detail: format!("cannot view {:?} as {:?}", self.shape(), shape),
            });
        }
        Ok(Tensor::from_op(
            shape,
            self.data().to_vec(),
            vec![self.clone()],
            Box::new(|g, _| vec![Some(g.to_vec())]),
        ))
    }

    pub fn unsqueeze(&self, axis: usize) -> Result<Tensor<S>> {
        let mut shape = self.shape().to_vec();
        if axis > shape.len() {
            return Err(TensorError::ShapeMismatch {
                op: "unsqueeze",
                detail: format!("axis {axis} out of range for rank {}", shape.len()),
            });
        }
        shape.insert(axis, 1);
        self.reshape(shape)
    }

    pub fn squeeze(&self, axis: usize) -> Result<Tensor<S>> {
        let mut shape = self.shape().to_vec();
        if axis >= shape.len() || shape[axis] != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "squeeze",
                detail: format!("axis {axis} of {:?} is not 1", self.shape()),
            });
        }
        shape.remove(axis);
        self.reshape(shape)
    }

    /// Reorders axes; `perm` must be a permutation of `0..rank`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor<S>> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(TensorError::ShapeMismatch {
                op: "permute",
                detail: format!("{perm:?} is not a permutation of 0..{rank}"),
            });
        }
        let src_shape = self.shape().to_vec();
        let out_shape: Vec<usize> = perm.iter().map(|&p| src_shape[p]).collect();
        let out = permute_copy(self.data(), &src_shape, perm);
        let perm_owned = perm.to_vec();
        Ok(Tensor::from_op(
            out_shape.clone(),
            out,
            vec![self.clone()],
            Box::new(move |g, _| {
                // inverse permutation maps output axes back to input axes
                let mut inv = vec![0usize; perm_owned.len()];
                for (i, &p) in perm_owned.iter().enumerate() {
                    inv[p] = i;
                }
                vec![Some(permute_copy(g, &out_shape, &inv))]
            }),
        ))
    }

    /// Slice of length `len` starting at `start` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor<S>> {
        let shape = self.shape();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(TensorError::ShapeMismatch {
                op: "narrow",
                detail: format!("range {start}..{} out of axis {axis} of {shape:?}", start + len),
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let axis_len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out_shape = shape.to_vec();
        out_shape[axis] = len;
        let x = self.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * axis_len + start) * inner;
            out.extend_from_slice(&x[base..base + len * inner]);
        }
        Ok(Tensor::from_op(
            out_shape,
            out,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let mut gx = vec![S::zero(); parents[0].numel()];
                for o in 0..outer {
                    let base = (o * axis_len + start) * inner;
                    gx[base..base + len * inner].copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Concatenates tensors along `axis`; all other dimensions must match.
    pub fn concat(parts: &[&Tensor<S>], axis: usize) -> Result<Tensor<S>> {
        let first = parts.first().ok_or(TensorError::ShapeMismatch {
            op: "concat",
            detail: "empty input list".into(),
        })?;
        let rank = first.rank();
        if axis >= rank {
            return Err(TensorError::ShapeMismatch {
                op: "concat",
                detail: format!("axis {axis} out of range for rank {rank}"),
            });
        }
        let mut axis_total = 0;
        for p in parts {
            if p.rank() != rank {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    detail: format!("rank mismatch: {:?} vs {:?}", first.shape(), p.shape()),
                });
            }
            for d in 0..rank {
                if d != axis && p.shape()[d] != first.shape()[d] {
                    return Err(TensorError::ShapeMismatch {
                        op: "concat",
                        detail: format!("shape mismatch: {:?} vs {:?}", first.shape(), p.shape()),
                    });
                }
            }
            axis_total += p.shape()[axis];
        }
        let mut out_shape = first.shape().to_vec();
        out_shape[axis] = axis_total;
        let outer: usize = out_shape[..axis].iter().product();
        let inner: usize = out_shape[axis + 1..].iter().product();
        let lens: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();

        let mut out = vec![S::zero(); outer * axis_total * inner];
        let mut offset = 0;
        for (p, &len) in parts.iter().zip(&lens) {
            let x = p.data();
            for o in 0..outer {
                let dst = (o * axis_total + offset) * inner;
                let src = o * len * inner;
                out[dst..dst + len * inner].copy_from_slice(&x[src..src + len * inner]);
            }
            offset += len;
        }
        let parents: Vec<Tensor<S>> = parts.iter().map(|p| (*p).clone()).collect();
        Ok(Tensor::from_op(
            out_shape,
            out,
            parents,
            Box::new(move |g, parents| {
                let mut grads = Vec::with_capacity(parents.len());
                let mut offset = 0;
                for (p, &len) in parents.iter().zip(&lens) {
                    if !p.requires_grad() {
                        grads.push(None);
                        offset += len;
                        continue;
                    }
                    let mut gp = vec![S::zero(); p.numel()];
                    for o in 0..outer {
                        let src = (o * axis_total + offset) * inner;
                        let dst = o * len * inner;
                        gp[dst..dst + len * inner].copy_from_slice(&g[src..src + len * inner]);
                    }
                    grads.push(Some(gp));
                    offset += len;
                }
                grads
            }),
        ))
    }
}

fn permute_copy<S: Scalar>(src: &[S], src_shape: &[usize], perm: &[usize]) -> Vec<S> {
    let rank = src_shape.len();
    let out_shape: Vec<usize> = perm.iter().map(|&p| src_shape[p]).collect();
    let src_strides = strides_of(src_shape);
    // stride in the source for each output axis
    let gather_strides: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
    let numel = src.len();
    let mut out = Vec::with_capacity(numel);
    let mut coords = vec![0usize; rank];
    let mut src_idx = 0usize;
    for _ in 0..numel {
        out.push(src[src_idx]);
        for d in (0..rank).rev() {
            coords[d] += 1;
            src_idx += gather_strides[d];
            if coords[d] < out_shape[d] {
                break;
            }
            coords[d] = 0;
            src_idx -= gather_strides[d] * out_shape[d];
        }
    }
    out
}
