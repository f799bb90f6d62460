//! Learnable layers and parameter bookkeeping shared by the depth, pose,
//! and attention networks.

use crate::rng::Rng;
use crate::scalar::{s, Scalar};
use crate::tensor::{Conv2dSpec, Result, Tensor};

/// Named mutable references to every learnable tensor of a module, used by
/// the optimizer and the checkpoint writer.
pub type ParamSlots<'a, S> = Vec<(String, &'a mut Tensor<S>)>;

pub(crate) fn push_param<'a, S: Scalar>(
    out: &mut ParamSlots<'a, S>,
    prefix: &str,
    name: &str,
    t: &'a mut Tensor<S>,
) {
    out.push((format!("{prefix}{name}"), t));
}

/// 2-D convolution layer with Kaiming-normal weight init.
pub struct Conv2dLayer<S: Scalar> {
    pub weight: Tensor<S>,
    pub bias: Option<Tensor<S>>,
    pub spec: Conv2dSpec,
}

impl<S: Scalar> Conv2dLayer<S> {
    pub fn new(
        rng: &mut Rng,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        spec: Conv2dSpec,
        with_bias: bool,
    ) -> Self {
        let fan_in = (c_in / spec.groups) * kernel * kernel;
        let std = (2.0 / fan_in as f64).sqrt();
        let weight = Tensor::param(
            vec![c_out, c_in / spec.groups, kernel, kernel],
            (0..c_out * (c_in / spec.groups) * kernel * kernel)
                .map(|_| s::<S>(rng.normal() * std))
                .collect(),
        )
        .expect("conv weight");
        let bias = with_bias
            .then(|| Tensor::param(vec![c_out], vec![S::zero(); c_out]).expect("conv bias"));
        Conv2dLayer { weight, bias, spec }
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        x.conv2d(&self.weight, self.bias.as_ref(), self.spec)
    }

    pub fn collect<'a>(&'a mut self, prefix: &str, out: &mut ParamSlots<'a, S>) {
        push_param(out, prefix, "weight", &mut self.weight);
        if let Some(b) = self.bias.as_mut() {
            push_param(out, prefix, "bias", b);
        }
    }
}

/// Dense layer `y = x W + b` with `W` stored `[in, out]`; truncated-normal
/// init (std 0.02).
pub struct LinearLayer<S: Scalar> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
}

impl<S: Scalar> LinearLayer<S> {
    pub fn new(rng: &mut Rng, dim_in: usize, dim_out: usize) -> Self {
        let weight = Tensor::param(
            vec![dim_in, dim_out],
            (0..dim_in * dim_out)
                .map(|_| s::<S>(rng.truncated_normal(0.02)))
                .collect(),
        )
        .expect("linear weight");
        let bias = Tensor::param(vec![dim_out], vec![S::zero(); dim_out]).expect("linear bias");
        LinearLayer { weight, bias }
    }

    /// All-zero weights and bias (pose head init: identity motion).
    pub fn zeroed(dim_in: usize, dim_out: usize) -> Self {
        LinearLayer {
            weight: Tensor::param(vec![dim_in, dim_out], vec![S::zero(); dim_in * dim_out])
                .expect("linear weight"),
            bias: Tensor::param(vec![dim_out], vec![S::zero(); dim_out]).expect("linear bias"),
        }
    }

    /// `x` is `[rows, in]`.
    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        x.matmul(&self.weight)?.add(&self.bias)
    }

    pub fn collect<'a>(&'a mut self, prefix: &str, out: &mut ParamSlots<'a, S>) {
        push_param(out, prefix, "weight", &mut self.weight);
        push_param(out, prefix, "bias", &mut self.bias);
    }
}

/// Layer normalization over the channel (last) axis with affine weights.
pub struct LayerNormLayer<S: Scalar> {
    pub gamma: Tensor<S>,
    pub beta: Tensor<S>,
    pub eps: f64,
}

impl<S: Scalar> LayerNormLayer<S> {
    pub fn new(dim: usize) -> Self {
        LayerNormLayer {
            gamma: Tensor::param(vec![dim], vec![S::one(); dim]).expect("ln gamma"),
            beta: Tensor::param(vec![dim], vec![S::zero(); dim]).expect("ln beta"),
            eps: 1e-6,
        }
    }

    /// `x` is `[..., dim]`.
    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        x.layer_norm_last(Some(&self.gamma), Some(&self.beta), self.eps)
    }

    pub fn collect<'a>(&'a mut self, prefix: &str, out: &mut ParamSlots<'a, S>) {
        push_param(out, prefix, "gamma", &mut self.gamma);
        push_param(out, prefix, "beta", &mut self.beta);
    }
}

/// Multi-head attention over token matrices. Queries may be a subset of
/// the key/value tokens (the output covers queries only).
pub struct Mha<S: Scalar> {
    pub wq: LinearLayer<S>,
    pub wk: LinearLayer<S>,
    pub wv: LinearLayer<S>,
    pub wo: LinearLayer<S>,
    pub n_heads: usize,
    dim: usize,
}

impl<S: Scalar> Mha<S> {
    pub fn new(rng: &mut Rng, dim: usize, n_heads: usize) -> Self {
        assert!(n_heads > 0 && dim % n_heads == 0, "heads {n_heads} must divide dim {dim}");
        Mha {
            wq: LinearLayer::new(rng, dim, dim),
            wk: LinearLayer::new(rng, dim, dim),
            wv: LinearLayer::new(rng, dim, dim),
            wo: LinearLayer::new(rng, dim, dim),
            n_heads,
            dim,
        }
    }

    /// `queries` is `[Tq, C]`, `keys_values` is `[Tk, C]`; returns `[Tq, C]`.
    pub fn forward(&self, queries: &Tensor<S>, keys_values: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(self.forward_with_attn(queries, keys_values)?.0)
    }

    /// Also returns the attention matrix `[heads, Tq, Tk]` (rows sum to 1).
    pub fn forward_with_attn(
        &self,
        queries: &Tensor<S>,
        keys_values: &Tensor<S>,
    ) -> Result<(Tensor<S>, Tensor<S>)> {
        let tq = queries.shape()[0];
        let tk = keys_values.shape()[0];
        let heads = self.n_heads;
        let dh = self.dim / heads;
        let split = |x: &Tensor<S>, t: usize| -> Result<Tensor<S>> {
            // [T, C] -> [heads, T, dh]
            x.reshape(vec![t, heads, dh])?.permute(&[1, 0, 2])
        };
        let q = split(&self.wq.forward(queries)?, tq)?;
        let k = split(&self.wk.forward(keys_values)?, tk)?;
        let v = split(&self.wv.forward(keys_values)?, tk)?;
        let scores = q
            .bmm(&k.permute(&[0, 2, 1])?)?
            .mul_scalar(1.0 / (dh as f64).sqrt());
        let attn = scores.softmax_last()?;
        let ctx = attn.bmm(&v)?; // [heads, Tq, dh]
        let merged = ctx.permute(&[1, 0, 2])?.reshape(vec![tq, self.dim])?;
        Ok((self.wo.forward(&merged)?, attn))
    }

    pub fn collect<'a>(&'a mut self, prefix: &str, out: &mut ParamSlots<'a, S>) {
        self.wq.collect(&format!("{prefix}wq."), out);
        self.wk.collect(&format!("{prefix}wk."), out);
        self.wv.collect(&format!("{prefix}wv."), out);
        self.wo.collect(&format!("{prefix}wo."), out);
    }
}

/// Weights that are either shared across camera views or independent per
/// view; the test hook `tie_view_embeddings` selects shared.
pub enum PerView<T> {
    Tied(T),
    Independent(Vec<T>),
}

impl<T> PerView<T> {
    pub fn build(tied: bool, n_views: usize, mut make: impl FnMut(usize) -> T) -> Self {
        if tied {
            PerView::Tied(make(0))
        } else {
            PerView::Independent((0..n_views).map(&mut make).collect())
        }
    }

    pub fn get(&self, view: usize) -> &T {
        match self {
            PerView::Tied(t) => t,
            PerView::Independent(v) => &v[view],
        }
    }

    /// Named mutable access to each distinct weight set.
    pub fn slots_mut(&mut self) -> Vec<(String, &mut T)> {
        match self {
            PerView::Tied(t) => vec![("shared".to_string(), t)],
            PerView::Independent(v) => v
                .iter_mut()
                .enumerate()
                .map(|(i, t)| (format!("v{i}"), t))
                .collect(),
        }
    }
}
