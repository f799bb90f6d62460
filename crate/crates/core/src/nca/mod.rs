//! Neighbor-enhanced cross-view attention.
//!
//! Operating on encoder features of shape `(B, N, C, H, W)` (batch, camera
//! view, channels, spatial), the module
//! 1. downsamples each view to a fixed token grid and applies a per-view
//!    overlapped patch embedding (stride-2 conv + layer norm),
//! 2. exchanges context within each ring triplet of views — for every
//!    center view, one multi-head attention block attends from the center
//!    tokens to the concatenated `(n-1, n, n+1)` tokens,
//! 3. exchanges global context over all views' tokens with `depth`
//!    transformer blocks (attention + Mix-FFN, residual around each), and
//! 4. restores the original resolution (bilinear upsample + depthwise
//!    conv) with a residual connection from the module input.

use crate::networks::layers::{
    Conv2dLayer, LayerNormLayer, LinearLayer, Mha, ParamSlots, PerView,
};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{Conv2dSpec, Result, Tensor, TensorError};

/// Configuration of one NCA module instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NcaConfig {
    /// Token grid `(H_dw, W_dw)`; 1/32 of the network input resolution.
    pub token_grid: (usize, usize),
    pub n_heads: usize,
    /// Number of global transformer blocks.
    pub global_depth: usize,
    /// Wiring ablation: disables the neighbor-triplet stage.
    pub neighbor_enabled: bool,
    /// Test hook: share all per-view weights (embedding, neighbor
    /// attention groups, Mix-FFN) across views.
    pub tie_view_embeddings: bool,
    /// Hidden expansion of the Mix-FFN.
    pub ffn_expansion: usize,
}

impl NcaConfig {
    pub fn new(token_grid: (usize, usize)) -> Self {
        NcaConfig {
            token_grid,
            n_heads: 4,
            global_depth: 3,
            neighbor_enabled: true,
            tie_view_embeddings: false,
            ffn_expansion: 2,
        }
    }
}

struct DwSepConv<S: Scalar> {
    dw: Conv2dLayer<S>,
    pw: Conv2dLayer<S>,
}

struct EmbedBlock<S: Scalar> {
    conv: Conv2dLayer<S>,
    norm: LayerNormLayer<S>,
}

struct MixFfn<S: Scalar> {
    fc1: LinearLayer<S>,
    dw: Conv2dLayer<S>,
    fc2: LinearLayer<S>,
}

struct GlobalBlock<S: Scalar> {
    attn: Mha<S>,
    ffn: PerView<MixFfn<S>>,
}

/// One NCA module, bound to a fixed view count, channel width, and input
/// resolution.
pub struct NcaModule<S: Scalar> {
    pub cfg: NcaConfig,
    n_views: usize,
    channels: usize,
    input_hw: (usize, usize),
    down: Vec<DwSepConv<S>>,
    embed: PerView<EmbedBlock<S>>,
    embed_stride: usize,
    neighbor: Option<PerView<Mha<S>>>,
    global_blocks: Vec<GlobalBlock<S>>,
    restore_dw: Conv2dLayer<S>,
}

impl<S: Scalar> NcaModule<S> {
    pub fn new(
        rng: &mut Rng,
        n_views: usize,
        channels: usize,
        input_hw: (usize, usize),
        cfg: NcaConfig,
    ) -> Result<Self> {
        if cfg.global_depth == 0 {
            return Err(TensorError::ShapeMismatch {
                op: "nca",
                detail: "global_depth must be >= 1".into(),
            });
        }
        let (h, w) = input_hw;
        let (th, tw) = cfg.token_grid;
        if th == 0 || tw == 0 || h < th || w < tw || h % th != 0 || w % tw != 0 {
            return Err(TensorError::InvalidGeometry {
                op: "nca_downsample_embed",
                detail: format!("features {h}x{w} cannot reach token grid {th}x{tw}"),
            });
        }
        let ratio = h / th;
        if w / tw != ratio || !ratio.is_power_of_two() {
            return Err(TensorError::InvalidGeometry {
                op: "nca_downsample_embed",
                detail: format!("resolution ratio {}x{} is not a uniform power of two", h / th, w / tw),
            });
        }
        // depthwise-separable convs bring features to twice the token grid;
        // the per-view embedding conv contributes the final stride of 2
        // (stride 1 when the features already sit on the token grid).
        let n_down = (ratio.trailing_zeros() as usize).saturating_sub(1);
        let embed_stride = if ratio == 1 { 1 } else { 2 };
        let down = (0..n_down)
            .map(|_| DwSepConv {
                dw: Conv2dLayer::new(
                    rng,
                    channels,
                    channels,
                    3,
                    Conv2dSpec::new(2, 1).with_groups(channels),
                    true,
                ),
                pw: Conv2dLayer::new(rng, channels, channels, 1, Conv2dSpec::new(1, 0), true),
            })
            .collect();
        let embed = PerView::build(cfg.tie_view_embeddings, n_views, |_| EmbedBlock {
            conv: Conv2dLayer::new(rng, channels, channels, 3, Conv2dSpec::new(embed_stride, 1), true),
            norm: LayerNormLayer::new(channels),
        });
        let neighbor = (cfg.neighbor_enabled && n_views >= 3).then(|| {
            PerView::build(cfg.tie_view_embeddings, n_views, |_| {
                Mha::new(rng, channels, cfg.n_heads)
            })
        });
        let global_blocks = (0..cfg.global_depth)
            .map(|_| GlobalBlock {
                attn: Mha::new(rng, channels, cfg.n_heads),
                ffn: PerView::build(cfg.tie_view_embeddings, n_views, |_| MixFfn {
                    fc1: LinearLayer::new(rng, channels, channels * cfg.ffn_expansion),
                    dw: Conv2dLayer::new(
                        rng,
                        channels * cfg.ffn_expansion,
                        channels * cfg.ffn_expansion,
                        3,
                        Conv2dSpec::new(1, 1).with_groups(channels * cfg.ffn_expansion),
                        true,
                    ),
                    fc2: LinearLayer::new(rng, channels * cfg.ffn_expansion, channels),
                }),
            })
            .collect();
        // no bias: zero tokens must restore to exactly zero so the module
        // residual is an identity for them
        let restore_dw = Conv2dLayer::new(
            rng,
            channels,
            channels,
            3,
            Conv2dSpec::new(1, 1).with_groups(channels),
            false,
        );
        Ok(NcaModule {
            cfg,
            n_views,
            channels,
            input_hw,
            down,
            embed,
            embed_stride,
            neighbor,
            global_blocks,
            restore_dw,
        })
    }

    pub fn n_views(&self) -> usize {
        self.n_views
    }

    fn check_input(&self, x: &Tensor<S>) -> Result<(usize, usize, usize)> {
        let shape = x.shape();
        if shape.len() != 5
            || shape[1] != self.n_views
            || shape[2] != self.channels
            || (shape[3], shape[4]) != self.input_hw
        {
            return Err(TensorError::ShapeMismatch {
                op: "nca",
                detail: format!(
                    "expected [B,{},{},{},{}], got {shape:?}",
                    self.n_views, self.channels, self.input_hw.0, self.input_hw.1
                ),
            });
        }
        Ok((shape[0], shape[3], shape[4]))
    }

    /// Stage 1: shared depthwise-separable downsampling to twice the token
    /// grid, then the per-view stride-2 patch embedding + layer norm.
    pub fn downsample_embed(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let (b, h, w) = self.check_input(x)?;
        let (n, c) = (self.n_views, self.channels);
        let mut folded = x.reshape(vec![b * n, c, h, w])?;
        for stage in &self.down {
            folded = stage.pw.forward(&stage.dw.forward(&folded)?)?.elu();
        }
        let (mid_h, mid_w) = (folded.shape()[2], folded.shape()[3]);
        let (th, tw) = self.cfg.token_grid;
        debug_assert_eq!(mid_h, th * self.embed_stride);
        debug_assert_eq!(mid_w, tw * self.embed_stride);
        let per_batch_view = folded.reshape(vec![b, n, c, mid_h, mid_w])?;
        let mut views = Vec::with_capacity(n);
        for view in 0..n {
            let block = self.embed.get(view);
            let xv = per_batch_view
                .narrow(1, view, 1)?
                .reshape(vec![b, c, mid_h, mid_w])?;
            let conv = block.conv.forward(&xv)?;
            // layer norm over channels: move C last
            let tokens = conv
                .permute(&[0, 2, 3, 1])?
                .reshape(vec![b * th * tw, c])?;
            let normed = block.norm.forward(&tokens)?;
            let back = normed
                .reshape(vec![b, th, tw, c])?
                .permute(&[0, 3, 1, 2])?
                .reshape(vec![b, 1, c, th, tw])?;
            views.push(back);
        }
        let refs: Vec<&Tensor<S>> = views.iter().collect();
        Tensor::concat(&refs, 1)
    }

    /// Stage 2: neighbor-triplet context exchange. For each view `n` the
    /// center tokens attend to the concatenated tokens of `(n-1, n, n+1)`
    /// (ring order), with a residual connection; neighbor tokens are
    /// context only and are discarded.
    pub fn neighbor_attention(&self, tokens: &Tensor<S>) -> Result<Tensor<S>> {
        self.neighbor_stage(tokens, None)
    }

    /// Same as [`Self::neighbor_attention`] but also returns every group's
    /// attention matrix.
    pub fn neighbor_attention_probed(
        &self,
        tokens: &Tensor<S>,
    ) -> Result<(Tensor<S>, Vec<Tensor<S>>)> {
        let mut probes = Vec::new();
        let out = self.neighbor_stage(tokens, Some(&mut probes))?;
        Ok((out, probes))
    }

    fn neighbor_stage(
        &self,
        tokens: &Tensor<S>,
        mut probe: Option<&mut Vec<Tensor<S>>>,
    ) -> Result<Tensor<S>> {
        if self.n_views < 3 {
            return Err(TensorError::ShapeMismatch {
                op: "neighbor_attention",
                detail: format!("needs at least 3 views, got {}", self.n_views),
            });
        }
        let blocks = self.neighbor.as_ref().ok_or(TensorError::ShapeMismatch {
            op: "neighbor_attention",
            detail: "neighbor stage disabled in this configuration".into(),
        })?;
        let shape = tokens.shape().to_vec();
        let (b, n, c, th, tw) = (shape[0], shape[1], shape[2], shape[3], shape[4]);
        let t = th * tw;
        let mut out_batches = Vec::with_capacity(b);
        for bi in 0..b {
            let batch = tokens.narrow(0, bi, 1)?;
            let view_tokens: Vec<Tensor<S>> = (0..n)
                .map(|vi| {
                    batch
                        .narrow(1, vi, 1)?
                        .reshape(vec![c, t])?
                        .permute(&[1, 0])
                })
                .collect::<Result<_>>()?;
            let mut out_views = Vec::with_capacity(n);
            for vi in 0..n {
                let prev = &view_tokens[(vi + n - 1) % n];
                let next = &view_tokens[(vi + 1) % n];
                let center = &view_tokens[vi];
                let group = Tensor::concat(&[prev, center, next], 0)?; // [3T, C]
                let (ctx, attn) = blocks.get(vi).forward_with_attn(center, &group)?;
                if let Some(probes) = probe.as_deref_mut() {
                    probes.push(attn);
                }
                let enhanced = center.add(&ctx)?; // residual
                out_views.push(
                    enhanced
                        .permute(&[1, 0])?
                        .reshape(vec![1, 1, c, th, tw])?,
                );
            }
            let refs: Vec<&Tensor<S>> = out_views.iter().collect();
            out_batches.push(Tensor::concat(&refs, 1)?);
        }
        let refs: Vec<&Tensor<S>> = out_batches.iter().collect();
        Tensor::concat(&refs, 0)
    }

    /// Stage 3: global context exchange over all views' tokens with
    /// `global_depth` transformer blocks. The Mix-FFN runs on the folded
    /// `(B, N*C, H_dw, W_dw)` layout and the features are split back into
    /// views afterwards.
    pub fn global_attention(&self, tokens: &Tensor<S>) -> Result<Tensor<S>> {
        self.global_stage(tokens, None)
    }

    pub fn global_attention_probed(
        &self,
        tokens: &Tensor<S>,
    ) -> Result<(Tensor<S>, Vec<Tensor<S>>)> {
        let mut probes = Vec::new();
        let out = self.global_stage(tokens, Some(&mut probes))?;
        Ok((out, probes))
    }

    fn global_stage(
        &self,
        tokens: &Tensor<S>,
        mut probe: Option<&mut Vec<Tensor<S>>>,
    ) -> Result<Tensor<S>> {
        let shape = tokens.shape().to_vec();
        let (b, n, c, th, tw) = (shape[0], shape[1], shape[2], shape[3], shape[4]);
        let t = th * tw;
        let mut out_batches = Vec::with_capacity(b);
        for bi in 0..b {
            let batch = tokens.narrow(0, bi, 1)?;
            // [N*T, C] with views stacked in order
            let mut all = batch
                .reshape(vec![n, c, t])?
                .permute(&[0, 2, 1])?
                .reshape(vec![n * t, c])?;
            for block in &self.global_blocks {
                let (ctx, attn) = block.attn.forward_with_attn(&all, &all)?;
                if let Some(probes) = probe.as_deref_mut() {
                    probes.push(attn);
                }
                all = all.add(&ctx)?;
                // Mix-FFN on the (1, N*C, H_dw, W_dw) folded layout
                let folded = all
                    .reshape(vec![n, t, c])?
                    .permute(&[0, 2, 1])?
                    .reshape(vec![1, n * c, th, tw])?;
                let mut ffn_views = Vec::with_capacity(n);
                for vi in 0..n {
                    let ffn = block.ffn.get(vi);
                    let xv = folded.narrow(1, vi * c, c)?; // [1, C, th, tw]
                    let tokens_v = xv
                        .permute(&[0, 2, 3, 1])?
                        .reshape(vec![t, c])?;
                    let hidden = ffn.fc1.forward(&tokens_v)?;
                    let e = hidden.shape()[1];
                    let spatial = hidden
                        .reshape(vec![1, th, tw, e])?
                        .permute(&[0, 3, 1, 2])?;
                    let mixed = ffn.dw.forward(&spatial)?.gelu();
                    let back = mixed
                        .permute(&[0, 2, 3, 1])?
                        .reshape(vec![t, e])?;
                    ffn_views.push(ffn.fc2.forward(&back)?); // [T, C]
                }
                let refs: Vec<&Tensor<S>> = ffn_views.iter().collect();
                let ffn_all = Tensor::concat(&refs, 0)?; // [N*T, C]
                all = all.add(&ffn_all)?;
            }
            out_batches.push(
                all.reshape(vec![n, t, c])?
                    .permute(&[0, 2, 1])?
                    .reshape(vec![1, n, c, th, tw])?,
            );
        }
        let refs: Vec<&Tensor<S>> = out_batches.iter().collect();
        Tensor::concat(&refs, 0)
    }

    /// Stage 4: bilinear upsample to the input resolution, depthwise conv,
    /// and residual addition of the module input.
    pub fn restore(&self, tokens: &Tensor<S>, input: &Tensor<S>) -> Result<Tensor<S>> {
        let (b, h, w) = self.check_input(input)?;
        let (n, c) = (self.n_views, self.channels);
        let (th, tw) = self.cfg.token_grid;
        let folded = tokens.reshape(vec![b * n, c, th, tw])?;
        let up = folded.interpolate_bilinear(h, w)?;
        let conv = self.restore_dw.forward(&up)?;
        conv.reshape(vec![b, n, c, h, w])?.add(input)
    }

    /// Full module: downsample/embed, neighbor exchange (when enabled and
    /// meaningful), global exchange, restore.
    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let tokens = self.downsample_embed(x)?;
        let tokens = if self.neighbor.is_some() {
            self.neighbor_attention(&tokens)?
        } else {
            tokens
        };
        let tokens = self.global_attention(&tokens)?;
        self.restore(&tokens, x)
    }

    pub fn collect<'a>(&'a mut self, prefix: &str, out: &mut ParamSlots<'a, S>) {
        for (i, stage) in self.down.iter_mut().enumerate() {
            stage.dw.collect(&format!("{prefix}down.{i}.dw."), out);
            stage.pw.collect(&format!("{prefix}down.{i}.pw."), out);
        }
        for (tag, block) in self.embed.slots_mut() {
            block.conv.collect(&format!("{prefix}embed.{tag}.conv."), out);
            block.norm.collect(&format!("{prefix}embed.{tag}.norm."), out);
        }
        if let Some(neighbor) = self.neighbor.as_mut() {
            for (tag, mha) in neighbor.slots_mut() {
                mha.collect(&format!("{prefix}neighbor.{tag}."), out);
            }
        }
        for (d, block) in self.global_blocks.iter_mut().enumerate() {
            block.attn.collect(&format!("{prefix}global.{d}.attn."), out);
            for (tag, ffn) in block.ffn.slots_mut() {
                ffn.fc1.collect(&format!("{prefix}global.{d}.ffn.{tag}.fc1."), out);
                ffn.dw.collect(&format!("{prefix}global.{d}.ffn.{tag}.dw."), out);
                ffn.fc2.collect(&format!("{prefix}global.{d}.ffn.{tag}.fc2."), out);
            }
        }
        self.restore_dw.collect(&format!("{prefix}restore."), out);
    }
}

#[cfg(test)]
mod tests;
