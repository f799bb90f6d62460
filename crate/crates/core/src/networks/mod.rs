//! Depth and pose networks.
//!
//! The depth network is a small 4-stage strided-conv encoder (channel
//! widths 16/32/64/128 at 1/4..1/32 resolution), cross-view attention
//! modules on each skip connection, an upsampling decoder with a depth
//! head at every scale, and a fusion stage that merges the per-scale
//! predictions into the final full-resolution depth map.
//!
//! The joint pose network regresses one 6-dof ego-motion twist for the
//! whole rig from the channel-concatenated frames of two timestamps.

pub mod layers;

use layers::{Conv2dLayer, LinearLayer, ParamSlots};

use crate::nca::{NcaConfig, NcaModule};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{Conv2dSpec, Result, Tensor, TensorError};

/// Depth range of the sigmoid-to-depth mapping, meters.
pub const D_MIN: f64 = 0.1;
pub const D_MAX: f64 = 200.0;

/// Encoder channel widths at scales 1/4, 1/8, 1/16, 1/32.
pub const ENCODER_CHANNELS: [usize; 4] = [16, 32, 64, 128];

/// Network-level configuration.
#[derive(Clone, Copy, Debug)]
pub struct NetworkConfig {
    pub n_views: usize,
    /// Full input resolution (H, W); must be divisible by 32.
    pub input_hw: (usize, usize),
    pub n_heads: usize,
    pub nca_global_depth: usize,
    pub nca_neighbor_enabled: bool,
    pub nca_tie_views: bool,
}

impl NetworkConfig {
    pub fn new(n_views: usize, input_hw: (usize, usize)) -> Self {
        NetworkConfig {
            n_views,
            input_hw,
            n_heads: 4,
            nca_global_depth: 3,
            nca_neighbor_enabled: true,
            nca_tie_views: false,
        }
    }
}

/// Maps a sigmoid activation to metric depth:
/// `depth = 1 / (s*(1/D_MIN - 1/D_MAX) + 1/D_MAX)`.
pub fn sigmoid_to_depth<S: Scalar>(sig: &Tensor<S>) -> Tensor<S> {
    let a = 1.0 / D_MIN - 1.0 / D_MAX;
    let b = 1.0 / D_MAX;
    sig.mul_scalar(a).add_scalar(b).recip()
}

/// Initial bias of every depth head's output conv: sigmoid(-4) maps to
/// roughly 5 m, so optimization starts near the middle of a road-scale
/// scene instead of at the near plane.
pub const HEAD_BIAS_INIT: f64 = -4.0;

/// Per-scale depth prediction head: conv-ELU-conv-sigmoid.
struct Head<S: Scalar> {
    c1: Conv2dLayer<S>,
    c2: Conv2dLayer<S>,
}

impl<S: Scalar> Head<S> {
    fn new(rng: &mut Rng, c_in: usize) -> Self {
        let mid = (c_in / 2).max(4);
        let c1 = Conv2dLayer::new(rng, c_in, mid, 3, Conv2dSpec::new(1, 1), true);
        let mut c2 = Conv2dLayer::new(rng, mid, 1, 3, Conv2dSpec::new(1, 1), true);
        c2.bias = Some(
            Tensor::param(vec![1], vec![crate::scalar::s(HEAD_BIAS_INIT)]).expect("head bias"),
        );
        Head { c1, c2 }
    }

    /// Sigmoid map `[B,1,h,w]`.
    fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(self.c2.forward(&self.c1.forward(x)?.elu())?.sigmoid())
    }

    fn collect<'a>(&'a mut self, prefix: &str, out: &mut ParamSlots<'a, S>) {
        self.c1.collect(&format!("{prefix}c1."), out);
        self.c2.collect(&format!("{prefix}c2."), out);
    }
}

/// Depth predictions of one forward pass. All maps are `(B, N, 1, h, w)`.
pub struct DepthOutputs<S: Scalar> {
    /// Final fused full-resolution depth.
    pub fused: Tensor<S>,
    /// Native-resolution head depths: `[full, 1/4, 1/8, 1/16]`.
    pub heads: [Tensor<S>; 4],
}

pub struct DepthNetwork<S: Scalar> {
    pub cfg: NetworkConfig,
    // encoder
    stem_a: Conv2dLayer<S>,
    stem_b: Conv2dLayer<S>,
    enc2: Conv2dLayer<S>,
    enc3: Conv2dLayer<S>,
    enc4: Conv2dLayer<S>,
    // cross-view attention per skip scale (0 = 1/4 ... 3 = 1/32)
    ncas: Vec<NcaModule<S>>,
    // decoder
    dec_in: Conv2dLayer<S>,
    dec3: Conv2dLayer<S>,
    dec3r: Conv2dLayer<S>,
    dec2: Conv2dLayer<S>,
    dec2r: Conv2dLayer<S>,
    dec1: Conv2dLayer<S>,
    dec1r: Conv2dLayer<S>,
    dec_half: Conv2dLayer<S>,
    head_full: Head<S>,
    head_q: Head<S>,
    head_e: Head<S>,
    head_s: Head<S>,
    fuse_conv: Conv2dLayer<S>,
    fuse_head: Head<S>,
}

impl<S: Scalar> DepthNetwork<S> {
    pub fn new(rng: &mut Rng, cfg: NetworkConfig) -> Result<Self> {
        let (h, w) = cfg.input_hw;
        if h % 32 != 0 || w % 32 != 0 || h == 0 || w == 0 {
            return Err(TensorError::InvalidGeometry {
                op: "depth_network",
                detail: format!("input {h}x{w} must be divisible by 32"),
            });
        }
        let token_grid = (h / 32, w / 32);
        let [c1, c2, c3, c4] = ENCODER_CHANNELS;
        let mut ncas = Vec::with_capacity(4);
        for (scale_idx, &c) in ENCODER_CHANNELS.iter().enumerate() {
            let factor = 4 << scale_idx;
            let mut nca_cfg = NcaConfig::new(token_grid);
            nca_cfg.n_heads = cfg.n_heads;
            nca_cfg.global_depth = cfg.nca_global_depth;
            nca_cfg.neighbor_enabled = cfg.nca_neighbor_enabled;
            nca_cfg.tie_view_embeddings = cfg.nca_tie_views;
            ncas.push(NcaModule::new(
                rng,
                cfg.n_views,
                c,
                (h / factor, w / factor),
                nca_cfg,
            )?);
        }
        Ok(DepthNetwork {
            cfg,
            stem_a: Conv2dLayer::new(rng, 3, c1, 3, Conv2dSpec::new(2, 1), true),
            stem_b: Conv2dLayer::new(rng, c1, c1, 3, Conv2dSpec::new(2, 1), true),
            enc2: Conv2dLayer::new(rng, c1, c2, 3, Conv2dSpec::new(2, 1), true),
            enc3: Conv2dLayer::new(rng, c2, c3, 3, Conv2dSpec::new(2, 1), true),
            enc4: Conv2dLayer::new(rng, c3, c4, 3, Conv2dSpec::new(2, 1), true),
            ncas,
            dec_in: Conv2dLayer::new(rng, c4, c3, 3, Conv2dSpec::new(1, 1), true),
            dec3: Conv2dLayer::new(rng, c3 + c3, c3, 3, Conv2dSpec::new(1, 1), true),
            dec3r: Conv2dLayer::new(rng, c3, c2, 3, Conv2dSpec::new(1, 1), true),
            dec2: Conv2dLayer::new(rng, c2 + c2, c2, 3, Conv2dSpec::new(1, 1), true),
            dec2r: Conv2dLayer::new(rng, c2, c1, 3, Conv2dSpec::new(1, 1), true),
            dec1: Conv2dLayer::new(rng, c1 + c1, c1, 3, Conv2dSpec::new(1, 1), true),
            dec1r: Conv2dLayer::new(rng, c1, c1, 3, Conv2dSpec::new(1, 1), true),
            dec_half: Conv2dLayer::new(rng, c1, c1, 3, Conv2dSpec::new(1, 1), true),
            head_full: Head::new(rng, c1),
            head_q: Head::new(rng, c1),
            head_e: Head::new(rng, c2),
            head_s: Head::new(rng, c3),
            fuse_conv: Conv2dLayer::new(rng, 4, 8, 3, Conv2dSpec::new(1, 1), true),
            fuse_head: Head::new(rng, 8),
        })
    }

    /// Full forward pass over `(B, N, 3, H, W)` images in `[0, 1]`.
    pub fn forward(&self, images: &Tensor<S>) -> Result<DepthOutputs<S>> {
        let shape = images.shape();
        if shape.len() != 5
            || shape[1] != self.cfg.n_views
            || shape[2] != 3
            || (shape[3], shape[4]) != self.cfg.input_hw
        {
            return Err(TensorError::ShapeMismatch {
                op: "depth_forward",
                detail: format!(
                    "expected [B,{},3,{},{}], got {shape:?}",
                    self.cfg.n_views, self.cfg.input_hw.0, self.cfg.input_hw.1
                ),
            });
        }
        let (b, n) = (shape[0], shape[1]);
        let (h, w) = self.cfg.input_hw;
        let [c1, c2, c3, _c4] = ENCODER_CHANNELS;

        // views are encoded independently
        let folded = images.reshape(vec![b * n, 3, h, w])?;
        let f1 = self.stem_b.forward(&self.stem_a.forward(&folded)?.elu())?.elu();
        let f2 = self.enc2.forward(&f1)?.elu();
        let f3 = self.enc3.forward(&f2)?.elu();
        let f4 = self.enc4.forward(&f3)?.elu();

        // cross-view exchange on each skip connection
        let unfold = |t: &Tensor<S>, c: usize, fh: usize, fw: usize| {
            t.reshape(vec![b, n, c, fh, fw])
        };
        let g1 = self.ncas[0]
            .forward(&unfold(&f1, c1, h / 4, w / 4)?)?
            .reshape(vec![b * n, c1, h / 4, w / 4])?;
        let g2 = self.ncas[1]
            .forward(&unfold(&f2, c2, h / 8, w / 8)?)?
            .reshape(vec![b * n, c2, h / 8, w / 8])?;
        let g3 = self.ncas[2]
            .forward(&unfold(&f3, c3, h / 16, w / 16)?)?
            .reshape(vec![b * n, c3, h / 16, w / 16])?;
        let g4 = self.ncas[3].forward(&unfold(&f4, ENCODER_CHANNELS[3], h / 32, w / 32)?)?;
        let g4 = g4.reshape(vec![b * n, ENCODER_CHANNELS[3], h / 32, w / 32])?;

        // decoder with per-scale heads
        let d4 = self.dec_in.forward(&g4)?.elu();
        let u3 = d4.interpolate_bilinear(h / 16, w / 16)?;
        let d3 = self.dec3.forward(&Tensor::concat(&[&u3, &g3], 1)?)?.elu();
        let sig_s = self.head_s.forward(&d3)?; // 1/16

        let u2 = self.dec3r.forward(&d3)?.elu().interpolate_bilinear(h / 8, w / 8)?;
        let d2 = self.dec2.forward(&Tensor::concat(&[&u2, &g2], 1)?)?.elu();
        let sig_e = self.head_e.forward(&d2)?; // 1/8

        let u1 = self.dec2r.forward(&d2)?.elu().interpolate_bilinear(h / 4, w / 4)?;
        let d1 = self.dec1.forward(&Tensor::concat(&[&u1, &g1], 1)?)?.elu();
        let sig_q = self.head_q.forward(&d1)?; // 1/4

        let uh = self.dec1r.forward(&d1)?.elu().interpolate_bilinear(h / 2, w / 2)?;
        let dh = self.dec_half.forward(&uh)?.elu();
        let uf = dh.interpolate_bilinear(h, w)?;
        let sig_full = self.head_full.forward(&uf)?; // full

        // fusion: the full-resolution prediction plus the upsampled
        // auxiliary predictions; auxiliaries enter detached so their heads
        // learn only from their own per-scale losses
        let up_q = sig_q.detach().interpolate_bilinear(h, w)?;
        let up_e = sig_e.detach().interpolate_bilinear(h, w)?;
        let up_s = sig_s.detach().interpolate_bilinear(h, w)?;
        let fused_sig = self.fuse(&sig_full, &up_q, &up_e, &up_s)?;

        let to_5d = |t: &Tensor<S>| -> Result<Tensor<S>> {
            let ts = t.shape();
            sigmoid_to_depth(t).reshape(vec![b, n, 1, ts[2], ts[3]])
        };
        Ok(DepthOutputs {
            fused: to_5d(&fused_sig)?,
            heads: [to_5d(&sig_full)?, to_5d(&sig_q)?, to_5d(&sig_e)?, to_5d(&sig_s)?],
        })
    }

    /// Multi-resolution depth fusion: concatenates the four (equally
    /// sized) sigmoid maps, applies the 3x3 conv + ELU block, and runs the
    /// final prediction head.
    pub fn fuse(
        &self,
        sig_full: &Tensor<S>,
        sig_q_up: &Tensor<S>,
        sig_e_up: &Tensor<S>,
        sig_s_up: &Tensor<S>,
    ) -> Result<Tensor<S>> {
        let fused_in = Tensor::concat(&[sig_full, sig_q_up, sig_e_up, sig_s_up], 1)?;
        self.fuse_head.forward(&self.fuse_conv.forward(&fused_in)?.elu())
    }

    pub fn collect<'a>(&'a mut self, out: &mut ParamSlots<'a, S>) {
        self.stem_a.collect("encoder.stem_a.", out);
        self.stem_b.collect("encoder.stem_b.", out);
        self.enc2.collect("encoder.enc2.", out);
        self.enc3.collect("encoder.enc3.", out);
        self.enc4.collect("encoder.enc4.", out);
        for (i, nca) in self.ncas.iter_mut().enumerate() {
            nca.collect(&format!("nca.{i}."), out);
        }
        self.dec_in.collect("decoder.dec_in.", out);
        self.dec3.collect("decoder.dec3.", out);
        self.dec3r.collect("decoder.dec3r.", out);
        self.dec2.collect("decoder.dec2.", out);
        self.dec2r.collect("decoder.dec2r.", out);
        self.dec1.collect("decoder.dec1.", out);
        self.dec1r.collect("decoder.dec1r.", out);
        self.dec_half.collect("decoder.dec_half.", out);
        self.head_full.collect("heads.full.", out);
        self.head_q.collect("heads.q4.", out);
        self.head_e.collect("heads.e8.", out);
        self.head_s.collect("heads.s16.", out);
        self.fuse_conv.collect("fusion.conv.", out);
        self.fuse_head.collect("fusion.head.", out);
    }
}

/// Joint pose network: one 6-dof twist per temporal pair for the whole rig.
pub struct JointPoseNetwork<S: Scalar> {
    pub n_views: usize,
    convs: Vec<Conv2dLayer<S>>,
    norm: layers::LayerNormLayer<S>,
    fc: LinearLayer<S>,
    feat_dim: usize,
}

/// Slope of the pose head's output map at zero (the small-motion scale).
pub const POSE_TRANSLATION_SCALE: f64 = 0.01;
pub const POSE_ROTATION_SCALE: f64 = 0.01;

/// Saturation bounds of the pose outputs: `limit * tanh(raw * scale/limit)`
/// has slope `scale` at the origin and can never leave `(-limit, limit)`.
/// Unbounded outputs admit a degenerate optimum where a large rotation
/// warps every temporal sample out of the raster, emptying the masked
/// photometric mean of its hard pixels; the bound keeps that state out of
/// reach while leaving realistic motions unconstrained.
pub const POSE_ROTATION_LIMIT: f64 = 0.3;
pub const POSE_TRANSLATION_LIMIT: f64 = 1.0;

impl<S: Scalar> JointPoseNetwork<S> {
    pub fn new(rng: &mut Rng, n_views: usize) -> Self {
        let c_in = n_views * 6;
        let widths = [16usize, 32, 64, 128];
        let mut convs = Vec::new();
        let mut prev = c_in;
        for &c in &widths {
            convs.push(Conv2dLayer::new(rng, prev, c, 3, Conv2dSpec::new(2, 1), true));
            prev = c;
        }
        JointPoseNetwork {
            n_views,
            convs,
            // normalized pooled features keep the head's gradient scale
            // bounded, which keeps the early pose inside the warp basin
            norm: layers::LayerNormLayer::new(prev),
            // zero init: the network starts at the identity motion
            fc: LinearLayer::zeroed(prev, 6),
            feat_dim: prev,
        }
    }

    /// `frames_t`, `frames_other` are `(B, N, 3, H, W)`; returns a `[6]`
    /// twist (axis-angle, translation), translation scaled by 0.01.
    pub fn forward(&self, frames_t: &Tensor<S>, frames_other: &Tensor<S>) -> Result<Tensor<S>> {
        let shape = frames_t.shape();
        if shape != frames_other.shape() || shape.len() != 5 || shape[1] != self.n_views {
            return Err(TensorError::ShapeMismatch {
                op: "pose_forward",
                detail: format!("{:?} vs {:?}", frames_t.shape(), frames_other.shape()),
            });
        }
        let (b, n, _, h, w) = (shape[0], shape[1], shape[2], shape[3], shape[4]);
        if b != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "pose_forward",
                detail: "pose network operates on one timestamp (B=1)".into(),
            });
        }
        // all views of both frames concatenated on channels, at 1/4 input
        // resolution
        let fold = |t: &Tensor<S>| t.reshape(vec![1, n * 3, h, w]);
        let x = Tensor::concat(&[&fold(frames_t)?, &fold(frames_other)?], 1)?;
        let mut x = x.avg_pool2()?.avg_pool2()?;
        for conv in &self.convs {
            x = conv.forward(&x)?.elu();
        }
        // global average over the spatial grid
        let c = self.feat_dim;
        let spatial = x.numel() / c;
        let pooled = x.reshape(vec![c, spatial])?.mean_axis(1)?.reshape(vec![1, c])?;
        let pooled = self.norm.forward(&pooled)?;
        let out = self.fc.forward(&pooled)?.reshape(vec![6])?;
        let rot = out
            .narrow(0, 0, 3)?
            .mul_scalar(POSE_ROTATION_SCALE / POSE_ROTATION_LIMIT)
            .tanh()
            .mul_scalar(POSE_ROTATION_LIMIT);
        let trans = out
            .narrow(0, 3, 3)?
            .mul_scalar(POSE_TRANSLATION_SCALE / POSE_TRANSLATION_LIMIT)
            .tanh()
            .mul_scalar(POSE_TRANSLATION_LIMIT);
        Tensor::concat(&[&rot, &trans], 0)
    }

    pub fn collect<'a>(&'a mut self, out: &mut ParamSlots<'a, S>) {
        for (i, conv) in self.convs.iter_mut().enumerate() {
            conv.collect(&format!("pose.conv{i}."), out);
        }
        self.norm.collect("pose.norm.", out);
        self.fc.collect("pose.fc.", out);
    }
}
