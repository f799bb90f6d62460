//! Analytic multiply-accumulate counts for the depth network and the
//! cross-view attention stages, including the neighbor-vs-global-wiring
//! comparison.

use serde::{Deserialize, Serialize};

use crate::harness::TrainConfig;
use crate::networks::ENCODER_CHANNELS;

/// MACs of a 2-D convolution: `out_h * out_w * c_out * (c_in/groups) * k^2`.
pub fn conv_macs(
    out_h: usize,
    out_w: usize,
    c_in: usize,
    c_out: usize,
    kernel: usize,
    groups: usize,
) -> u64 {
    (out_h * out_w * c_out * (c_in / groups) * kernel * kernel) as u64
}

/// Attention-map MACs (`Q K^T` plus the weighted value sum) for `q` query
/// tokens attending to `k` key tokens at channel width `c`.
pub fn attention_macs(q: usize, k: usize, c: usize) -> u64 {
    2 * (q * k * c) as u64
}

/// Per-stage attention cost of one cross-view module.
#[derive(Serialize, Deserialize, Clone, Copy, Debug)]
pub struct NcaStageFlops {
    pub scale_index: usize,
    pub channels: usize,
    /// Tokens per view (`H_dw * W_dw`).
    pub tokens_per_view: usize,
    /// Neighbor stage: every view's center tokens attend to its ring
    /// triplet (3 views of context).
    pub neighbor_attention_macs: u64,
    pub neighbor_projection_macs: u64,
    /// One global block: all views' tokens attend to all views.
    pub global_attention_macs_per_block: u64,
    pub global_projection_macs_per_block: u64,
    pub global_blocks: usize,
    pub ffn_macs_per_block: u64,
    pub embed_macs: u64,
    pub downsample_macs: u64,
    pub restore_macs: u64,
}

impl NcaStageFlops {
    /// Attention-map cost of the module as wired (neighbor + global).
    pub fn nca_attention_total(&self) -> u64 {
        self.neighbor_attention_macs
            + self.global_attention_macs_per_block * self.global_blocks as u64
    }

    /// Attention-map cost with the neighbor stage replaced by one more
    /// global block (the global-only wiring of equal depth).
    pub fn global_only_attention_total(&self) -> u64 {
        self.global_attention_macs_per_block * (self.global_blocks as u64 + 1)
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct FlopsReport {
    pub input_hw: (usize, usize),
    pub n_views: usize,
    pub encoder_macs_per_view: u64,
    pub decoder_macs_per_view: u64,
    pub heads_macs_per_view: u64,
    pub fusion_macs_per_view: u64,
    pub nca_stages: Vec<NcaStageFlops>,
    /// Everything, all views, attention included.
    pub network_total_macs: u64,
    /// Attention-map cost of the configured wiring vs the global-only
    /// equivalent, summed over the four skip scales.
    pub nca_attention_macs: u64,
    pub global_only_attention_macs: u64,
}

impl FlopsReport {
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "input {}x{}, {} views",
            self.input_hw.0, self.input_hw.1, self.n_views
        );
        let _ = writeln!(out, "encoder  (per view): {:>12} MACs", self.encoder_macs_per_view);
        let _ = writeln!(out, "decoder  (per view): {:>12} MACs", self.decoder_macs_per_view);
        let _ = writeln!(out, "heads    (per view): {:>12} MACs", self.heads_macs_per_view);
        let _ = writeln!(out, "fusion   (per view): {:>12} MACs", self.fusion_macs_per_view);
        for stage in &self.nca_stages {
            let _ = writeln!(
                out,
                "nca[{}] c={:<4} neighbor attn {:>10}  global attn/block {:>10}  blocks {}",
                stage.scale_index,
                stage.channels,
                stage.neighbor_attention_macs,
                stage.global_attention_macs_per_block,
                stage.global_blocks
            );
        }
        let _ = writeln!(out, "network total:       {:>12} MACs", self.network_total_macs);
        let _ = writeln!(
            out,
            "attention, configured wiring:  {:>12} MACs",
            self.nca_attention_macs
        );
        let _ = writeln!(
            out,
            "attention, global-only wiring: {:>12} MACs (ratio {:.3})",
            self.global_only_attention_macs,
            self.nca_attention_macs as f64 / self.global_only_attention_macs as f64
        );
        out
    }
}

/// Walks the network architecture analytically (no tensors involved).
pub fn flops_estimate(cfg: &TrainConfig, n_views: usize, h: usize, w: usize) -> FlopsReport {
    let [c1, c2, c3, c4] = ENCODER_CHANNELS;
    let ffn_expansion = 2usize;

    // encoder convs (per view)
    let encoder = conv_macs(h / 2, w / 2, 3, c1, 3, 1)
        + conv_macs(h / 4, w / 4, c1, c1, 3, 1)
        + conv_macs(h / 8, w / 8, c1, c2, 3, 1)
        + conv_macs(h / 16, w / 16, c2, c3, 3, 1)
        + conv_macs(h / 32, w / 32, c3, c4, 3, 1);

    // decoder convs (per view)
    let decoder = conv_macs(h / 32, w / 32, c4, c3, 3, 1)
        + conv_macs(h / 16, w / 16, c3 + c3, c3, 3, 1)
        + conv_macs(h / 16, w / 16, c3, c2, 3, 1)
        + conv_macs(h / 8, w / 8, c2 + c2, c2, 3, 1)
        + conv_macs(h / 8, w / 8, c2, c1, 3, 1)
        + conv_macs(h / 4, w / 4, c1 + c1, c1, 3, 1)
        + conv_macs(h / 4, w / 4, c1, c1, 3, 1)
        + conv_macs(h / 2, w / 2, c1, c1, 3, 1);

    let head = |hh: usize, ww: usize, c_in: usize| {
        let mid = (c_in / 2).max(4);
        conv_macs(hh, ww, c_in, mid, 3, 1) + conv_macs(hh, ww, mid, 1, 3, 1)
    };
    let heads = head(h, w, c1) + head(h / 4, w / 4, c1) + head(h / 8, w / 8, c2)
        + head(h / 16, w / 16, c3);
    let fusion = conv_macs(h, w, 4, 8, 3, 1) + head(h, w, 8);

    let (th, tw) = (h / 32, w / 32);
    let t = th * tw;
    let mut nca_stages = Vec::with_capacity(4);
    for (scale_index, &c) in ENCODER_CHANNELS.iter().enumerate() {
        let factor = 4 << scale_index; // feature scale denominator
        let (fh, fw) = (h / factor, w / factor);
        let ratio = fh / th;
        // downsample stack to twice the token grid, then the embedding
        let mut downsample = 0u64;
        let mut cur = (fh, fw);
        let n_down = (ratio.trailing_zeros() as usize).saturating_sub(1);
        for _ in 0..n_down {
            cur = (cur.0 / 2, cur.1 / 2);
            downsample += conv_macs(cur.0, cur.1, c, c, 3, c) + conv_macs(cur.0, cur.1, c, c, 1, 1);
        }
        downsample *= n_views as u64;
        let embed = conv_macs(th, tw, c, c, 3, 1) * n_views as u64;
        let neighbor_attention = attention_macs(t, 3 * t, c) * n_views as u64;
        // q and out on T tokens, k and v on 3T context tokens, per view
        let neighbor_projection = ((t + t + 2 * 3 * t) * c * c * n_views) as u64;
        let global_attention = attention_macs(n_views * t, n_views * t, c);
        let global_projection = (4 * n_views * t * c * c) as u64;
        let e = c * ffn_expansion;
        let ffn = ((t * c * e) as u64 // fc1
            + conv_macs(th, tw, e, e, 3, e) // depthwise mix
            + (t * e * c) as u64) // fc2
            * n_views as u64;
        let restore = conv_macs(fh, fw, c, c, 3, c) * n_views as u64;
        nca_stages.push(NcaStageFlops {
            scale_index,
            channels: c,
            tokens_per_view: t,
            neighbor_attention_macs: neighbor_attention,
            neighbor_projection_macs: neighbor_projection,
            global_attention_macs_per_block: global_attention,
            global_projection_macs_per_block: global_projection,
            global_blocks: cfg.network.nca_global_depth,
            ffn_macs_per_block: ffn,
            embed_macs: embed,
            downsample_macs: downsample,
            restore_macs: restore,
        });
    }

    let neighbor_on = cfg.network.nca_neighbor_enabled;
    let mut total = (encoder + decoder + heads + fusion) * n_views as u64;
    let mut nca_attn = 0u64;
    let mut global_only_attn = 0u64;
    for stage in &nca_stages {
        let blocks = stage.global_blocks as u64;
        total += stage.downsample_macs + stage.embed_macs + stage.restore_macs;
        total += (stage.global_attention_macs_per_block
            + stage.global_projection_macs_per_block
            + stage.ffn_macs_per_block)
            * blocks;
        if neighbor_on {
            total += stage.neighbor_attention_macs + stage.neighbor_projection_macs;
            nca_attn += stage.nca_attention_total();
        } else {
            nca_attn += stage.global_attention_macs_per_block * blocks;
        }
        global_only_attn += stage.global_only_attention_total();
    }

    FlopsReport {
        input_hw: (h, w),
        n_views,
        encoder_macs_per_view: encoder,
        decoder_macs_per_view: decoder,
        heads_macs_per_view: heads,
        fusion_macs_per_view: fusion,
        nca_stages,
        network_total_macs: total,
        nca_attention_macs: nca_attn,
        global_only_attention_macs: global_only_attn,
    }
}
