//! Two-round progressive training loop.
//!
//! Each step samples one timestamp (all views), runs the depth and pose
//! networks, synthesizes the target views from temporal and spatial
//! neighbors, assembles the weighted multi-resolution loss, and applies
//! one Adam update. Round 2 lowers the sparse-supervision weight and
//! refilters the matched points by their loss ranking once per epoch.
//! Everything is deterministic under a fixed seed, and checkpoints carry
//! enough state to resume bit-exactly.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::geometry::{warp_spatial, warp_temporal, CameraRig};
use crate::harness::checkpoint::{self, CheckpointMeta};
use crate::harness::{Adam, HarnessError, TrainConfig};
use crate::losses::{
    combine_losses, photometric_loss, sfm_loss, smoothness_loss, LossWeights, PhotoSource,
    ResolutionLosses, SparseDepthTarget,
};
use crate::networks::{DepthNetwork, JointPoseNetwork, NetworkConfig};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::scene::{render, SceneSpec};
use crate::sfm::{
    build_pseudo_gt, load_match_file, match_overlap, progressive_step, ProgressiveSchedule,
};
use crate::tensor::Tensor;

/// Pyramid levels used by the loss: full, 1/4, 1/8, 1/16.
const LEVEL_FACTORS: [usize; 4] = [1, 4, 8, 16];

/// Diagnostics written when training hits a non-finite loss.
#[derive(serde::Serialize, Clone, Debug)]
pub struct NanReport {
    pub step: u64,
    pub round: usize,
    pub frame: usize,
    pub components: Vec<(String, f64)>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub final_checkpoint: PathBuf,
    pub log_path: PathBuf,
    pub steps_run: u64,
    pub final_loss: f64,
}

/// Per-view image pyramid of one timestamp (levels ordered per
/// `LEVEL_FACTORS`).
struct FramePyramids<S: Scalar> {
    levels: Vec<Vec<Tensor<S>>>, // levels[level][view]
    stacked_full: Tensor<S>,     // (1, N, 3, H, W)
}

struct FrameCache<S: Scalar> {
    capacity: usize,
    entries: HashMap<usize, FramePyramids<S>>,
    order: Vec<usize>, // LRU order, oldest first
}

impl<S: Scalar> FrameCache<S> {
    fn new(capacity: usize) -> Self {
        FrameCache { capacity: capacity.max(4), entries: HashMap::new(), order: Vec::new() }
    }

    fn get_or_render(
        &mut self,
        spec: &SceneSpec,
        frame: usize,
    ) -> Result<&FramePyramids<S>, HarnessError> {
        if !self.entries.contains_key(&frame) {
            let rendered = render::<S>(spec, frame)?;
            let n = rendered.images.len();
            let mut level0 = Vec::with_capacity(n);
            let mut stacked = Vec::with_capacity(n);
            for img in &rendered.images {
                let shape = img.shape().to_vec();
                stacked.push(img.reshape(vec![1, 1, shape[0], shape[1], shape[2]])?);
                level0.push(img.clone());
            }
            let refs: Vec<&Tensor<S>> = stacked.iter().collect();
            let stacked_full = Tensor::concat(&refs, 1)?;
            // successive 2x box averages; keep levels 1, 1/4, 1/8, 1/16
            let mut levels = vec![level0];
            let mut current: Vec<Tensor<S>> = rendered
                .images
                .iter()
                .map(|img| {
                    let shape = img.shape().to_vec();
                    img.reshape(vec![1, shape[0], shape[1], shape[2]]).unwrap()
                })
                .collect();
            let mut kept = Vec::new();
            for _ in 0..4 {
                current = current
                    .iter()
                    .map(|t| t.avg_pool2())
                    .collect::<Result<_, _>>()?;
                kept.push(current.clone());
            }
            for &k in &[1usize, 2, 3] {
                let level: Vec<Tensor<S>> = kept[k]
                    .iter()
                    .map(|t| {
                        let shape = t.shape().to_vec();
                        t.reshape(vec![shape[1], shape[2], shape[3]]).unwrap()
                    })
                    .collect();
                levels.push(level);
            }
            self.entries.insert(frame, FramePyramids { levels, stacked_full });
            self.order.push(frame);
            if self.entries.len() > self.capacity {
                let evict = self.order.remove(0);
                self.entries.remove(&evict);
            }
        } else {
            // refresh LRU position
            if let Some(pos) = self.order.iter().position(|&f| f == frame) {
                let f = self.order.remove(pos);
                self.order.push(f);
            }
        }
        Ok(self.entries.get(&frame).expect("cached frame"))
    }
}

struct LogRow {
    step: u64,
    round: usize,
    frame: usize,
    total: f64,
    photo: f64,
    smooth: f64,
    sfm: f64,
}

/// A resumable training run.
pub struct TrainSession<S: Scalar> {
    pub cfg: TrainConfig,
    pub spec: SceneSpec,
    rig: CameraRig<S>,
    pub depth_net: DepthNetwork<S>,
    pub pose_net: JointPoseNetwork<S>,
    adam: Adam<S>,
    out_dir: PathBuf,
    cache: FrameCache<S>,
    /// Full pseudo-ground-truth targets per frame (built lazily).
    full_targets: HashMap<usize, Vec<SparseDepthTarget>>,
    injected_matches: Option<HashMap<usize, crate::sfm::MatchSet>>,
    /// Live per-point losses gathered during the current epoch.
    live_point_losses: HashMap<(usize, usize), Vec<f64>>,
    /// Snapshot taken at the last epoch boundary; defines the round-2
    /// filtered sets until the next boundary.
    filter_point_losses: HashMap<(usize, usize), Vec<f64>>,
    rng: Rng,
    pub step: u64,
    log_rows: Vec<LogRow>,
    pub last_loss: f64,
}

/// Networks for a given config/scene pair, deterministically initialized
/// from the seed.
pub fn build_networks<S: Scalar>(
    cfg: &TrainConfig,
    spec: &SceneSpec,
) -> Result<(DepthNetwork<S>, JointPoseNetwork<S>), HarnessError> {
    let rig: CameraRig<S> = spec.rig()?;
    let (h, w) = rig.image_size();
    let mut net_cfg = NetworkConfig::new(rig.n_cameras(), (h, w));
    net_cfg.n_heads = cfg.network.n_heads;
    net_cfg.nca_global_depth = cfg.network.nca_global_depth;
    net_cfg.nca_neighbor_enabled = cfg.network.nca_neighbor_enabled;
    net_cfg.nca_tie_views = cfg.network.nca_tie_views;
    let mut init_rng = Rng::seed_from(cfg.seed).substream("weights");
    let depth_net = DepthNetwork::new(&mut init_rng, net_cfg)?;
    let mut pose_rng = Rng::seed_from(cfg.seed).substream("pose-weights");
    let pose_net = JointPoseNetwork::new(&mut pose_rng, rig.n_cameras());
    Ok((depth_net, pose_net))
}

impl<S: Scalar> TrainSession<S> {
    pub fn new(cfg: TrainConfig, out_dir: &Path) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let spec = SceneSpec::load(&cfg.scene)?;
        spec.validate::<S>()?;
        let rig: CameraRig<S> = spec.rig()?;
        let (depth_net, pose_net) = build_networks::<S>(&cfg, &spec)?;
        let adam = Adam::new(
            cfg.train.rounds[0].learning_rate,
            cfg.train.adam_beta1,
            cfg.train.adam_beta2,
            cfg.train.adam_eps,
        );
        std::fs::create_dir_all(out_dir)?;
        let injected_matches = match &cfg.train.match_file {
            Some(path) => {
                let frames = load_match_file(path)
                    .map_err(|e| HarnessError::Config(format!("match file: {e}")))?;
                Some(frames.into_iter().collect())
            }
            None => None,
        };
        let rng = Rng::seed_from(cfg.seed).substream("trainer");
        let cache_size = cfg.train.frame_cache;
        Ok(TrainSession {
            cfg,
            spec,
            rig,
            depth_net,
            pose_net,
            adam,
            out_dir: out_dir.to_path_buf(),
            cache: FrameCache::new(cache_size),
            full_targets: HashMap::new(),
            injected_matches,
            live_point_losses: HashMap::new(),
            filter_point_losses: HashMap::new(),
            rng,
            step: 0,
            log_rows: Vec::new(),
            last_loss: f64::NAN,
        })
    }

    pub fn total_steps(&self) -> u64 {
        self.cfg.train.rounds.iter().map(|r| r.steps).sum()
    }

    /// Frames usable as training targets (both temporal neighbors exist).
    fn valid_frames(&self) -> usize {
        self.spec.n_frames.saturating_sub(2).max(1)
    }

    /// Round index and step-within-round of a global step.
    fn round_of(&self, step: u64) -> (usize, u64) {
        let mut start = 0;
        for (i, round) in self.cfg.train.rounds.iter().enumerate() {
            if step < start + round.steps {
                return (i, step - start);
            }
            start += round.steps;
        }
        (self.cfg.train.rounds.len() - 1, step - start + self.cfg.train.rounds.last().unwrap().steps)
    }

    /// The timestamp of one training sample. Each round consumes a stream
    /// of epoch-shuffled frame indices (substream keyed on round and
    /// epoch), so the order is a pure function of the configuration —
    /// resume needs no queue state.
    fn sample_frame(&self, round: usize, sample_idx: u64) -> usize {
        let n = self.valid_frames() as u64;
        let epoch = sample_idx / n;
        let pos = (sample_idx % n) as usize;
        let mut order: Vec<usize> = (1..=self.valid_frames()).collect();
        let mut rng = self.rng.substream(&format!("frames.r{round}.e{epoch}"));
        rng.shuffle(&mut order);
        order[pos]
    }

    fn ensure_targets(&mut self, frame: usize) -> Result<(), HarnessError> {
        if self.full_targets.contains_key(&frame) {
            return Ok(());
        }
        let matches = match &self.injected_matches {
            Some(by_frame) => by_frame.get(&frame).cloned().unwrap_or_default(),
            None => {
                let pyramids = self.cache.get_or_render(&self.spec, frame)?;
                match_overlap(&pyramids.levels[0], &self.rig)
            }
        };
        let (targets, _stats) = build_pseudo_gt(&matches, &self.rig);
        if self.full_targets.is_empty() {
            // inspection dump of the first frame's supervision
            let _ = crate::sfm::dump_pseudo_gt(&self.out_dir.join("pseudo_gt.json"), &targets);
        }
        self.full_targets.insert(frame, targets);
        Ok(())
    }

    /// Supervision for one view at the current round, applying the
    /// loss-ranked filtering from the last epoch snapshot in round >= 2.
    fn targets_for(&self, frame: usize, cam: usize, round: usize) -> (f64, SparseDepthTarget) {
        let full = self
            .full_targets
            .get(&frame)
            .map(|t| t[cam].clone())
            .unwrap_or_else(|| SparseDepthTarget::empty(cam));
        let round_params = &self.cfg.train.rounds[round.min(self.cfg.train.rounds.len() - 1)];
        let schedule = ProgressiveSchedule {
            round: if round == 0 { 1 } else { 2 },
            filter_ratio: round_params.filter_ratio,
            sigma1_round1: self.cfg.train.rounds[0].sigma1,
            sigma1_round2: round_params.sigma1,
        };
        let losses = self.filter_point_losses.get(&(frame, cam)).map(|v| v.as_slice());
        progressive_step(&schedule, &full, losses)
    }

    /// Runs up to `n` more steps; stops at the configured total.
    pub fn run_steps(&mut self, n: u64) -> Result<u64, HarnessError> {
        let total = self.total_steps();
        let mut done = 0;
        while done < n && self.step < total {
            self.one_step()?;
            done += 1;
        }
        self.flush_log()?;
        Ok(done)
    }

    fn one_step(&mut self) -> Result<(), HarnessError> {
        let (round, within) = self.round_of(self.step);
        self.adam.lr = self.cfg.train.rounds[round].learning_rate;
        let batch = self.cfg.train.batch_size;
        let sample_base = within * batch as u64;
        if sample_base % (self.valid_frames() as u64) < batch as u64 {
            // an epoch boundary falls inside this step: snapshot the live
            // per-point losses as the round-2 refiltering basis
            self.filter_point_losses = self.live_point_losses.clone();
        }

        let mut batch_losses: Vec<Tensor<S>> = Vec::new();
        let mut breakdown = (0.0f64, 0.0f64, 0.0f64); // photo, smooth, sfm
        let mut first_frame = 0;
        for b in 0..batch {
            let frame = self.sample_frame(round, sample_base + b as u64);
            if b == 0 {
                first_frame = frame;
            }
            let (loss, parts) = self.frame_loss(frame, round)?;
            breakdown.0 += parts.0;
            breakdown.1 += parts.1;
            breakdown.2 += parts.2;
            batch_losses.push(loss);
        }
        let mut total_loss = batch_losses[0].clone();
        for extra in &batch_losses[1..] {
            total_loss = total_loss.add(extra)?;
        }
        if batch > 1 {
            total_loss = total_loss.mul_scalar(1.0 / batch as f64);
        }
        let loss_value = total_loss.item().to_f64().unwrap_or(f64::NAN);
        if !loss_value.is_finite() {
            let report = NanReport {
                step: self.step,
                round,
                frame: first_frame,
                components: vec![
                    ("photo".into(), breakdown.0),
                    ("smooth".into(), breakdown.1),
                    ("sfm".into(), breakdown.2),
                ],
            };
            let path = self.out_dir.join("nan_dump.json");
            let _ = std::fs::write(&path, serde_json::to_string_pretty(&report).unwrap());
            return Err(HarnessError::Numerical(format!(
                "non-finite loss at step {} (diagnostics: {})",
                self.step,
                path.display()
            )));
        }

        total_loss.backward()?;
        let mut slots = Vec::new();
        self.depth_net.collect(&mut slots);
        self.pose_net.collect(&mut slots);
        self.adam.step(&mut slots);

        self.last_loss = loss_value;
        let inv_b = 1.0 / batch as f64;
        self.log_rows.push(LogRow {
            step: self.step,
            round,
            frame: first_frame,
            total: loss_value,
            photo: breakdown.0 * inv_b,
            smooth: breakdown.1 * inv_b,
            sfm: breakdown.2 * inv_b,
        });
        self.step += 1;
        if self.step % self.cfg.train.log_every.max(1) == 0 {
            self.flush_log()?;
        }
        Ok(())
    }

    /// Loss of one timestamp: Eq.-style combination over the four
    /// resolutions, averaged over views.
    fn frame_loss(
        &mut self,
        frame: usize,
        round: usize,
    ) -> Result<(Tensor<S>, (f64, f64, f64)), HarnessError> {
        let sfm_on = self.cfg.train.sfm_supervision
            && self.cfg.train.rounds[round].sigma1 > 0.0;
        if sfm_on {
            self.ensure_targets(frame)?;
        }
        // pre-warm the cache for the three timestamps
        self.cache.get_or_render(&self.spec, frame - 1)?;
        self.cache.get_or_render(&self.spec, frame)?;
        self.cache.get_or_render(&self.spec, frame + 1)?;
        let stacked_t = self.cache.entries[&frame].stacked_full.clone();
        let stacked_prev = self.cache.entries[&(frame - 1)].stacked_full.clone();
        let stacked_next = self.cache.entries[&(frame + 1)].stacked_full.clone();

        let outputs = self.depth_net.forward(&stacked_t)?;
        let pose_fwd = self.pose_net.forward(&stacked_t, &stacked_next)?;
        let pose_bwd = self.pose_net.forward(&stacked_t, &stacked_prev)?;

        let n_views = self.rig.n_cameras();
        let weights = LossWeights {
            alpha: self.cfg.train.ssim_alpha,
            sigma1: self.cfg.train.rounds[round].sigma1,
            sigma2: self.cfg.train.sigma2,
            p1: self.cfg.train.p1,
            p2: self.cfg.train.p2,
            round: if round == 0 { 1 } else { 2 },
        };

        let mut per_resolution = Vec::with_capacity(4);
        let mut log_parts = (0.0, 0.0, 0.0);
        for (level, &factor) in LEVEL_FACTORS.iter().enumerate() {
            let mut photo_sum = Tensor::zeros(vec![1]);
            let mut smooth_sum = Tensor::zeros(vec![1]);
            let mut sfm_sum = Tensor::zeros(vec![1]);
            for cam in 0..n_views {
                let depth_map = if level == 0 { &outputs.fused } else { &outputs.heads[level] };
                let dshape = depth_map.shape().to_vec();
                let depth_cam = depth_map
                    .narrow(1, cam, 1)?
                    .reshape(vec![1, dshape[3], dshape[4]])?;
                let target_img = &self.cache.entries[&frame].levels[level][cam];

                // Temporal and spatial synthesis are reduced separately.
                // The temporal minimum carries identity-reprojection
                // candidates (the unwarped neighbors, always valid): no
                // depth or pose can profit by pushing samples out of the
                // raster, and quasi-static pixels are masked automatically.
                // The spatial minimum runs over its own overlap so its
                // gradient stays alive even while the temporal candidates
                // are near-perfect; the sparse-depth term anchors the scale
                // against spatial sample eviction.
                if self.cfg.train.temporal_warps {
                    let mut temporal: Vec<PhotoSource<S>> = Vec::new();
                    for (pose, src_frame) in
                        [(&pose_fwd, frame + 1), (&pose_bwd, frame - 1)]
                    {
                        let src_img = &self.cache.entries[&src_frame].levels[level][cam];
                        let (lh, lw) = (src_img.shape()[1], src_img.shape()[2]);
                        let warped = warp_temporal(&self.rig, cam, &depth_cam, pose, src_img)?;
                        temporal.push(PhotoSource { image: warped.image, mask: warped.mask });
                        temporal.push(PhotoSource {
                            image: src_img.clone(),
                            mask: Tensor::ones(vec![1, lh, lw]),
                        });
                    }
                    photo_sum = photo_sum.add(&photometric_loss(
                        target_img,
                        &temporal,
                        self.cfg.train.ssim_alpha,
                    )?)?;
                }
                if self.cfg.train.spatial_warps {
                    let mut spatial: Vec<PhotoSource<S>> = Vec::new();
                    for delta in [-1i32, 1] {
                        let neighbor = self.rig.neighbor(cam, delta)?;
                        let src_img = &self.cache.entries[&frame].levels[level][neighbor];
                        let warped = warp_spatial(&self.rig, cam, delta, &depth_cam, src_img)?;
                        spatial.push(PhotoSource { image: warped.image, mask: warped.mask });
                    }
                    photo_sum = photo_sum.add(&photometric_loss(
                        target_img,
                        &spatial,
                        self.cfg.train.ssim_alpha,
                    )?)?;
                }
                smooth_sum = smooth_sum.add(&smoothness_loss(&depth_cam, target_img)?)?;
                if sfm_on {
                    let (_, target) = self.targets_for(frame, cam, round);
                    if !target.is_empty() {
                        let (loss, per_point) = sfm_loss(&depth_cam, &target, factor)?;
                        sfm_sum = sfm_sum.add(&loss)?;
                        if level == 0 {
                            // rank on the full-resolution losses of the FULL
                            // set so filtering stays aligned with it
                            let full = &self.full_targets[&frame][cam];
                            if target.len() == full.len() {
                                self.live_point_losses.insert((frame, cam), per_point);
                            } else {
                                let (_, full_pts) = sfm_loss(&depth_cam, full, factor)?;
                                self.live_point_losses.insert((frame, cam), full_pts);
                            }
                        }
                    }
                }
            }
            let inv_n = 1.0 / n_views as f64;
            let res = ResolutionLosses {
                sfm: sfm_sum.mul_scalar(inv_n),
                photo: photo_sum.mul_scalar(inv_n),
                smooth: smooth_sum.mul_scalar(inv_n),
            };
            if level == 0 {
                log_parts = (
                    res.photo.item().to_f64().unwrap_or(f64::NAN),
                    res.smooth.item().to_f64().unwrap_or(f64::NAN),
                    res.sfm.item().to_f64().unwrap_or(f64::NAN),
                );
            }
            per_resolution.push(res);
        }
        let total = combine_losses(&per_resolution, &weights)?;
        Ok((total, log_parts))
    }

    pub fn log_path(&self) -> PathBuf {
        self.out_dir.join("train_log.csv")
    }

    fn flush_log(&mut self) -> Result<(), HarnessError> {
        if self.log_rows.is_empty() {
            return Ok(());
        }
        let path = self.log_path();
        let fresh = !path.exists();
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)?;
        if fresh {
            writeln!(file, "step,round,frame,total,photo,smooth,sfm")?;
        }
        for row in &self.log_rows {
            writeln!(
                file,
                "{},{},{},{:.9e},{:.9e},{:.9e},{:.9e}",
                row.step, row.round, row.frame, row.total, row.photo, row.smooth, row.sfm
            )?;
        }
        self.log_rows.clear();
        Ok(())
    }

    fn named_tensors(&mut self) -> Vec<(String, Tensor<S>)> {
        let mut slots = Vec::new();
        self.depth_net.collect(&mut slots);
        self.pose_net.collect(&mut slots);
        let mut out: Vec<(String, Tensor<S>)> = slots
            .into_iter()
            .map(|(name, t)| (name, t.detach()))
            .collect();
        out.extend(self.adam.state_tensors());
        out
    }

    pub fn save_checkpoint(&mut self, path: &Path) -> Result<(), HarnessError> {
        let (round, _) = self.round_of(self.step.min(self.total_steps().saturating_sub(1)));
        let mut point_losses: Vec<(usize, usize, Vec<f64>)> = self
            .live_point_losses
            .iter()
            .map(|(&(f, c), v)| (f, c, v.clone()))
            .collect();
        point_losses.sort_by_key(|&(f, c, _)| (f, c));
        let meta = CheckpointMeta {
            step: self.step,
            round_index: round,
            adam_t: self.adam.t,
            rng_state: self.rng.state().to_vec(),
            point_losses,
            dtype: String::new(),
        };
        let tensors = self.named_tensors();
        checkpoint::save(path, &tensors, &meta)
    }

    /// Restores a session from a checkpoint written by
    /// [`Self::save_checkpoint`]; the continued run matches an
    /// uninterrupted one bit for bit.
    pub fn resume(cfg: TrainConfig, out_dir: &Path, ckpt: &Path) -> Result<Self, HarnessError> {
        let mut session = TrainSession::new(cfg, out_dir)?;
        session.load_weights(ckpt)?;
        Ok(session)
    }

    /// Loads parameters (and, when present, optimizer/progress state) from
    /// a checkpoint into this session.
    pub fn load_weights(&mut self, ckpt: &Path) -> Result<(), HarnessError> {
        let (tensors, meta) = checkpoint::load::<S>(ckpt)?;
        let mut by_name: HashMap<String, Tensor<S>> = tensors.iter().cloned().collect();
        let mut slots = Vec::new();
        self.depth_net.collect(&mut slots);
        self.pose_net.collect(&mut slots);
        for (name, slot) in slots {
            let loaded = by_name.remove(&name).ok_or_else(|| {
                HarnessError::Io(format!("checkpoint missing parameter {name}"))
            })?;
            if loaded.shape() != slot.shape() {
                return Err(HarnessError::Io(format!(
                    "checkpoint {name}: shape {:?} vs model {:?}",
                    loaded.shape(),
                    slot.shape()
                )));
            }
            *slot = loaded.requires_grad_leaf();
        }
        self.adam.load_state(meta.adam_t, &tensors);
        self.step = meta.step;
        self.live_point_losses = meta
            .point_losses
            .iter()
            .map(|(f, c, v)| ((*f, *c), v.clone()))
            .collect();
        // the boundary snapshot is rebuilt at the next epoch start; until
        // then the live cache doubles as the filter basis, matching the
        // state the uninterrupted run would have after the same boundary
        self.filter_point_losses = self.live_point_losses.clone();
        if !meta.rng_state.is_empty() {
            let mut words = [0u64; 6];
            for (dst, src) in words.iter_mut().zip(&meta.rng_state) {
                *dst = *src;
            }
            self.rng = Rng::from_state(words);
        }
        Ok(())
    }

    /// Runs the configured rounds to completion, writing per-round and
    /// final checkpoints.
    pub fn run_all(&mut self) -> Result<TrainOutcome, HarnessError> {
        let mut round_ends: Vec<u64> = Vec::new();
        let mut acc = 0;
        for round in &self.cfg.train.rounds {
            acc += round.steps;
            round_ends.push(acc);
        }
        let total = self.total_steps();
        while self.step < total {
            self.one_step()?;
            if round_ends.contains(&self.step) {
                let round_idx = round_ends.iter().position(|&e| e == self.step).unwrap();
                let path = self.out_dir.join(format!("round{}.ckpt", round_idx + 1));
                self.save_checkpoint(&path)?;
            }
        }
        self.flush_log()?;
        let final_path = self.out_dir.join("final.ckpt");
        self.save_checkpoint(&final_path)?;
        Ok(TrainOutcome {
            final_checkpoint: final_path,
            log_path: self.log_path(),
            steps_run: self.step,
            final_loss: self.last_loss,
        })
    }
}

/// Convenience wrapper: build a session and run it to completion.
pub fn train<S: Scalar>(cfg: &TrainConfig, out_dir: &Path) -> Result<TrainOutcome, HarnessError> {
    let mut session = TrainSession::<S>::new(cfg.clone(), out_dir)?;
    session.run_all()
}

/// Builds the depth network for a config/scene pair and loads its
/// parameters from a checkpoint (optimizer/pose entries are ignored).
pub fn load_depth_network<S: Scalar>(
    cfg: &TrainConfig,
    spec: &SceneSpec,
    ckpt: &Path,
) -> Result<DepthNetwork<S>, HarnessError> {
    let (mut depth_net, _) = build_networks::<S>(cfg, spec)?;
    let (tensors, _meta) = checkpoint::load::<S>(ckpt)?;
    let mut by_name: HashMap<String, Tensor<S>> = tensors.into_iter().collect();
    let mut slots = Vec::new();
    depth_net.collect(&mut slots);
    for (name, slot) in slots {
        let loaded = by_name
            .remove(&name)
            .ok_or_else(|| HarnessError::Io(format!("checkpoint missing parameter {name}")))?;
        if loaded.shape() != slot.shape() {
            return Err(HarnessError::Io(format!(
                "checkpoint {name}: shape {:?} vs model {:?}",
                loaded.shape(),
                slot.shape()
            )));
        }
        *slot = loaded.requires_grad_leaf();
    }
    Ok(depth_net)
}
