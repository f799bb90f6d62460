//! Training losses: photometric SSIM+L1, edge-aware smoothness, sparse
//! depth supervision, and their weighted multi-resolution combination.

mod combine;
mod photometric;
mod sfm_loss;
mod smoothness;
mod ssim;

pub use combine::{combine_losses, ResolutionLosses};
pub use photometric::{photo_error_map, photometric_loss, PhotoSource};
pub use sfm_loss::sfm_loss;
pub use smoothness::smoothness_loss;
pub use ssim::ssim_map;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Loss-combination weights. `sigma1` follows the training round; the rest
/// are shared by both rounds.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    /// SSIM mixing weight `a` of the photometric loss.
    pub alpha: f64,
    /// Sparse-depth supervision weight (round 1: 0.1, round 2: 0.005).
    pub sigma1: f64,
    /// Photometric weight.
    pub sigma2: f64,
    /// Full-resolution weight.
    pub p1: f64,
    /// Per-auxiliary-resolution weight.
    pub p2: f64,
    /// Training round this set belongs to (1 or 2).
    pub round: u8,
}

impl LossWeights {
    pub fn for_round(round: u8) -> LossWeights {
        LossWeights {
            alpha: 0.85,
            sigma1: if round == 1 { 0.1 } else { 0.005 },
            sigma2: 0.5,
            p1: 0.5,
            p2: 1.0 / 6.0,
            round,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("alpha {} outside [0,1]", self.alpha));
        }
        for (name, v) in [
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("p1", self.p1),
            ("p2", self.p2),
        ] {
            if v < 0.0 {
                return Err(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if self.round != 1 && self.round != 2 {
            return Err(format!("round must be 1 or 2, got {}", self.round));
        }
        Ok(())
    }
}

/// Origin of a sparse target set: the full match set or the loss-ranked
/// filtered subset.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Full,
    Filtered,
}

/// One triangulated supervision point in a view.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct SparsePoint {
    /// Pixel column at full resolution.
    pub u: f64,
    /// Pixel row at full resolution.
    pub v: f64,
    /// Pseudo ground-truth metric depth.
    pub depth: f64,
    /// Match confidence in `[0, 1]`.
    pub weight: f64,
}

/// Per-view sparse pseudo-ground-truth depth.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SparseDepthTarget {
    pub camera_id: usize,
    pub points: Vec<SparsePoint>,
    pub provenance: Provenance,
}

impl SparseDepthTarget {
    pub fn empty(camera_id: usize) -> Self {
        SparseDepthTarget { camera_id, points: Vec::new(), provenance: Provenance::Full }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

static EMPTY_MASK_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Times a photometric loss saw an all-invalid mask (and returned zero).
pub fn empty_mask_events() -> u64 {
    EMPTY_MASK_EVENTS.load(Ordering::Relaxed)
}

pub fn reset_empty_mask_events() {
    EMPTY_MASK_EVENTS.store(0, Ordering::Relaxed);
}

pub(crate) fn record_empty_mask() {
    EMPTY_MASK_EVENTS.fetch_add(1, Ordering::Relaxed);
}
