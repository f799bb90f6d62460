//! Triangulated pseudo ground truth from cross-view matches.

use std::path::Path;

use crate::geometry::{triangulate, CameraRig, GeometryError};
use crate::losses::{SparseDepthTarget, SparsePoint};
use crate::scalar::Scalar;
use crate::sfm::{MatchSet, SfmError};

/// Matches whose reprojection residual exceeds this are rejected before
/// pseudo-ground-truth creation (pixels).
pub const EPIPOLAR_GATE_PX: f64 = 2.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PseudoGtStats {
    pub accepted: usize,
    pub rejected_residual: usize,
    pub rejected_degenerate: usize,
    pub rejected_behind: usize,
}

/// Triangulates every match and emits per-view sparse depth targets (one
/// target per rig camera, possibly empty). Each surviving match
/// contributes a point to both of its views.
pub fn build_pseudo_gt<S: Scalar>(
    matches: &MatchSet,
    rig: &CameraRig<S>,
) -> (Vec<SparseDepthTarget>, PseudoGtStats) {
    let mut targets: Vec<SparseDepthTarget> = (0..rig.n_cameras())
        .map(SparseDepthTarget::empty)
        .collect();
    let mut stats = PseudoGtStats::default();
    for pair in &matches.pairs {
        for m in &pair.matches {
            let tri = match triangulate(
                rig,
                pair.cam_a,
                pair.cam_b,
                (crate::scalar::s(m.ua), crate::scalar::s(m.va)),
                (crate::scalar::s(m.ub), crate::scalar::s(m.vb)),
            ) {
                Ok(t) => t,
                Err(GeometryError::DegenerateRays { .. }) => {
                    stats.rejected_degenerate += 1;
                    continue;
                }
                Err(_) => {
                    stats.rejected_degenerate += 1;
                    continue;
                }
            };
            let residual = tri.residual_px.to_f64().unwrap_or(f64::INFINITY);
            if residual > EPIPOLAR_GATE_PX {
                stats.rejected_residual += 1;
                continue;
            }
            let za = tri.depth_in_a.to_f64().unwrap_or(-1.0);
            let zb = tri.depth_in_b.to_f64().unwrap_or(-1.0);
            if za <= 0.0 || zb <= 0.0 {
                stats.rejected_behind += 1;
                continue;
            }
            stats.accepted += 1;
            targets[pair.cam_a].points.push(SparsePoint {
                u: m.ua,
                v: m.va,
                depth: za,
                weight: m.confidence,
            });
            targets[pair.cam_b].points.push(SparsePoint {
                u: m.ub,
                v: m.vb,
                depth: zb,
                weight: m.confidence,
            });
        }
    }
    if stats.accepted == 0 && matches.total_matches() > 0 {
        eprintln!(
            "pseudo-gt: all {} matches rejected (residual {}, degenerate {}, behind {})",
            matches.total_matches(),
            stats.rejected_residual,
            stats.rejected_degenerate,
            stats.rejected_behind
        );
    }
    (targets, stats)
}

/// Writes per-view sparse targets as a JSON inspection dump.
pub fn dump_pseudo_gt(path: &Path, targets: &[SparseDepthTarget]) -> Result<(), SfmError> {
    let json = serde_json::to_string_pretty(targets).map_err(|e| SfmError::Parse(e.to_string()))?;
    std::fs::write(path, json).map_err(SfmError::Io)
}
