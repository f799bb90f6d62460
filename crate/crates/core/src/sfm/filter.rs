//! Loss-ranked match filtering and the two-round progressive schedule.

use crate::losses::{Provenance, SparseDepthTarget};

/// Progressive training schedule: round 1 supervises with the full match
/// set and a strong weight; round 2 drops the highest-loss fraction of
/// points and lowers the weight to let the self-supervised constraints
/// take over.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProgressiveSchedule {
    pub round: u8,
    /// Fraction of points dropped in round 2 (default 1/3).
    pub filter_ratio: f64,
    pub sigma1_round1: f64,
    pub sigma1_round2: f64,
}

impl Default for ProgressiveSchedule {
    fn default() -> Self {
        ProgressiveSchedule {
            round: 1,
            filter_ratio: 1.0 / 3.0,
            sigma1_round1: 0.1,
            sigma1_round2: 0.005,
        }
    }
}

impl ProgressiveSchedule {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.filter_ratio) {
            return Err(format!("filter_ratio {} outside [0,1)", self.filter_ratio));
        }
        if self.round != 1 && self.round != 2 {
            return Err(format!("round must be 1 or 2, got {}", self.round));
        }
        Ok(())
    }
}

/// Keeps the `M - floor(ratio * M)` lowest-loss points of a target set.
/// Ties break by original order: among equal losses the earlier points
/// are kept. `losses` must align with `target.points`.
pub fn filter_matches(
    target: &SparseDepthTarget,
    losses: &[f64],
    ratio: f64,
) -> SparseDepthTarget {
    assert_eq!(
        losses.len(),
        target.points.len(),
        "per-point losses must align with the target points"
    );
    let m = target.points.len();
    let drop = (ratio.clamp(0.0, 1.0) * m as f64).floor() as usize;
    let keep = m - drop;
    // stable sort by loss: ties keep original order, so the first `keep`
    // entries are exactly the spec'd survivors
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| losses[i].partial_cmp(&losses[j]).unwrap_or(std::cmp::Ordering::Equal));
    let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
    kept.sort_unstable();
    SparseDepthTarget {
        camera_id: target.camera_id,
        points: kept.into_iter().map(|i| target.points[i]).collect(),
        provenance: Provenance::Filtered,
    }
}

/// Resolves the supervision for one training step: round 1 returns the
/// full set with the strong weight; round 2 filters by the per-point
/// losses (when available) and lowers the weight.
pub fn progressive_step(
    schedule: &ProgressiveSchedule,
    full: &SparseDepthTarget,
    losses: Option<&[f64]>,
) -> (f64, SparseDepthTarget) {
    match schedule.round {
        1 => (schedule.sigma1_round1, full.clone()),
        _ => {
            let filtered = match losses {
                Some(l) if l.len() == full.points.len() => {
                    filter_matches(full, l, schedule.filter_ratio)
                }
                // no loss information yet: keep the full set at round-2 weight
                _ => SparseDepthTarget {
                    camera_id: full.camera_id,
                    points: full.points.clone(),
                    provenance: Provenance::Filtered,
                },
            };
            (schedule.sigma1_round2, filtered)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::SparsePoint;
    use crate::rng::Rng;

    fn target(n: usize) -> SparseDepthTarget {
        SparseDepthTarget {
            camera_id: 0,
            points: (0..n)
                .map(|i| SparsePoint { u: i as f64, v: 0.0, depth: 5.0, weight: 1.0 })
                .collect(),
            provenance: Provenance::Full,
        }
    }

    #[test]
    fn drops_top_third_by_loss() {
        let t = target(9);
        let losses: Vec<f64> = (1..=9).map(f64::from).collect();
        let kept = filter_matches(&t, &losses, 1.0 / 3.0);
        assert_eq!(kept.len(), 6);
        assert_eq!(kept.provenance, Provenance::Filtered);
        let kept_us: Vec<f64> = kept.points.iter().map(|p| p.u).collect();
        assert_eq!(kept_us, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn ratio_zero_is_identity_on_points() {
        let t = target(7);
        let losses = vec![3.0; 7];
        let kept = filter_matches(&t, &losses, 0.0);
        assert_eq!(kept.points, t.points);
    }

    #[test]
    fn equal_losses_keep_first_in_original_order() {
        let t = target(9);
        let losses = vec![1.0; 9];
        let kept = filter_matches(&t, &losses, 1.0 / 3.0);
        let kept_us: Vec<f64> = kept.points.iter().map(|p| p.u).collect();
        assert_eq!(kept_us, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn subset_and_count_invariants_hold_for_random_losses() {
        let mut rng = Rng::seed_from(5);
        for m in [3usize, 9, 30, 17] {
            for ratio in [0.0, 0.2, 1.0 / 3.0, 0.9] {
                let t = target(m);
                let losses: Vec<f64> = (0..m).map(|_| rng.uniform()).collect();
                let kept = filter_matches(&t, &losses, ratio);
                let expect = m - (ratio * m as f64).floor() as usize;
                assert_eq!(kept.len(), expect);
                // subset of the original in original order
                let mut last_u = -1.0;
                for p in &kept.points {
                    assert!(p.u > last_u);
                    last_u = p.u;
                }
                // monotone: every kept loss <= every dropped loss
                let kept_idx: Vec<usize> = kept.points.iter().map(|p| p.u as usize).collect();
                let max_kept = kept_idx
                    .iter()
                    .map(|&i| losses[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                let min_dropped = (0..m)
                    .filter(|i| !kept_idx.contains(i))
                    .map(|i| losses[i])
                    .fold(f64::INFINITY, f64::min);
                assert!(max_kept <= min_dropped + 1e-15);
            }
        }
    }

    #[test]
    fn progressive_rounds_switch_weight_and_set() {
        let schedule = ProgressiveSchedule::default();
        let t = target(6);
        let losses = [5.0, 1.0, 2.0, 6.0, 3.0, 4.0];
        let (sigma1, set) = progressive_step(&schedule, &t, Some(&losses));
        assert_eq!(sigma1, 0.1);
        assert_eq!(set.len(), 6);
        assert_eq!(set.provenance, Provenance::Full);

        let round2 = ProgressiveSchedule { round: 2, ..schedule };
        let (sigma1, set) = progressive_step(&round2, &t, Some(&losses));
        assert_eq!(sigma1, 0.005);
        assert_eq!(set.len(), 4); // floor(6/3) = 2 dropped
        assert!(set.points.iter().all(|p| p.u != 0.0 && p.u != 3.0));

        // ratio 0 in round 2: full set, round-2 weight
        let r2_keep_all = ProgressiveSchedule { round: 2, filter_ratio: 0.0, ..schedule };
        let (sigma1, set) = progressive_step(&r2_keep_all, &t, Some(&losses));
        assert_eq!(sigma1, 0.005);
        assert_eq!(set.len(), 6);
    }

    #[test]
    fn schedule_validation() {
        assert!(ProgressiveSchedule::default().validate().is_ok());
        assert!(ProgressiveSchedule { filter_ratio: 1.0, ..Default::default() }
            .validate()
            .is_err());
        assert!(ProgressiveSchedule { round: 0, ..Default::default() }.validate().is_err());
    }
}
