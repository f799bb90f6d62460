//! Property tests over the evaluation metrics and match filtering.

use proptest::prelude::*;

use ringdepth_core::harness::image_metrics;
use ringdepth_core::losses::{Provenance, SparseDepthTarget, SparsePoint};
use ringdepth_core::sfm::filter_matches;

fn median_scale(pred: &[f64], gt: &[f64], max_depth: f64) -> Vec<f64> {
    let mut dv: Vec<f64> = pred
        .iter()
        .zip(gt)
        .filter(|&(_, &g)| g > 0.0 && g <= max_depth)
        .map(|(&d, _)| d)
        .collect();
    let mut gv: Vec<f64> = gt
        .iter()
        .filter(|&&g| g > 0.0 && g <= max_depth)
        .copied()
        .collect();
    dv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = |v: &[f64]| {
        let n = v.len();
        if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
    };
    let s = med(&gv) / med(&dv);
    pred.iter().map(|d| d * s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Median-scaled metrics are invariant to a global positive rescale of
    /// the predictions; scale-aware metrics are not.
    #[test]
    fn median_scaling_cancels_global_scale(
        depths in proptest::collection::vec(0.5f64..50.0, 8..40),
        noise in proptest::collection::vec(0.8f64..1.25, 8..40),
        scale in 0.05f64..20.0,
    ) {
        let n = depths.len().min(noise.len());
        let gt = &depths[..n];
        let pred: Vec<f64> = gt.iter().zip(&noise[..n]).map(|(g, k)| g * k).collect();
        let scaled: Vec<f64> = pred.iter().map(|d| d * scale).collect();

        let base = image_metrics(&median_scale(&pred, gt, 200.0), gt, 200.0).unwrap();
        let after = image_metrics(&median_scale(&scaled, gt, 200.0), gt, 200.0).unwrap();
        for (a, b) in base.values().iter().zip(after.values()) {
            prop_assert!((a - b).abs() < 1e-9, "median-scaled changed: {a} vs {b}");
        }

        // scale-aware picks up the scale unless it is ~1
        if (scale - 1.0).abs() > 0.05 {
            let sa_base = image_metrics(&pred, gt, 200.0).unwrap();
            let sa_after = image_metrics(&scaled, gt, 200.0).unwrap();
            prop_assert!((sa_base.abs_rel - sa_after.abs_rel).abs() > 1e-6);
        }
    }

    /// Uniform halving is perfectly recovered by median scaling.
    #[test]
    fn half_scale_recovers_exactly(depths in proptest::collection::vec(1.0f64..100.0, 4..30)) {
        let pred: Vec<f64> = depths.iter().map(|g| 0.5 * g).collect();
        let m = image_metrics(&median_scale(&pred, &depths, 200.0), &depths, 200.0).unwrap();
        prop_assert!(m.abs_rel < 1e-12);
        prop_assert!(m.delta1 == 1.0);
    }

    /// Filtering keeps exactly `M - floor(r*M)` points, all of them a
    /// lowest-loss subset of the original order.
    #[test]
    fn filter_counts_and_monotonicity(
        losses in proptest::collection::vec(0.0f64..10.0, 1..60),
        ratio in 0.0f64..0.99,
    ) {
        let target = SparseDepthTarget {
            camera_id: 0,
            points: (0..losses.len())
                .map(|i| SparsePoint { u: i as f64, v: 0.0, depth: 1.0, weight: 1.0 })
                .collect(),
            provenance: Provenance::Full,
        };
        let kept = filter_matches(&target, &losses, ratio);
        let m = losses.len();
        let expect = m - (ratio * m as f64).floor() as usize;
        prop_assert_eq!(kept.len(), expect);
        let kept_idx: std::collections::HashSet<usize> =
            kept.points.iter().map(|p| p.u as usize).collect();
        let max_kept = kept_idx.iter().map(|&i| losses[i]).fold(f64::NEG_INFINITY, f64::max);
        let min_dropped = (0..m)
            .filter(|i| !kept_idx.contains(i))
            .map(|i| losses[i])
            .fold(f64::INFINITY, f64::min);
        prop_assert!(max_kept <= min_dropped + 1e-12);
    }

    /// SSIM is symmetric in its arguments.
    #[test]
    fn ssim_symmetry(seed_a in 0u64..1000, seed_b in 0u64..1000) {
        use ringdepth_core::tensor::Tensor;
        let image = |seed: u64| {
            let data: Vec<f64> = (0..3 * 6 * 7)
                .map(|i| 0.5 + 0.4 * (((i as u64 * 2654435761 + seed * 97) % 1000) as f64 / 1000.0 - 0.5))
                .collect();
            Tensor::from_vec(vec![3, 6, 7], data).unwrap()
        };
        let (x, y) = (image(seed_a), image(seed_b));
        let ab = ringdepth_core::losses::ssim_map(&x, &y).unwrap();
        let ba = ringdepth_core::losses::ssim_map(&y, &x).unwrap();
        for (a, b) in ab.data().iter().zip(ba.data()) {
            prop_assert_eq!(a, b);
        }
    }
}
