use mann_verify::{consistency, pca, Thresholds, Verdict};
use proptest::prelude::*;

fn labelled(n: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), n), prop::collection::vec(0u8..3, n))
        .prop_filter("two labels", |(_, l)| l.iter().any(|&x| x != l[0]))
}

proptest! {
    #[test]
    fn consistency_is_rigid_motion_invariant((v, l) in labelled(12), angle in 0.0f64..6.3, shift in prop::collection::vec(-10.0f64..10.0, 3)) {
        let (c, s) = (angle.cos(), angle.sin());
        let moved: Vec<Vec<f64>> = v
            .iter()
            .map(|p| vec![c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1], p[2] + shift[2]])
            .collect();
        let a = consistency(&v, &l, 3).unwrap();
        let b = consistency(&moved, &l, 3).unwrap();
        // Rounding can reorder near-equal distances, so allow one flipped point.
        prop_assert!((a.score - b.score).abs() <= 1.0 / 12.0 + 1e-12);
        prop_assert_eq!(a.chance, b.chance);
    }

    #[test]
    fn scores_are_fractions((v, l) in labelled(15)) {
        let r = consistency(&v, &l, 5).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.score));
        prop_assert!(r.chance >= 1.0 / 3.0 - 1e-12 && r.chance < 1.0);
        prop_assert_eq!(r.count, 15);
    }

    #[test]
    fn pca_preserves_centroid_distances_in_the_plane(v in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 3..20)) {
        let lifted: Vec<Vec<f64>> = v.iter().map(|p| vec![p[0], 0.0, p[1], 1.0]).collect();
        let pts = pca(&lifted).unwrap();
        let n = v.len() as f64;
        let mean = [v.iter().map(|p| p[0]).sum::<f64>() / n, v.iter().map(|p| p[1]).sum::<f64>() / n];
        for (p, q) in v.iter().zip(&pts) {
            let r0 = ((p[0] - mean[0]).powi(2) + (p[1] - mean[1]).powi(2)).sqrt();
            let r1 = (q[0].powi(2) + q[1].powi(2)).sqrt();
            prop_assert!((r0 - r1).abs() < 1e-8);
        }
    }

    #[test]
    fn supported_and_rejected_are_exclusive(score in 0.0f64..1.0, chance in 0.0f64..1.0) {
        let v = Thresholds::default().verdict(score, chance);
        if v == Verdict::Supported {
            prop_assert!(score >= 0.8 && score - chance >= 0.3);
        }
        if score <= chance + 0.1 {
            prop_assert_eq!(v, Verdict::Rejected);
        }
    }
}
