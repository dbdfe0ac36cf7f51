use dpsynth::datagen::{generate, GaussFamily, GaussSpec};
use dpsynth::eval::{marginal_similarity, mi_similarity, silhouette, stat_correlations};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn silhouette_is_bounded(
        points in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0, 0usize..4), 2..60)
    ) {
        let pts: Vec<[f64; 2]> = points.iter().map(|&(x, y, _)| [x, y]).collect();
        let labels: Vec<usize> = points.iter().map(|&(_, _, l)| l).collect();
        let s = silhouette(&pts, &labels).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s), "{s}");
    }

    #[test]
    fn similarities_are_bounded_and_reflexive(seed_a in 0u64..500, seed_b in 0u64..500, d in 2usize..5) {
        let a = generate(&GaussSpec::new(GaussFamily::Corr, 300, d, seed_a).unwrap()).unwrap();
        let b = generate(&GaussSpec::new(GaussFamily::Eye, 300, d, seed_b).unwrap()).unwrap();
        let s = marginal_similarity(&a, &b, 10).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((marginal_similarity(&a, &a, 10).unwrap() - 1.0).abs() < 1e-12);
        let m = mi_similarity(&a, &b, 10).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert!((mi_similarity(&a, &a, 10).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_summaries_are_bounded(seed in 0u64..500, d in 3usize..7) {
        let t = generate(&GaussSpec::new(GaussFamily::Corr, 200, d, seed).unwrap()).unwrap();
        let (off, other) = stat_correlations(&t).unwrap();
        prop_assert!((-1.0..=1.0).contains(&off) && (-1.0..=1.0).contains(&other));
    }
}
