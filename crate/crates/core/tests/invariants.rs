//! Structural invariants over randomized inputs.

use std::sync::Arc;

use nlglass::exact::{CouplingMatrix, ExactEngine, GibbsRequest};
use nlglass::model::{realize, ModelSpec};
use nlglass::rng::{keyed_normal, NormalStream};
use nlglass::stats::{pairwise_sum, MeanEstimate};
use nlglass::theory::{self, Theorem1Report};
use nlglass::verify::{check_thm2_couplings, Status, VerifyPolicy};
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (1u32..=3, 1.05f64..1.45, 0.05f64..3.0).prop_map(|(n, a, b)| ModelSpec::dyson(n, a, b)),
        (2usize..=9, 1.05f64..2.5, 0.05f64..3.0).prop_map(|(l, a, b)| ModelSpec::long_range(l, a, b)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stream_and_keyed_normals_agree(seed in any::<u64>(), sample in any::<u64>(), len in 1usize..40) {
        let mut s = NormalStream::new(seed, sample);
        for k in 0..len as u64 {
            prop_assert_eq!(s.next_normal().to_bits(), keyed_normal(seed, sample, k).to_bits());
        }
        let mut t = NormalStream::new(seed, sample);
        prop_assert_eq!(t.normal_at(len as u64 - 1).to_bits(), keyed_normal(seed, sample, len as u64 - 1).to_bits());
    }

    #[test]
    fn couplings_are_mean_x_variance_x(spec in spec_strategy(), seed in any::<u64>(), k in 0u64..1000) {
        let r = realize(Arc::new(spec.laws().unwrap()), seed, k).unwrap();
        let again = realize(r.laws.clone(), seed, k).unwrap();
        prop_assert_eq!(&r.couplings, &again.couplings);
        for ((law, z), j) in r.laws.laws.iter().zip(&r.normals).zip(&r.couplings) {
            prop_assert!(law.x > 0.0);
            prop_assert!((j - (law.x + law.x.sqrt() * z)).abs() <= 1e-12 * (1.0 + j.abs()));
        }
    }

    #[test]
    fn gibbs_observables_are_bounded(spec in spec_strategy(), seed in any::<u64>()) {
        let r = realize(Arc::new(spec.laws().unwrap()), seed, 0).unwrap();
        let g = ExactEngine::default().gibbs(&r, &GibbsRequest::everything()).unwrap();
        for pc in &g.pair_corr {
            prop_assert!(pc.value.abs() <= 1.0 + 1e-12);
        }
        for b in &g.block_m2 {
            prop_assert!(b.normalized >= -1e-12 && b.normalized <= 1.0 + 1e-12);
            if b.p == 0 {
                prop_assert!((b.m2 - 1.0).abs() < 1e-12);
            }
        }
    }

    /// Flipping the couplings around one site flips its correlations.
    #[test]
    fn gauge_flip_changes_sign(spec in spec_strategy(), seed in any::<u64>(), site in 0usize..64) {
        let r = realize(Arc::new(spec.laws().unwrap()), seed, 1).unwrap();
        let m = CouplingMatrix::from_realization(&r).unwrap();
        let n = m.n();
        let g = site % n;
        let mut flipped = CouplingMatrix::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let sign = if (i == g) != (j == g) { -1.0 } else { 1.0 };
                flipped.add(i, j, sign * m.get(i, j));
            }
        }
        let e = ExactEngine::default();
        let a = e.gibbs_matrix(&m, &GibbsRequest::all_pairs()).unwrap();
        let b = e.gibbs_matrix(&flipped, &GibbsRequest::all_pairs()).unwrap();
        for (x, y) in a.pair_corr.iter().zip(&b.pair_corr) {
            let sign = if (x.i == g) != (x.j == g) { -1.0 } else { 1.0 };
            prop_assert!((x.value - sign * y.value).abs() < 1e-10);
        }
    }

    #[test]
    fn lower_bound_grows_with_beta(alpha in 1.05f64..1.45, lo in 0.0f64..1.0, step in 0.01f64..2.0) {
        let b0 = theory::thm1_beta_threshold(alpha) * 10f64.powf(3.0 * lo);
        let b1 = b0 * 10f64.powf(step);
        let (r0, r1) = (Theorem1Report::evaluate(b0, alpha), Theorem1Report::evaluate(b1, alpha));
        prop_assert!(r0.validity.holds() && r1.validity.holds());
        prop_assert!(r1.total >= r0.total - 1e-12, "{} at {} vs {} at {}", r0.total, b0, r1.total, b1);
    }

    #[test]
    fn merge_level_is_top_differing_bit(levels in 1u32..16, a in any::<u32>(), b in any::<u32>()) {
        let n = 1usize << levels;
        let (i, j) = (a as usize % n, b as usize % n);
        prop_assume!(i != j);
        let (i, j) = (i.min(j), i.max(j));
        prop_assert_eq!(theory::merge_level(i, j, levels).unwrap(), usize::BITS - (i ^ j).leading_zeros());
    }

    #[test]
    fn hierarchical_couplings_dominated(levels in 1u32..=20, alpha in 1.01f64..1.49) {
        let r = check_thm2_couplings(levels, alpha, &VerifyPolicy::default()).unwrap();
        prop_assert_eq!(r.status, Status::Pass);
    }

    #[test]
    fn pairwise_sum_matches_exact_integers(values in prop::collection::vec(-1_000_000i64..1_000_000, 0..500)) {
        let f: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        prop_assert_eq!(pairwise_sum(&f), values.iter().sum::<i64>() as f64);
    }

    #[test]
    fn mean_estimate_is_affine(values in prop::collection::vec(-10.0f64..10.0, 2..200), c in -5.0f64..5.0) {
        let a = MeanEstimate::from_samples(&values);
        let shifted: Vec<f64> = values.iter().map(|v| c * v).collect();
        let b = MeanEstimate::from_samples(&shifted);
        prop_assert!((b.mean - c * a.mean).abs() < 1e-9);
        prop_assert!((b.se - c.abs() * a.se).abs() < 1e-9);
    }
}
