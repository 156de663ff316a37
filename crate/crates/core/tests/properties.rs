use proptest::prelude::*;
use twicemix_core::eval::{krcc, srcc};
use twicemix_core::mixing::{make_ranked_pair, mix, MixRatioPair, RankLabel, MIN_RATIO_GAP};
use twicemix_core::ranker::margin_rank_loss;
use twicemix_core::rng;
use twicemix_core::{ImageRGB, QualityScore};

fn image(w: usize, h: usize, seed: u64) -> ImageRGB {
    let mut r = rng::seeded(seed, 11);
    ImageRGB::from_fn(w, h, |_, _| {
        [rng::unit_f64(&mut r), rng::unit_f64(&mut r), rng::unit_f64(&mut r)]
    })
    .unwrap()
}

fn pair() -> impl Strategy<Value = (ImageRGB, ImageRGB)> {
    (8usize..13, 8usize..13, any::<u64>(), any::<u64>())
        .prop_map(|(w, h, s1, s2)| (image(w, h, s1), image(w, h, s2)))
}

fn ratio_pair() -> impl Strategy<Value = (f64, f64)> {
    (0.0..=1.0f64, 0.0..=1.0f64).prop_filter("ratios too close", |(a, b)| (a - b).abs() >= MIN_RATIO_GAP)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn mix_endpoints_are_bit_exact((a, b) in pair()) {
        prop_assert_eq!(mix(&a, &b, 1.0).unwrap(), a.clone());
        prop_assert_eq!(mix(&a, &b, 0.0).unwrap(), b);
    }

    #[test]
    fn mix_is_symmetric((a, b) in pair(), k in 0.0..=1.0f64) {
        let x = mix(&a, &b, k).unwrap();
        let y = mix(&b, &a, 1.0 - k).unwrap();
        for (u, v) in x.data().iter().zip(y.data()) {
            prop_assert!((u - v).abs() <= 1e-15, "{} vs {}", u, v);
        }
    }

    #[test]
    fn mix_stays_between_endpoints((a, b) in pair(), k in 0.0..=1.0f64) {
        let x = mix(&a, &b, k).unwrap();
        for ((v, p), q) in x.data().iter().zip(a.data()).zip(b.data()) {
            prop_assert!(p.min(*q) <= *v && *v <= p.max(*q));
        }
    }

    #[test]
    fn label_is_antisymmetric((k1, k2) in ratio_pair()) {
        let fwd = MixRatioPair::new(k1, k2).unwrap();
        let back = MixRatioPair::new(k2, k1).unwrap();
        prop_assert_eq!(fwd.gamma().sign(), -back.gamma().sign());
        prop_assert_eq!(fwd.gamma() == RankLabel::SecondBetter, k1 < k2);
    }

    #[test]
    fn swapped_pair_has_flipped_label((a, b) in pair(), (k1, k2) in ratio_pair()) {
        let fwd = make_ranked_pair(&a, &b, &MixRatioPair::new(k1, k2).unwrap()).unwrap();
        let back = make_ranked_pair(&a, &b, &MixRatioPair::new(k2, k1).unwrap()).unwrap();
        prop_assert_eq!(back, fwd.swapped());
    }

    #[test]
    fn loss_is_invariant_under_swap(s1 in -5.0..5.0f64, s2 in -5.0..5.0f64, eps in 0.01..2.0f64, up in any::<bool>()) {
        let g = if up { RankLabel::SecondBetter } else { RankLabel::FirstBetter };
        let a = margin_rank_loss(QualityScore(s1), QualityScore(s2), g, eps);
        let b = margin_rank_loss(QualityScore(s2), QualityScore(s1), g.flipped(), eps);
        prop_assert_eq!(a, b);
        prop_assert!(a >= 0.0);
        prop_assert_eq!(a == 0.0, (s1 - s2) * g.sign() <= -eps);
    }
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut v: Vec<usize> = (1..=n).collect();
    rng::shuffle(&mut rng::seeded(seed, 12), &mut v);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn rank_correlations_are_bounded_and_odd(n in 2usize..30, seed in any::<u64>(), gt_seed in any::<u64>()) {
        let mut r = rng::seeded(seed, 13);
        let scores: Vec<f64> = (0..n).map(|_| rng::unit_f64(&mut r)).collect();
        let gt = permutation(n, gt_seed);
        let k = krcc(&scores, &gt).unwrap();
        let s = srcc(&scores, &gt).unwrap();
        prop_assert!((-1.0..=1.0).contains(&k));
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s));
        let neg: Vec<f64> = scores.iter().map(|v| -v).collect();
        prop_assert!((krcc(&neg, &gt).unwrap() + k).abs() < 1e-12);
        prop_assert!((srcc(&neg, &gt).unwrap() + s).abs() < 1e-12);
    }
}
