mod common;

use crisp::prior::{estimate_prior, q_hat, q_hat_p, EstimatorConfig};
use proptest::prelude::*;

/// Scores on a 1/50 grid (to force ties) and a nonempty labeled subset.
fn scored_sample() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            proptest::collection::vec((0u32..=50).prop_map(|k| f64::from(k) / 50.0), n),
            proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n),
        )
    })
}

fn config() -> impl Strategy<Value = EstimatorConfig> {
    (0.001f64..0.99, 0.001f64..0.99).prop_map(|(delta, tau)| EstimatorConfig { delta, tau })
}

proptest! {
    #[test]
    fn agrees_with_exhaustive_search((scores, labeled) in scored_sample(), cfg in config()) {
        let est = estimate_prior(&scores, &labeled, &cfg).unwrap();
        let brute = common::brute_force_prior(&scores, &labeled, cfg.delta, cfg.tau);
        prop_assert_eq!(est.z_hat, brute.z);
        prop_assert!((est.pi_hat - brute.pi).abs() <= 1e-12);
        prop_assert!((est.objective - brute.objective).abs() <= 1e-12);
    }

    #[test]
    fn estimate_in_unit_floor_range((scores, labeled) in scored_sample(), cfg in config()) {
        let est = estimate_prior(&scores, &labeled, &cfg).unwrap();
        prop_assert!(est.pi_hat >= 1.0 / scores.len() as f64);
        prop_assert!(est.pi_hat <= 1.0);
    }

    #[test]
    fn tails_are_nonincreasing((scores, labeled) in scored_sample()) {
        let mut zs = scores.clone();
        zs.sort_by(f64::total_cmp);
        for w in zs.windows(2) {
            prop_assert!(q_hat(&scores, w[1]).unwrap() <= q_hat(&scores, w[0]).unwrap());
            prop_assert!(q_hat_p(&scores, &labeled, w[1]).unwrap() <= q_hat_p(&scores, &labeled, w[0]).unwrap());
        }
    }

    #[test]
    fn tail_ratio_survives_duplication((scores, labeled) in scored_sample(), z in 0.0f64..=1.0) {
        let n = scores.len();
        let doubled: Vec<f64> = scores.iter().chain(&scores).copied().collect();
        let doubled_labeled: Vec<usize> = labeled.iter().copied().chain(labeled.iter().map(|i| i + n)).collect();
        let qp = q_hat_p(&scores, &labeled, z).unwrap();
        prop_assume!(qp > 0.0);
        let ratio = q_hat(&scores, z).unwrap() / qp;
        let ratio2 = q_hat(&doubled, z).unwrap() / q_hat_p(&doubled, &doubled_labeled, z).unwrap();
        prop_assert!((ratio - ratio2).abs() <= 1e-12);
    }

    #[test]
    fn deterministic((scores, labeled) in scored_sample()) {
        let cfg = EstimatorConfig::default();
        prop_assert_eq!(estimate_prior(&scores, &labeled, &cfg).unwrap(), estimate_prior(&scores, &labeled, &cfg).unwrap());
    }
}

#[test]
fn separable_scores_leave_no_negatives_above_threshold() {
    use crisp::synth::{score_fixture, ScoreFixtureConfig};
    let f = score_fixture(&ScoreFixtureConfig::separable(5_000, 0.3, 0.2, 3)).unwrap();
    let est = estimate_prior(&f.scores, &f.labeled_idx, &EstimatorConfig::default()).unwrap();
    let negatives_above = (0..f.scores.len())
        .filter(|i| f.positive_idx.binary_search(i).is_err())
        .filter(|&i| f.scores[i] >= est.z_hat)
        .count();
    assert_eq!(negatives_above, 0);
    assert!((est.raw_ratio - f.true_pi).abs() <= 0.05, "{} vs {}", est.raw_ratio, f.true_pi);
}
