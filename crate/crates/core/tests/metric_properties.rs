mod common;

use crisp::metrics::{hamming_loss, MetricsReport};
use ndarray::Array2;
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (Array2<f64>, Array2<u8>)> {
    (1usize..40, 1usize..8).prop_flat_map(|(n, c)| {
        (
            proptest::collection::vec((0u32..=30).prop_map(|k| f64::from(k) / 30.0), n * c),
            proptest::collection::vec(0u8..=1, n * c),
        )
            .prop_map(move |(p, l)| {
                (
                    Array2::from_shape_vec((n, c), p).unwrap(),
                    Array2::from_shape_vec((n, c), l).unwrap(),
                )
            })
    })
}

fn values(r: &MetricsReport) -> Vec<Option<f64>> {
    vec![
        Some(r.hamming_loss),
        r.ranking_loss,
        r.one_error,
        r.coverage,
        r.average_precision,
        r.mean_average_precision,
    ]
}

proptest! {
    #[test]
    fn equals_brute_force((probs, labels) in instance()) {
        let r = MetricsReport::compute(probs.view(), labels.view()).unwrap();
        prop_assert_eq!(r.hamming_loss, common::hamming(&probs, &labels));
        prop_assert_eq!(r.ranking_loss, common::ranking_loss(&probs, &labels));
        prop_assert_eq!(r.one_error, common::one_error(&probs, &labels));
        prop_assert_eq!(r.coverage, common::coverage(&probs, &labels));
        prop_assert_eq!(r.average_precision, common::average_precision(&probs, &labels));
        prop_assert_eq!(r.mean_average_precision, common::mean_average_precision(&probs, &labels));
    }

    #[test]
    fn all_in_unit_interval((probs, labels) in instance()) {
        let r = MetricsReport::compute(probs.view(), labels.view()).unwrap();
        for v in values(&r).into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn rank_measures_ignore_monotone_transforms((probs, labels) in instance()) {
        let r = MetricsReport::compute(probs.view(), labels.view()).unwrap();
        for t in [probs.mapv(|f| f * f * f), probs.mapv(|f| 0.5 + 0.4 * f)] {
            let rt = MetricsReport::compute(t.view(), labels.view()).unwrap();
            prop_assert_eq!(&values(&rt)[1..], &values(&r)[1..]);
        }
    }
}

#[test]
fn constant_scores_hamming_is_positive_rate() {
    let labels = Array2::from_shape_vec((3, 2), vec![1, 0, 1, 1, 0, 0]).unwrap();
    let probs = Array2::from_elem((3, 2), 0.5);
    // Every entry is predicted positive, so the negatives are the errors.
    assert_eq!(hamming_loss(probs.view(), labels.view(), 0.5).unwrap(), 3.0 / 6.0);
    assert_eq!(common::hamming(&probs, &labels), 3.0 / 6.0);
}
