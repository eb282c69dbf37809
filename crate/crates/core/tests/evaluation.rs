use mitoaug::evaluation::{balanced_accuracy, per_domain_report, roc_auc_scores, PredictionRecord};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u8..20, n).prop_map(|v| v.into_iter().map(|x| x as f64 / 19.0).collect()),
            proptest::collection::vec(0u8..2, n).prop_map(|mut l| {
                l[0] = 1;
                l[1] = 0;
                l
            }),
        )
    })
}

fn records(scores: &[f64], labels: &[u8]) -> Vec<PredictionRecord> {
    scores
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (&score, &label))| PredictionRecord {
            id: format!("r{i}"),
            score,
            label,
            domain: if i % 2 == 0 { "a".into() } else { "b".into() },
            fold: 0,
            epoch: 0,
        })
        .collect()
}

proptest! {
    #[test]
    fn auc_is_invariant_under_monotone_maps((scores, labels) in instance()) {
        let base = roc_auc_scores(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s - 1.0).exp()).collect();
        prop_assert_eq!(roc_auc_scores(&mapped, &labels).unwrap(), base);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn flipping_labels_complements_auc((scores, labels) in instance()) {
        let base = roc_auc_scores(&scores, &labels).unwrap();
        let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        let other = roc_auc_scores(&scores, &flipped).unwrap();
        prop_assert!((base + other - 1.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_accuracy_ignores_order_and_duplication((scores, labels) in instance(), rot in 0usize..40) {
        let recs = records(&scores, &labels);
        let base = balanced_accuracy(&recs, 0.5).unwrap();
        let mut rotated = recs.clone();
        let len = rotated.len();
        rotated.rotate_left(rot % len);
        prop_assert_eq!(balanced_accuracy(&rotated, 0.5).unwrap(), base);
        let doubled: Vec<_> = recs.iter().chain(&recs).cloned().collect();
        prop_assert!((balanced_accuracy(&doubled, 0.5).unwrap() - base).abs() < 1e-15);
    }
}

#[test]
fn single_class_input_is_rejected() {
    assert!(roc_auc_scores(&[0.1, 0.2], &[1, 1]).is_err());
}

#[test]
fn per_domain_report_splits_by_domain() {
    let scores = [0.9, 0.1, 0.8, 0.3, 0.7, 0.6];
    let labels = [1, 0, 1, 0, 0, 1];
    let report = per_domain_report(&records(&scores, &labels), 0.5);
    assert_eq!(report.n, 6);
    assert_eq!(report.per_domain.len(), 2);
    assert_eq!(report.per_domain.values().map(|d| d.n).sum::<usize>(), 6);
}
