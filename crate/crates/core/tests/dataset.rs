use std::collections::HashMap;

use mitoaug::dataset::{
    grouped_stratified_kfold, inverse_frequency_weights, load_manifest, read_folds, read_manifest,
    weighted_sample_indices, write_folds, write_manifest, Dataset, ManifestRecord,
};
use mitoaug::image::make_rng;
use mitoaug::Error;
use proptest::prelude::*;

fn synthetic(groups: &[(usize, usize)]) -> Vec<ManifestRecord> {
    let mut out = Vec::new();
    for (g, &(nmf, amf)) in groups.iter().enumerate() {
        for k in 0..nmf + amf {
            let label = if k < amf { "AMF" } else { "NMF" };
            out.push(
                ManifestRecord::new(format!("g{g}-{k}"), format!("{g}/{k}.png"), Dataset::MidogPlusPlus, "d", format!("case{g}"), label)
                    .unwrap(),
            );
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn folds_keep_groups_whole_and_ignore_input_order(
        groups in proptest::collection::vec((1usize..12, 0usize..6), 5..20),
        seed in 0u64..1000,
        rot in 0usize..100,
    ) {
        let recs = synthetic(&groups);
        let folds = grouped_stratified_kfold(&recs, 5, seed).unwrap();
        prop_assert_eq!(folds.assignment().len(), recs.len());
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for r in &recs {
            let f = folds.fold_of(&r.id).unwrap();
            prop_assert_eq!(*seen.entry(&r.group_id).or_insert(f), f);
        }
        let mut rotated = recs.clone();
        let len = rotated.len();
        rotated.rotate_left(rot % len);
        prop_assert_eq!(grouped_stratified_kfold(&rotated, 5, seed).unwrap(), folds);
    }

    #[test]
    fn weighted_indices_stay_in_range(n_nmf in 1usize..30, n_amf in 1usize..30, draws in 0usize..200) {
        let recs = synthetic(&[(n_nmf, n_amf)]);
        let w = inverse_frequency_weights(&recs).unwrap();
        let idx = weighted_sample_indices(&w, draws, &mut make_rng(1, 0, 0, "t"));
        prop_assert_eq!(idx.len(), draws);
        prop_assert!(idx.iter().all(|&i| i < w.len()));
    }
}

#[test]
fn manifest_and_folds_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let recs = synthetic(&[(5, 2), (4, 1), (6, 3), (2, 2), (3, 0), (7, 1)]);
    let manifest = dir.path().join("m.csv");
    write_manifest(&manifest, &recs).unwrap();
    assert_eq!(load_manifest(&manifest).unwrap(), recs);

    let folds = grouped_stratified_kfold(&recs, 3, 42).unwrap();
    let path = dir.path().join("folds.json");
    write_folds(&path, &folds).unwrap();
    assert_eq!(read_folds(&path).unwrap(), folds);
    for f in 0..3 {
        let train = folds.training_records(&recs, f).len();
        let val = folds.validation_records(&recs, f).len();
        assert_eq!(train + val, recs.len());
    }
}

#[test]
fn fewer_groups_than_folds_is_an_error() {
    let recs = synthetic(&[(3, 1), (2, 2)]);
    assert!(matches!(grouped_stratified_kfold(&recs, 5, 42), Err(Error::Data { .. })));
}

#[test]
fn malformed_rows_report_their_position() {
    let text = "id,image_path,dataset,domain,group_id,raw_label\na,a.png,AMi-Br,breast,g\n";
    let err = read_manifest(text.as_bytes(), "m.csv").unwrap_err().to_string();
    assert!(err.contains("m.csv:2"), "{err}");
    let text = "id,image_path,dataset,domain,raw_label\n";
    let err = read_manifest(text.as_bytes(), "m.csv").unwrap_err().to_string();
    assert!(err.contains("group_id"), "{err}");
}
