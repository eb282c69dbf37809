//! Manifests, label mapping, grouped stratified folds and balanced sampling.

mod fixtures;
mod sampling;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use fixtures::{reference_fixture, FixtureCounts, REFERENCE_FIXTURES};
pub use sampling::{
    expected_class_fraction, inverse_frequency_weights, sampling_plan, weighted_sample, weighted_sample_indices, write_sampling_plan,
    PlanBatch, SampleWeights,
};
pub use split::{grouped_stratified_kfold, read_folds, write_folds, FoldAssignment, FoldFile};

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 6] = ["id", "image_path", "dataset", "domain", "group_id", "raw_label"];

pub const NMF: u8 = 0;
pub const AMF: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "AMi-Br")]
    AmiBr,
    #[serde(rename = "AtNorM-Br")]
    AtnormBr,
    #[serde(rename = "AtNorM-MD")]
    AtnormMd,
    #[serde(rename = "MIDOG++")]
    MidogPlusPlus,
    #[serde(rename = "OMG-Octo")]
    OmgOcto,
}

impl Dataset {
    pub const ALL: [Dataset; 5] = [
        Dataset::AmiBr,
        Dataset::AtnormBr,
        Dataset::AtnormMd,
        Dataset::MidogPlusPlus,
        Dataset::OmgOcto,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Dataset::AmiBr => "AMi-Br",
            Dataset::AtnormBr => "AtNorM-Br",
            Dataset::AtnormMd => "AtNorM-MD",
            Dataset::MidogPlusPlus => "MIDOG++",
            Dataset::OmgOcto => "OMG-Octo",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.tag() == s)
            .ok_or_else(|| Error::data("dataset", format!("unknown dataset `{s}`")))
    }
}

/// Binary label for `raw_label`: `Some(AMF)`, `Some(NMF)`, or `None` for the
/// OMG-Octo classes outside the binary task.
pub fn map_label(raw_label: &str, dataset: Dataset) -> Result<Option<u8>> {
    let raw = raw_label.trim();
    if raw.eq_ignore_ascii_case("AMF") || raw.eq_ignore_ascii_case("atypical") {
        return Ok(Some(AMF));
    }
    if raw.eq_ignore_ascii_case("NMF") || raw.eq_ignore_ascii_case("normal") {
        return Ok(Some(NMF));
    }
    let excluded = ["apoptotic", "noise", "uncertain"];
    if dataset == Dataset::OmgOcto && excluded.iter().any(|e| raw.eq_ignore_ascii_case(e)) {
        return Ok(None);
    }
    Err(Error::data(
        "raw_label",
        format!("unknown label `{raw_label}` for dataset {dataset}"),
    ))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub image_path: PathBuf,
    pub dataset: Dataset,
    pub domain: String,
    pub group_id: String,
    pub raw_label: String,
    pub label: Option<u8>,
}

impl ManifestRecord {
    pub fn new(
        id: impl Into<String>,
        image_path: impl Into<PathBuf>,
        dataset: Dataset,
        domain: impl Into<String>,
        group_id: impl Into<String>,
        raw_label: impl Into<String>,
    ) -> Result<Self> {
        let raw_label = raw_label.into();
        let label = map_label(&raw_label, dataset)?;
        Ok(Self {
            id: id.into(),
            image_path: image_path.into(),
            dataset,
            domain: domain.into(),
            group_id: group_id.into(),
            raw_label,
            label,
        })
    }

    pub fn is_included(&self) -> bool {
        self.label.is_some()
    }

    /// The image path, resolved against `base` when relative.
    pub fn resolve_image(&self, base: &Path) -> PathBuf {
        if self.image_path.is_absolute() {
            self.image_path.clone()
        } else {
            base.join(&self.image_path)
        }
    }
}

/// Loads and validates a manifest. Row numbers in errors count the header
/// as row 1.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest(file, &path.display().to_string())
}

pub fn read_manifest<R: std::io::Read>(reader: R, source: &str) -> Result<Vec<ManifestRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::data(format!("{source}:1"), e.to_string()))?
        .clone();
    for col in MANIFEST_HEADER {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::data(format!("{source}:1"), format!("missing column `{col}`")));
        }
    }
    if headers.iter().ne(MANIFEST_HEADER) {
        return Err(Error::data(
            format!("{source}:1"),
            format!("header must be exactly `{}`", MANIFEST_HEADER.join(",")),
        ));
    }
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 2;
        let loc = format!("{source}:{row_no}");
        let row = row.map_err(|e| Error::data(&loc, e.to_string()))?;
        if row.len() != MANIFEST_HEADER.len() {
            return Err(Error::data(&loc, format!("expected 6 fields, found {}", row.len())));
        }
        let field = |j: usize| row[j].trim();
        for (j, name) in [(0, "id"), (1, "image_path"), (4, "group_id")] {
            if field(j).is_empty() {
                return Err(Error::data(&loc, format!("empty `{name}`")));
            }
        }
        let dataset: Dataset = field(2).parse().map_err(|e: Error| relocate(e, &loc))?;
        let record = ManifestRecord::new(field(0), field(1), dataset, field(3), field(4), field(5))
            .map_err(|e| relocate(e, &loc))?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::data(&loc, format!("duplicate id `{}`", record.id)));
        }
        records.push(record);
    }
    Ok(records)
}

fn relocate(e: Error, loc: &str) -> Error {
    match e {
        Error::Data { message, .. } => Error::data(loc, message),
        other => other,
    }
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(MANIFEST_HEADER).map_err(to_err)?;
    for r in records {
        w.write_record([
            r.id.as_str(),
            &r.image_path.to_string_lossy(),
            r.dataset.tag(),
            &r.domain,
            &r.group_id,
            &r.raw_label,
        ])
        .map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    crate::image::io::write_atomic(path, &bytes)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub total: usize,
    pub amf: usize,
    pub nmf: usize,
    pub excluded: usize,
}

impl DatasetCounts {
    pub fn amf_fraction(&self) -> f64 {
        self.amf as f64 / self.total as f64
    }
}

/// Per-dataset record counts.
pub fn dataset_counts(records: &[ManifestRecord]) -> BTreeMap<Dataset, DatasetCounts> {
    let mut out: BTreeMap<Dataset, DatasetCounts> = BTreeMap::new();
    for r in records {
        let c = out.entry(r.dataset).or_default();
        c.total += 1;
        match r.label {
            Some(AMF) => c.amf += 1,
            Some(_) => c.nmf += 1,
            None => c.excluded += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,image_path,dataset,domain,group_id,raw_label\n";

    #[test]
    fn label_mapping() {
        assert_eq!(map_label("AMF", Dataset::MidogPlusPlus).unwrap(), Some(AMF));
        assert_eq!(map_label("NMF", Dataset::AmiBr).unwrap(), Some(NMF));
        for l in ["apoptotic", "noise", "uncertain"] {
            assert_eq!(map_label(l, Dataset::OmgOcto).unwrap(), None);
            assert!(map_label(l, Dataset::AmiBr).is_err());
        }
        assert!(map_label("mitosis", Dataset::OmgOcto).is_err());
    }

    #[test]
    fn header_only_manifest_is_empty() {
        assert!(read_manifest(HEADER.as_bytes(), "m.csv").unwrap().is_empty());
    }

    #[test]
    fn both_dataset_tags_for_the_multi_domain_set_are_accepted() {
        let text = format!("{HEADER}a,a.png,MIDOG++,canine lymphoma,s1,AMF\nb,b.png,AtNorM-MD,human melanoma,s2,NMF\n");
        let recs = read_manifest(text.as_bytes(), "m.csv").unwrap();
        assert_eq!(recs[0].dataset, Dataset::MidogPlusPlus);
        assert_eq!(recs[1].dataset, Dataset::AtnormMd);
    }

    #[test]
    fn errors_carry_row_numbers() {
        let dup = format!("{HEADER}a,a.png,AMi-Br,breast,s1,AMF\nb,b.png,AMi-Br,breast,s1,NMF\na,c.png,AMi-Br,breast,s2,NMF\n");
        match read_manifest(dup.as_bytes(), "m.csv") {
            Err(Error::Data { location, message }) => {
                assert_eq!(location, "m.csv:4");
                assert!(message.contains("`a`"));
            }
            other => panic!("{other:?}"),
        }
        let missing = "id,image_path,dataset,domain,raw_label\n";
        match read_manifest(missing.as_bytes(), "m.csv") {
            Err(Error::Data { location, message }) => {
                assert_eq!(location, "m.csv:1");
                assert!(message.contains("group_id"));
            }
            other => panic!("{other:?}"),
        }
        let bad = format!("{HEADER}a,a.png,AMi-Br,breast,s1,AMF\nb,b.png,AMi-Br,breast\n");
        assert!(matches!(read_manifest(bad.as_bytes(), "m.csv"), Err(Error::Data { location, .. }) if location == "m.csv:3"));
        let label = format!("{HEADER}a,a.png,AMi-Br,breast,s1,what\n");
        assert!(matches!(read_manifest(label.as_bytes(), "m.csv"), Err(Error::Data { location, .. }) if location == "m.csv:2"));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let recs = reference_fixture(Dataset::AtnormBr);
        write_manifest(&path, &recs).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), recs);
    }
}
