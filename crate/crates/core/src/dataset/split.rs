//! Grouped stratified k-fold assignment.
//!
//! Groups are placed whole, largest first (ties by group id), each into the
//! fold that minimizes the class imbalance across folds, then the fold-size
//! imbalance, then the fold index. Class imbalance is the sum over classes of
//! the standard deviation across folds of the fold's share of that class. If
//! the groups left equal the folds still empty, only empty folds are
//! candidates, so every fold ends up non-empty. Finally the fold labels are
//! permuted by a shuffle drawn from `make_rng(seed, 0, 0, "kfold")`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ManifestRecord, AMF, NMF};
use crate::error::{Error, Result};
use crate::image::{io::write_atomic, make_rng};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    seed: u64,
    assignment: BTreeMap<String, usize>,
    class_counts: Vec<ClassCounts>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub nmf: usize,
    pub amf: usize,
}

/// On-disk form: fold index -> ids, plus metadata.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldFile {
    pub k: usize,
    pub seed: u64,
    pub folds: BTreeMap<String, Vec<String>>,
    pub class_counts: BTreeMap<String, ClassCounts>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<String, usize> {
        &self.assignment
    }

    pub fn class_counts(&self) -> &[ClassCounts] {
        &self.class_counts
    }

    /// Ids in `fold`, sorted.
    pub fn fold_ids(&self, fold: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Included records outside `fold`, in id order.
    pub fn training_records<'a>(&self, records: &'a [ManifestRecord], fold: usize) -> Vec<&'a ManifestRecord> {
        self.select(records, |f| f != fold)
    }

    pub fn validation_records<'a>(&self, records: &'a [ManifestRecord], fold: usize) -> Vec<&'a ManifestRecord> {
        self.select(records, |f| f == fold)
    }

    fn select<'a>(&self, records: &'a [ManifestRecord], keep: impl Fn(usize) -> bool) -> Vec<&'a ManifestRecord> {
        let mut out: Vec<&ManifestRecord> = records
            .iter()
            .filter(|r| self.fold_of(&r.id).is_some_and(&keep))
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    pub fn to_file(&self) -> FoldFile {
        FoldFile {
            k: self.k,
            seed: self.seed,
            folds: (0..self.k)
                .map(|f| (f.to_string(), self.fold_ids(f).into_iter().map(String::from).collect()))
                .collect(),
            class_counts: self
                .class_counts
                .iter()
                .enumerate()
                .map(|(f, c)| (f.to_string(), *c))
                .collect(),
        }
    }

    pub fn from_file(file: &FoldFile) -> Result<Self> {
        let mut assignment = BTreeMap::new();
        let mut class_counts = vec![ClassCounts::default(); file.k];
        for (key, ids) in &file.folds {
            let fold: usize = key
                .parse()
                .ok()
                .filter(|&f| f < file.k)
                .ok_or_else(|| Error::data("folds", format!("fold key `{key}` is not an index below k={}", file.k)))?;
            for id in ids {
                if assignment.insert(id.clone(), fold).is_some() {
                    return Err(Error::data("folds", format!("id `{id}` appears in more than one fold")));
                }
            }
            if let Some(c) = file.class_counts.get(key) {
                class_counts[fold] = *c;
            }
        }
        Ok(Self {
            k: file.k,
            seed: file.seed,
            assignment,
            class_counts,
        })
    }
}

pub fn write_folds(path: &Path, folds: &FoldAssignment) -> Result<()> {
    let json = serde_json::to_string_pretty(&folds.to_file()).expect("fold file serializes");
    write_atomic(path, format!("{json}\n").as_bytes())
}

pub fn read_folds(path: &Path) -> Result<FoldAssignment> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: FoldFile = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    FoldAssignment::from_file(&file)
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn imbalance(folds: &[[usize; 2]], totals: [usize; 2]) -> (f64, f64) {
    let class = (0..2)
        .filter(|&c| totals[c] > 0)
        .map(|c| std_dev(folds.iter().map(|f| f[c] as f64 / totals[c] as f64)))
        .sum();
    let size = std_dev(folds.iter().map(|f| (f[0] + f[1]) as f64));
    (class, size)
}

const TIE: f64 = 1e-12;

pub fn grouped_stratified_kfold(records: &[ManifestRecord], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::param("folds", "k must be at least 2"));
    }
    // group id -> (per-class counts, member ids); BTreeMap keeps this independent of input order
    let mut groups: BTreeMap<&str, ([usize; 2], Vec<&str>)> = BTreeMap::new();
    let mut totals = [0usize; 2];
    for r in records {
        let Some(label) = r.label else { continue };
        let g = groups.entry(r.group_id.as_str()).or_default();
        g.0[label as usize] += 1;
        g.1.push(r.id.as_str());
        totals[label as usize] += 1;
    }
    if groups.len() < k {
        return Err(Error::data(
            "folds",
            format!("{} groups cannot fill {k} folds", groups.len()),
        ));
    }
    let mut order: Vec<(&str, [usize; 2])> = groups.iter().map(|(g, (c, _))| (*g, *c)).collect();
    order.sort_by(|a, b| (b.1[0] + b.1[1]).cmp(&(a.1[0] + a.1[1])).then(a.0.cmp(b.0)));

    let mut folds = vec![[0usize; 2]; k];
    let mut group_fold: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, (g, c)) in order.iter().enumerate() {
        let remaining = order.len() - i;
        let empty = folds.iter().filter(|f| f[0] + f[1] == 0).count();
        let forced = remaining <= empty;
        let mut best: Option<(usize, (f64, f64))> = None;
        for f in 0..k {
            if forced && folds[f][0] + folds[f][1] > 0 {
                continue;
            }
            folds[f][0] += c[0];
            folds[f][1] += c[1];
            let cost = imbalance(&folds, totals);
            folds[f][0] -= c[0];
            folds[f][1] -= c[1];
            let better = match best {
                None => true,
                Some((_, b)) => {
                    if (cost.0 - b.0).abs() > TIE {
                        cost.0 < b.0
                    } else {
                        (cost.1 - b.1).abs() > TIE && cost.1 < b.1
                    }
                }
            };
            if better {
                best = Some((f, cost));
            }
        }
        let f = best.expect("at least one candidate fold").0;
        folds[f][0] += c[0];
        folds[f][1] += c[1];
        group_fold.insert(g, f);
    }

    let mut perm: Vec<usize> = (0..k).collect();
    let mut rng = make_rng(seed, 0, 0, "kfold");
    for i in (1..k).rev() {
        perm.swap(i, rng.index(i + 1));
    }

    let mut assignment = BTreeMap::new();
    let mut class_counts = vec![ClassCounts::default(); k];
    for (g, (c, ids)) in &groups {
        let f = perm[group_fold[g]];
        class_counts[f].nmf += c[NMF as usize];
        class_counts[f].amf += c[AMF as usize];
        for id in ids {
            assignment.insert(id.to_string(), f);
        }
    }
    Ok(FoldAssignment {
        k,
        seed,
        assignment,
        class_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;

    fn record(id: &str, group: &str, amf: bool) -> ManifestRecord {
        ManifestRecord::new(id, "x.png", Dataset::AmiBr, "breast", group, if amf { "AMF" } else { "NMF" }).unwrap()
    }

    #[test]
    fn equal_groups_fill_evenly() {
        let recs: Vec<ManifestRecord> = (0..10)
            .flat_map(|g| (0..4).map(move |i| record(&format!("r{g}-{i}"), &format!("g{g}"), i % 2 == 0)))
            .collect();
        let folds = grouped_stratified_kfold(&recs, 5, 42).unwrap();
        for f in 0..5 {
            assert_eq!(folds.fold_ids(f).len(), 8);
            assert_eq!(folds.class_counts()[f], ClassCounts { nmf: 4, amf: 4 });
        }
    }

    #[test]
    fn too_few_groups_is_an_error() {
        let recs: Vec<ManifestRecord> = (0..4).map(|g| record(&format!("r{g}"), &format!("g{g}"), g % 2 == 0)).collect();
        assert!(matches!(grouped_stratified_kfold(&recs, 5, 42), Err(Error::Data { .. })));
        assert!(matches!(grouped_stratified_kfold(&recs, 1, 42), Err(Error::Param { .. })));
    }

    #[test]
    fn input_order_and_excluded_records_do_not_matter() {
        let mut recs: Vec<ManifestRecord> = (0..60)
            .map(|i| record(&format!("r{i:02}"), &format!("g{}", i % 13), i % 3 == 0))
            .collect();
        let a = grouped_stratified_kfold(&recs, 5, 42).unwrap();
        recs.reverse();
        recs.push(ManifestRecord::new("zz", "x.png", Dataset::OmgOcto, "d", "g99", "noise").unwrap());
        let b = grouped_stratified_kfold(&recs, 5, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.fold_of("zz"), None);
    }

    #[test]
    fn fold_file_round_trip() {
        let recs: Vec<ManifestRecord> = (0..30).map(|i| record(&format!("r{i}"), &format!("g{}", i % 7), i % 4 == 0)).collect();
        let a = grouped_stratified_kfold(&recs, 5, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("folds.json");
        write_folds(&path, &a).unwrap();
        assert_eq!(read_folds(&path).unwrap(), a);
    }
}
