//! Inverse-class-frequency weights and weighted sampling with replacement.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ManifestRecord, AMF, NMF};
use crate::error::{Error, Result};
use crate::image::{io::write_atomic, make_rng, RngStream};

/// Per-record sampling weights over one training pool, in id order.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleWeights {
    pub ids: Vec<String>,
    pub labels: Vec<u8>,
    pub weights: Vec<f64>,
    /// Pool size per class, indexed by label.
    pub class_counts: [usize; 2],
}

impl SampleWeights {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// `weight = 1 / (pool count of the record's class)`. Excluded records are
/// skipped; both classes must be present.
pub fn inverse_frequency_weights<'a, I>(records: I) -> Result<SampleWeights>
where
    I: IntoIterator<Item = &'a ManifestRecord>,
{
    let mut pool: Vec<(&str, u8)> = records
        .into_iter()
        .filter_map(|r| r.label.map(|l| (r.id.as_str(), l)))
        .collect();
    pool.sort_unstable();
    let mut class_counts = [0usize; 2];
    for &(_, l) in &pool {
        class_counts[l as usize] += 1;
    }
    for (label, name) in [(NMF, "NMF"), (AMF, "AMF")] {
        if class_counts[label as usize] == 0 {
            return Err(Error::data("weights", format!("no {name} records in the sampling pool")));
        }
    }
    Ok(SampleWeights {
        ids: pool.iter().map(|(id, _)| id.to_string()).collect(),
        labels: pool.iter().map(|&(_, l)| l).collect(),
        weights: pool.iter().map(|&(_, l)| 1.0 / class_counts[l as usize] as f64).collect(),
        class_counts,
    })
}

/// Probability that one draw lands on `label`.
pub fn expected_class_fraction(w: &SampleWeights, label: u8) -> f64 {
    let total: f64 = w.weights.iter().sum();
    let class: f64 = w
        .weights
        .iter()
        .zip(&w.labels)
        .filter(|(_, &l)| l == label)
        .map(|(w, _)| w)
        .sum();
    class / total
}

/// `n` indices drawn independently with replacement, one uniform draw each,
/// located in the cumulative weight table.
pub fn weighted_sample_indices(w: &SampleWeights, n: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut acc = 0.0;
    let cdf: Vec<f64> = w
        .weights
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    let last = cdf.len() - 1;
    (0..n)
        .map(|_| {
            let target = rng.uniform() * acc;
            cdf.partition_point(|&c| c <= target).min(last)
        })
        .collect()
}

pub fn weighted_sample(w: &SampleWeights, n: usize, rng: &mut RngStream) -> Vec<String> {
    weighted_sample_indices(w, n, rng)
        .into_iter()
        .map(|i| w.ids[i].clone())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanBatch {
    pub epoch: u64,
    pub batch: usize,
    pub ids: Vec<String>,
}

/// Per epoch, as many draws as the pool has records, from
/// `make_rng(seed, epoch, 0, "sampler")`, cut into batches of `batch_size`
/// (the last one may be short).
pub fn sampling_plan(w: &SampleWeights, epochs: u64, batch_size: usize, seed: u64) -> Result<Vec<PlanBatch>> {
    if batch_size == 0 {
        return Err(Error::param("batch_size", "must be at least 1"));
    }
    let mut plan = Vec::new();
    for epoch in 0..epochs {
        let ids = weighted_sample(w, w.len(), &mut make_rng(seed, epoch, 0, "sampler"));
        plan.extend(ids.chunks(batch_size).enumerate().map(|(batch, chunk)| PlanBatch {
            epoch,
            batch,
            ids: chunk.to_vec(),
        }));
    }
    Ok(plan)
}

pub fn write_sampling_plan(path: &Path, plan: &[PlanBatch]) -> Result<()> {
    let mut out = String::new();
    for b in plan {
        out.push_str(&serde_json::to_string(b).expect("plan batch serializes"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;

    pub(crate) fn pool(nmf: usize, amf: usize) -> Vec<ManifestRecord> {
        (0..nmf + amf)
            .map(|i| {
                let label = if i < amf { "AMF" } else { "NMF" };
                ManifestRecord::new(format!("r{i:05}"), "x.png", Dataset::AmiBr, "breast", format!("g{}", i / 10), label)
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn weights_are_inverse_class_counts() {
        let w = inverse_frequency_weights(&pool(900, 100)).unwrap();
        assert_eq!(w.class_counts, [900, 100]);
        for (wt, l) in w.weights.iter().zip(&w.labels) {
            assert_eq!(*wt, if *l == AMF { 1.0 / 100.0 } else { 1.0 / 900.0 });
        }
        let analytic = (100.0 / 100.0) / (100.0 / 100.0 + 900.0 / 900.0);
        assert!((expected_class_fraction(&w, AMF) - analytic).abs() < 1e-12);
        let even = inverse_frequency_weights(&pool(500, 500)).unwrap();
        assert!(even.weights.iter().all(|&x| x == 1.0 / 500.0));
        assert!(inverse_frequency_weights(&pool(10, 0)).is_err());
    }

    #[test]
    fn balanced_draws() {
        let w = inverse_frequency_weights(&pool(900, 100)).unwrap();
        let n = 128 * 100;
        let idx = weighted_sample_indices(&w, n, &mut make_rng(42, 0, 0, "sampler"));
        let amf = idx.iter().filter(|&&i| w.labels[i] == AMF).count() as f64 / n as f64;
        assert!((amf - 0.5).abs() <= 0.015, "{amf}");
        let again = weighted_sample_indices(&w, n, &mut make_rng(42, 0, 0, "sampler"));
        assert_eq!(idx, again);
    }

    #[test]
    fn equal_weights_are_uniform() {
        let w = inverse_frequency_weights(&pool(5, 5)).unwrap();
        let n = 10_000;
        let mut counts = [0usize; 10];
        for i in weighted_sample_indices(&w, n, &mut make_rng(7, 0, 0, "u")) {
            counts[i] += 1;
        }
        let e = n as f64 / 10.0;
        let sigma = (n as f64 * 0.1 * 0.9).sqrt();
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 9 degrees of freedom, 0.999 quantile
        assert!(chi2 < 27.877, "{chi2}");
        assert!(counts.iter().all(|&c| (c as f64 - e).abs() <= 3.0 * sigma), "{counts:?}");
    }

    #[test]
    fn plan_batches() {
        let w = inverse_frequency_weights(&pool(20, 5)).unwrap();
        let plan = sampling_plan(&w, 2, 10, 42).unwrap();
        let sizes: Vec<(u64, usize, usize)> = plan.iter().map(|b| (b.epoch, b.batch, b.ids.len())).collect();
        assert_eq!(sizes, vec![(0, 0, 10), (0, 1, 10), (0, 2, 5), (1, 0, 10), (1, 1, 10), (1, 2, 5)]);
        assert_ne!(plan[0].ids, plan[3].ids);
        assert_eq!(plan, sampling_plan(&w, 2, 10, 42).unwrap());
    }
}
