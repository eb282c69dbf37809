//! Synthetic manifests with the published per-dataset class counts.

use super::{Dataset, ManifestRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixtureCounts {
    pub dataset: Dataset,
    pub amf: usize,
    pub nmf: usize,
    pub apoptotic: usize,
    pub noise: usize,
    pub uncertain: usize,
}

impl FixtureCounts {
    pub fn total(&self) -> usize {
        self.amf + self.nmf + self.apoptotic + self.noise + self.uncertain
    }
}

const fn counts(dataset: Dataset, amf: usize, nmf: usize) -> FixtureCounts {
    FixtureCounts {
        dataset,
        amf,
        nmf,
        apoptotic: 0,
        noise: 0,
        uncertain: 0,
    }
}

pub const REFERENCE_FIXTURES: [FixtureCounts; 4] = [
    counts(Dataset::AmiBr, 832, 2888),
    counts(Dataset::AtnormBr, 128, 618),
    counts(Dataset::MidogPlusPlus, 1748, 10191),
    FixtureCounts {
        dataset: Dataset::OmgOcto,
        amf: 1378,
        nmf: 379,
        apoptotic: 394,
        noise: 399,
        uncertain: 462,
    },
];

const GROUP_SIZE: usize = 20;

/// Records for `dataset` with classes spread evenly over ids and groups of
/// 20 consecutive records. Empty for datasets without published counts.
pub fn reference_fixture(dataset: Dataset) -> Vec<ManifestRecord> {
    let Some(c) = REFERENCE_FIXTURES.iter().find(|c| c.dataset == dataset) else {
        return Vec::new();
    };
    let classes = [
        ("AMF", c.amf),
        ("NMF", c.nmf),
        ("apoptotic", c.apoptotic),
        ("noise", c.noise),
        ("uncertain", c.uncertain),
    ];
    // k-th member of a class with n members sits at relative position (k + 0.5) / n
    let mut slots: Vec<(f64, usize, &str)> = classes
        .iter()
        .enumerate()
        .flat_map(|(j, &(label, n))| (0..n).map(move |k| ((k as f64 + 0.5) / n as f64, j, label)))
        .collect();
    slots.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let prefix = dataset.tag().to_lowercase().replace("++", "pp");
    slots
        .into_iter()
        .enumerate()
        .map(|(i, (_, _, label))| {
            let group = i / GROUP_SIZE;
            let domain = match dataset {
                Dataset::MidogPlusPlus => format!("domain-{}", group % 7),
                Dataset::OmgOcto => "pan-cancer".to_string(),
                _ => "breast".to_string(),
            };
            let id = format!("{prefix}-{i:05}");
            ManifestRecord::new(
                &id,
                format!("images/{id}.png"),
                dataset,
                domain,
                format!("{prefix}-case-{group:03}"),
                label,
            )
            .expect("fixture labels are valid")
        })
        .collect()
}
