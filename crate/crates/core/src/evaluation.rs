//! Classification metrics, best-epoch selection, the BCE-with-logits loss and
//! the cosine annealing schedule.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const PREDICTION_HEADER: [&str; 6] = ["id", "score", "label", "domain", "fold", "epoch"];

/// How the `score` column is expressed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    #[default]
    Probability,
    Logit,
}

impl ScoreKind {
    /// The cut on this score scale equivalent to `probability_threshold`.
    pub fn threshold(&self, probability_threshold: f64) -> f64 {
        match self {
            ScoreKind::Probability => probability_threshold,
            ScoreKind::Logit => (probability_threshold / (1.0 - probability_threshold)).ln(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub score: f64,
    pub label: u8,
    pub domain: String,
    pub fold: usize,
    pub epoch: u64,
}

/// Loads a predictions CSV. Row numbers in errors count the header as row 1.
pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions(file, &path.display().to_string())
}

pub fn read_predictions<R: std::io::Read>(reader: R, source: &str) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::data(format!("{source}:1"), e.to_string()))?
        .clone();
    if headers.iter().ne(PREDICTION_HEADER) {
        return Err(Error::data(
            format!("{source}:1"),
            format!("header must be exactly `{}`", PREDICTION_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let loc = format!("{source}:{}", i + 2);
        let row = row.map_err(|e| Error::data(&loc, e.to_string()))?;
        if row.len() != PREDICTION_HEADER.len() {
            return Err(Error::data(&loc, format!("expected 6 fields, found {}", row.len())));
        }
        let parse_err = |col: &str, v: &str| Error::data(&loc, format!("invalid `{col}` value `{v}`"));
        let score: f64 = row[1].trim().parse().map_err(|_| parse_err("score", &row[1]))?;
        if !score.is_finite() {
            return Err(parse_err("score", &row[1]));
        }
        let label = match row[2].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_err("label", other)),
        };
        out.push(PredictionRecord {
            id: row[0].trim().to_string(),
            score,
            label,
            domain: row[3].trim().to_string(),
            fold: row[4].trim().parse().map_err(|_| parse_err("fold", &row[4]))?,
            epoch: row[5].trim().parse().map_err(|_| parse_err("epoch", &row[5]))?,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    /// Predicted positive iff `score >= threshold`.
    pub fn from_predictions(preds: &[PredictionRecord], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for p in preds {
            match (p.score >= threshold, p.label == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Mean of sensitivity and specificity; `None` unless both classes occur.
    pub fn balanced_accuracy(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        let neg = self.tn + self.fp;
        if pos == 0 || neg == 0 {
            return None;
        }
        Some((self.tp as f64 / pos as f64 + self.tn as f64 / neg as f64) / 2.0)
    }
}

fn single_class() -> Error {
    Error::data("predictions", "both classes must be present")
}

pub fn balanced_accuracy(preds: &[PredictionRecord], threshold: f64) -> Result<f64> {
    Confusion::from_predictions(preds, threshold)
        .balanced_accuracy()
        .ok_or_else(single_class)
}

/// Mann-Whitney AUC from mid-ranks: ties between a positive and a negative
/// count one half.
pub fn roc_auc_scores(scores: &[f64], labels: &[u8]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(single_class());
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        let pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum_pos += mid * pos as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

pub fn roc_auc(preds: &[PredictionRecord]) -> Result<f64> {
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    roc_auc_scores(&scores, &labels)
}

/// Metrics over one set of predictions. Undefined metrics (a single class
/// present) are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainMetrics {
    pub n: usize,
    pub balanced_accuracy: Option<f64>,
    pub roc_auc: Option<f64>,
    pub confusion: Confusion,
}

impl DomainMetrics {
    fn compute(preds: &[PredictionRecord], threshold: f64) -> Self {
        let confusion = Confusion::from_predictions(preds, threshold);
        Self {
            n: preds.len(),
            balanced_accuracy: confusion.balanced_accuracy(),
            roc_auc: roc_auc(preds).ok(),
            confusion,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub n: usize,
    pub balanced_accuracy: Option<f64>,
    pub roc_auc: Option<f64>,
    pub confusion: Confusion,
    pub per_domain: BTreeMap<String, DomainMetrics>,
}

pub fn per_domain_report(preds: &[PredictionRecord], threshold: f64) -> MetricsReport {
    let overall = DomainMetrics::compute(preds, threshold);
    let mut by_domain: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
    for p in preds {
        by_domain.entry(p.domain.clone()).or_default().push(p.clone());
    }
    MetricsReport {
        threshold,
        n: overall.n,
        balanced_accuracy: overall.balanced_accuracy,
        roc_auc: overall.roc_auc,
        confusion: overall.confusion,
        per_domain: by_domain
            .into_iter()
            .map(|(d, ps)| (d, DomainMetrics::compute(&ps, threshold)))
            .collect(),
    }
}

impl MetricsReport {
    /// One CSV row per domain: `domain,n,balanced_accuracy,roc_auc,tp,fp,tn,fn`.
    /// Undefined metrics are left empty.
    pub fn domain_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut out = String::from("domain,n,balanced_accuracy,roc_auc,tp,fp,tn,fn\n");
        for (d, m) in &self.per_domain {
            let c = m.confusion;
            out.push_str(&format!(
                "{d},{},{},{},{},{},{},{}\n",
                m.n,
                fmt(m.balanced_accuracy),
                fmt(m.roc_auc),
                c.tp,
                c.fp,
                c.tn,
                c.fn_
            ));
        }
        out
    }
}

/// Epoch with the highest balanced accuracy; the earliest one on ties.
pub fn select_best_epoch(log: &[(u64, f64)]) -> Result<u64> {
    let mut best: Option<(u64, f64)> = None;
    for &(epoch, ba) in log {
        best = match best {
            Some((e, b)) if ba < b || (ba == b && epoch >= e) => Some((e, b)),
            _ => Some((epoch, ba)),
        };
    }
    best.map(|(e, _)| e)
        .ok_or_else(|| Error::data("epochs", "empty validation log"))
}

/// Per-fold epoch selection and the report at the selected epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub best_epoch: u64,
    pub epochs: Vec<(u64, Option<f64>)>,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub threshold: f64,
    pub folds: Vec<FoldSummary>,
    /// All folds pooled at their selected epochs.
    pub pooled: MetricsReport,
}

/// Groups predictions by fold and epoch, picks each fold's best epoch by
/// balanced accuracy (epochs where it is undefined are skipped), and reports
/// per fold and pooled.
pub fn evaluate(preds: &[PredictionRecord], threshold: f64) -> Result<EvaluationSummary> {
    let mut grouped: BTreeMap<usize, BTreeMap<u64, Vec<PredictionRecord>>> = BTreeMap::new();
    for p in preds {
        grouped.entry(p.fold).or_default().entry(p.epoch).or_default().push(p.clone());
    }
    let mut folds = Vec::new();
    let mut pooled = Vec::new();
    for (fold, epochs) in grouped {
        let log: Vec<(u64, Option<f64>)> = epochs
            .iter()
            .map(|(&e, ps)| (e, Confusion::from_predictions(ps, threshold).balanced_accuracy()))
            .collect();
        let defined: Vec<(u64, f64)> = log.iter().filter_map(|&(e, b)| b.map(|b| (e, b))).collect();
        let best_epoch = select_best_epoch(&defined)
            .map_err(|_| Error::data(format!("fold {fold}"), "no epoch has both classes present"))?;
        let chosen = &epochs[&best_epoch];
        pooled.extend(chosen.iter().cloned());
        folds.push(FoldSummary {
            fold,
            best_epoch,
            epochs: log,
            report: per_domain_report(chosen, threshold),
        });
    }
    Ok(EvaluationSummary {
        threshold,
        folds,
        pooled: per_domain_report(&pooled, threshold),
    })
}

/// `max(x, 0) - x t + ln(1 + e^{-|x|})`.
pub fn bce_with_logits(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

/// Derivative of [`bce_with_logits`] in the logit: `sigmoid(x) - t`.
pub fn bce_with_logits_grad(logit: f64, target: f64) -> f64 {
    sigmoid(logit) - target
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub eta0: f64,
    pub eta_min: f64,
    pub t_max: u64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            eta0: 1e-4,
            eta_min: 1e-7,
            t_max: 20,
        }
    }
}

impl ScheduleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_min >= 0.0 && self.eta_min <= self.eta0 && self.eta0.is_finite()) {
            return Err(Error::param("schedule", "requires 0 <= eta_min <= eta0"));
        }
        if self.t_max == 0 {
            return Err(Error::param("schedule.t_max", "must be at least 1"));
        }
        Ok(())
    }
}

/// Cosine annealing from `eta0` at epoch 0 to `eta_min` at `t_max`, written
/// as a convex combination so both endpoints are exact.
pub fn cosine_lr(epoch: u64, s: &ScheduleSpec) -> Result<f64> {
    s.validate()?;
    if epoch > s.t_max {
        return Err(Error::param("epoch", format!("{epoch} outside [0, {}]", s.t_max)));
    }
    let f = (1.0 + (std::f64::consts::PI * epoch as f64 / s.t_max as f64).cos()) / 2.0;
    Ok(s.eta0 * f + s.eta_min * (1.0 - f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(scores: &[f64], labels: &[u8]) -> Vec<PredictionRecord> {
        scores
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (&score, &label))| PredictionRecord {
                id: format!("p{i}"),
                score,
                label,
                domain: "d".into(),
                fold: 0,
                epoch: 0,
            })
            .collect()
    }

    #[test]
    fn balanced_accuracy_cases() {
        let labels = [1, 1, 1, 1, 0, 0, 0, 0];
        let hard = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0];
        assert_eq!(balanced_accuracy(&preds(&hard, &labels), 0.5).unwrap(), 0.625);
        assert_eq!(balanced_accuracy(&preds(&[1.0; 8], &labels), 0.5).unwrap(), 0.5);
        assert_eq!(balanced_accuracy(&preds(&[0.9, 0.1], &[1, 0]), 0.5).unwrap(), 1.0);
        assert!(balanced_accuracy(&preds(&[0.9, 0.1], &[1, 1]), 0.5).is_err());
    }

    #[test]
    fn auc_cases() {
        assert_eq!(roc_auc(&preds(&[0.9, 0.8, 0.7, 0.1], &[1, 1, 0, 0])).unwrap(), 1.0);
        assert_eq!(roc_auc(&preds(&[0.5, 0.5], &[1, 0])).unwrap(), 0.5);
        assert_eq!(roc_auc(&preds(&[0.8, 0.4, 0.6, 0.2], &[1, 1, 0, 0])).unwrap(), 0.75);
        assert!(roc_auc(&preds(&[0.5], &[0])).is_err());
    }

    #[test]
    fn report_flags_single_class_domains() {
        let mut ps = preds(&[0.9, 0.2, 0.8, 0.6], &[1, 0, 1, 1]);
        ps[2].domain = "solo".into();
        ps[3].domain = "solo".into();
        let r = per_domain_report(&ps, 0.5);
        assert_eq!(r.per_domain["d"].roc_auc, Some(1.0));
        assert_eq!(r.per_domain["solo"].roc_auc, None);
        assert_eq!(r.per_domain["solo"].balanced_accuracy, None);
        assert_eq!(r.per_domain.values().map(|m| m.n).sum::<usize>(), r.n);
        assert_eq!(r.confusion.total(), 4);
    }

    #[test]
    fn best_epoch() {
        assert_eq!(select_best_epoch(&[(1, 0.7), (2, 0.9), (3, 0.85)]).unwrap(), 2);
        assert_eq!(select_best_epoch(&[(1, 0.9), (2, 0.9)]).unwrap(), 1);
        assert_eq!(select_best_epoch(&[(2, 0.9), (1, 0.9)]).unwrap(), 1);
        assert_eq!(select_best_epoch(&[(4, 0.1)]).unwrap(), 4);
        assert!(select_best_epoch(&[]).is_err());
    }

    #[test]
    fn logit_threshold_matches_probability_cut() {
        assert_eq!(ScoreKind::Logit.threshold(0.5), 0.0);
        for x in [-2.0, -0.3, 0.4, 1.5] {
            let t = 0.6;
            assert_eq!(x >= ScoreKind::Logit.threshold(t), sigmoid(x) >= t);
        }
    }

    #[test]
    fn bce_cases() {
        assert!((bce_with_logits(0.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(bce_with_logits(30.0, 1.0) < 1e-12);
        for x in [-40.0, -3.0, -0.1, 0.0, 0.7, 12.0] {
            assert_eq!(bce_with_logits(x, 1.0), bce_with_logits(-x, 0.0));
        }
    }

    #[test]
    fn schedule_cases() {
        let s = ScheduleSpec::default();
        assert_eq!(cosine_lr(0, &s).unwrap(), 1e-4);
        assert_eq!(cosine_lr(20, &s).unwrap(), 1e-7);
        let mid = 1e-7 + (1e-4 - 1e-7) / 2.0;
        assert!((cosine_lr(10, &s).unwrap() - mid).abs() < 1e-18);
        assert!(cosine_lr(21, &s).is_err());
        let lrs: Vec<f64> = (0..=20).map(|e| cosine_lr(e, &s).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn evaluate_picks_best_epoch_per_fold() {
        let mut ps = Vec::new();
        for (epoch, scores) in [(0u64, [0.4, 0.6, 0.3, 0.7]), (1, [0.9, 0.8, 0.2, 0.1]), (2, [0.9, 0.8, 0.2, 0.1])] {
            let mut batch = preds(&scores, &[1, 1, 0, 0]);
            batch.iter_mut().for_each(|p| p.epoch = epoch);
            ps.extend(batch);
        }
        let s = evaluate(&ps, 0.5).unwrap();
        assert_eq!(s.folds.len(), 1);
        assert_eq!(s.folds[0].best_epoch, 1);
        assert_eq!(s.pooled.balanced_accuracy, Some(1.0));
    }

    #[test]
    fn prediction_csv_errors() {
        let ok = "id,score,label,domain,fold,epoch\na,0.5,1,d,0,3\n";
        assert_eq!(read_predictions(ok.as_bytes(), "p.csv").unwrap().len(), 1);
        let bad = "id,score,label,domain,fold,epoch\na,0.5,2,d,0,3\n";
        assert!(matches!(read_predictions(bad.as_bytes(), "p.csv"), Err(Error::Data { location, .. }) if location == "p.csv:2"));
        let nan = "id,score,label,domain,fold,epoch\na,NaN,1,d,0,3\n";
        assert!(read_predictions(nan.as_bytes(), "p.csv").is_err());
    }
}
