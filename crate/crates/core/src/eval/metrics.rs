//! Rank AUC, the top-fraction threshold rule and class-weighted F1.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn check_labels(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), actual: scores.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidInput("labels must be 0 or 1".into()));
    }
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("AUC needs both classes present".into()));
    }
    Ok((pos, neg))
}

/// Mann-Whitney AUC with midranks for tied scores.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check_labels(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based: i+1 ..= j+1
        let mid = (i + j + 2) as f64 / 2.0;
        let positives = order[i..=j].iter().filter(|&&r| labels[r] == 1).count();
        rank_sum += mid * positives as f64;
        i = j + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Number of rows flagged at rate `tau`: `ceil(tau * n)`, treating values
/// within 1e-9 of an integer as that integer.
pub fn flag_count(tau: f64, n: usize) -> usize {
    let x = tau * n as f64;
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (k.max(0.0) as usize).min(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    /// Lowest flagged score; `+inf` when nothing is flagged.
    pub value: f64,
    pub flagged: Vec<bool>,
}

impl Threshold {
    pub fn count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}

/// Flags the `ceil(tau * n)` highest scores. Among tied scores at the
/// boundary, earlier rows are flagged first.
pub fn threshold_at(scores: &[f64], tau: f64) -> Result<Threshold> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!("tau must lie in (0, 1), got {tau}")));
    }
    let k = flag_count(tau, scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut flagged = vec![false; scores.len()];
    for &r in &order[..k] {
        flagged[r] = true;
    }
    let value = if k == 0 { f64::INFINITY } else { scores[order[k - 1]] };
    Ok(Threshold { value, flagged })
}

/// Anomalies are the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_predictions(labels: &[u8], predicted: &[bool]) -> Result<Self> {
        if labels.len() != predicted.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), actual: predicted.len() });
        }
        let mut c = ConfusionCounts::default();
        for (&l, &p) in labels.iter().zip(predicted) {
            match (l == 1, p) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// F1 of each class, averaged with the true class sizes as weights.
pub fn weighted_f1(c: &ConfusionCounts) -> f64 {
    let anomalies = c.tp + c.fn_;
    let normals = c.tn + c.fp;
    let total = anomalies + normals;
    if total == 0 {
        return 0.0;
    }
    let f_anomaly = f1(c.tp, c.fp, c.fn_);
    let f_normal = f1(c.tn, c.fn_, c.fp);
    (anomalies as f64 * f_anomaly + normals as f64 * f_normal) / total as f64
}
