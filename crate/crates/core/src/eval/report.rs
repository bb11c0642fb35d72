//! Threshold sweep and report serialization.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{auc, threshold_at, weighted_f1, ConfusionCounts};
use super::split::SplitMeta;
use crate::{Error, Result};

/// `0.05, 0.06, ..., 0.30`.
pub fn default_tau_grid() -> Vec<f64> {
    (5..=30).map(|i| i as f64 / 100.0).collect()
}

/// Parses `lo:hi:step` or a comma-separated list.
pub fn parse_tau_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("invalid tau grid {s:?}; use lo:hi:step or a comma-separated list"));
    let grid: Vec<f64> = if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
        let [lo, hi, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let steps = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=steps).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect()
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::Config(format!("tau values must lie in (0, 1): {s:?}")));
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub threshold: f64,
    pub flagged: usize,
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    pub weighted_f1: f64,
}

pub fn sweep(scores: &[f64], labels: &[u8], grid: &[f64]) -> Result<Vec<SweepRow>> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), actual: scores.len() });
    }
    grid.iter()
        .map(|&tau| {
            let t = threshold_at(scores, tau)?;
            let counts = ConfusionCounts::from_predictions(labels, &t.flagged)?;
            Ok(SweepRow {
                tau,
                threshold: t.value,
                flagged: t.count(),
                counts,
                weighted_f1: weighted_f1(&counts),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detector: String,
    pub encoding: String,
    pub auc: f64,
    pub rows: usize,
    pub anomalies: usize,
    pub sweep: Vec<SweepRow>,
    pub split: Option<SplitMeta>,
}

impl EvalReport {
    pub fn evaluate(
        detector: &str,
        encoding: &str,
        scores: &[f64],
        labels: &[u8],
        grid: &[f64],
        split: Option<SplitMeta>,
    ) -> Result<Self> {
        Ok(EvalReport {
            detector: detector.to_string(),
            encoding: encoding.to_string(),
            auc: auc(scores, labels)?,
            rows: labels.len(),
            anomalies: labels.iter().filter(|&&l| l == 1).count(),
            sweep: sweep(scores, labels, grid)?,
            split,
        })
    }

    pub fn best(&self) -> Option<&SweepRow> {
        self.sweep.iter().max_by(|a, b| a.weighted_f1.total_cmp(&b.weighted_f1))
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# auc={}\n# detector={} encoding={}\n", self.auc, self.detector, self.encoding);
        s.push_str("tau,threshold,tp,fp,tn,fn,weighted_f1\n");
        for r in &self.sweep {
            let c = &r.counts;
            let _ = writeln!(s, "{},{},{},{},{},{},{}", r.tau, r.threshold, c.tp, c.fp, c.tn, c.fn_, r.weighted_f1);
        }
        s
    }

    /// Two whitespace-separated columns: tau and weighted F1.
    pub fn to_plot_text(&self) -> String {
        let mut s = format!("# {} / {}: weighted F1 by tau\n", self.detector, self.encoding);
        for r in &self.sweep {
            let _ = writeln!(s, "{:.2} {:.6}", r.tau, r.weighted_f1);
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Writes `<stem>.json`, `<stem>.csv` and `<stem>.sweep.txt` into `dir`.
    pub fn write_all(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            (format!("{stem}.json"), self.to_json()?),
            (format!("{stem}.csv"), self.to_csv()),
            (format!("{stem}.sweep.txt"), self.to_plot_text()),
        ];
        let mut out = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            out.push(path);
        }
        Ok(out)
    }
}
