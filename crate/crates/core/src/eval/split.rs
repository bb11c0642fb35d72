//! Train/test splitting strategies. Index lists are returned sorted.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::keyed;
use crate::{Error, Result};

pub const MIN_SPLIT_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    #[serde(rename = "stratified_70_30")]
    Stratified7030,
    Recycling,
    Discarding,
}

impl SplitStrategy {
    pub const ALL: [SplitStrategy; 3] = [SplitStrategy::Stratified7030, SplitStrategy::Recycling, SplitStrategy::Discarding];

    pub fn name(self) -> &'static str {
        match self {
            SplitStrategy::Stratified7030 => "stratified_70_30",
            SplitStrategy::Recycling => "recycling",
            SplitStrategy::Discarding => "discarding",
        }
    }
}

impl fmt::Display for SplitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stratified_70_30" | "stratified" => Ok(SplitStrategy::Stratified7030),
            "recycling" => Ok(SplitStrategy::Recycling),
            "discarding" => Ok(SplitStrategy::Discarding),
            _ => Err(Error::Config(format!(
                "unknown split strategy {s:?}; expected stratified_70_30, recycling or discarding"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub strategy: SplitStrategy,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            strategy: SplitStrategy::Stratified7030,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMeta {
    pub strategy: SplitStrategy,
    pub seed: u64,
    pub rows: usize,
    pub train_rows: usize,
    pub train_anomalies: usize,
    pub test_rows: usize,
    pub test_anomalies: usize,
    /// Achieved anomaly ratio of the test set.
    pub test_anomaly_ratio: f64,
    /// Training anomalies dropped by the discarding strategy.
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Rows assigned to neither side.
    pub discarded: Vec<usize>,
    pub meta: SplitMeta,
}

fn shuffled(mut rows: Vec<usize>, seed: u64, class: u64) -> Vec<usize> {
    rows.shuffle(&mut keyed(seed, class, "split"));
    rows
}

/// `round(0.7 * count)` with halves rounded up, in integer arithmetic.
pub fn seventy_percent(count: usize) -> usize {
    (7 * count + 5) / 10
}

pub fn split(labels: &[u8], spec: &SplitSpec) -> Result<Split> {
    let n = labels.len();
    let anomalies: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    let normals: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
    if anomalies.len() + normals.len() != n {
        return Err(Error::InvalidInput("labels must be 0 or 1".into()));
    }
    if n < MIN_SPLIT_ROWS {
        return Err(Error::InvalidInput(format!("need at least {MIN_SPLIT_ROWS} rows to split, got {n}")));
    }
    if anomalies.is_empty() {
        return Err(Error::InvalidInput("cannot split a dataset without anomalies".into()));
    }
    let seed = spec.seed;
    let (mut train, mut test, mut discarded) = (Vec::new(), Vec::new(), Vec::new());
    match spec.strategy {
        SplitStrategy::Stratified7030 => {
            if anomalies.len() < 2 {
                return Err(Error::InvalidInput("stratified split needs at least 2 anomalies".into()));
            }
            for (class, rows) in [(0u64, normals), (1, anomalies)] {
                let rows = shuffled(rows, seed, class);
                let k = seventy_percent(rows.len());
                train.extend_from_slice(&rows[..k]);
                test.extend_from_slice(&rows[k..]);
            }
        }
        SplitStrategy::Recycling => {
            let rows = shuffled(normals, seed, 0);
            let k = rows.len() / 2;
            train.extend_from_slice(&rows[..k]);
            test.extend_from_slice(&rows[k..]);
            test.extend_from_slice(&anomalies);
        }
        SplitStrategy::Discarding => {
            let rows = shuffled((0..n).collect(), seed, 2);
            let k = n / 2;
            for &r in &rows[..k] {
                if labels[r] == 1 {
                    discarded.push(r);
                } else {
                    train.push(r);
                }
            }
            test.extend_from_slice(&rows[k..]);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    discarded.sort_unstable();
    let count = |rows: &[usize]| rows.iter().filter(|&&r| labels[r] == 1).count();
    let test_anomalies = count(&test);
    let meta = SplitMeta {
        strategy: spec.strategy,
        seed,
        rows: n,
        train_rows: train.len(),
        train_anomalies: count(&train),
        test_rows: test.len(),
        test_anomalies,
        test_anomaly_ratio: if test.is_empty() { 0.0 } else { test_anomalies as f64 / test.len() as f64 },
        discarded: discarded.len(),
    };
    Ok(Split { train, test, discarded, meta })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(normals: usize, anomalies: usize) -> Vec<u8> {
        let mut l = vec![0u8; normals];
        l.extend(std::iter::repeat_n(1, anomalies));
        l
    }

    #[test]
    fn stratified_counts() {
        let s = split(&labels(790, 210), &SplitSpec { strategy: SplitStrategy::Stratified7030, seed: 1 }).unwrap();
        assert_eq!(s.train.len(), 700);
        assert_eq!(s.meta.train_anomalies, 147);
        assert_eq!(s.test.len(), 300);
    }

    #[test]
    fn recycling_and_discarding_counts() {
        let l = labels(100, 10);
        let r = split(&l, &SplitSpec { strategy: SplitStrategy::Recycling, seed: 3 }).unwrap();
        assert_eq!((r.train.len(), r.meta.train_anomalies), (50, 0));
        assert_eq!((r.test.len(), r.meta.test_anomalies), (60, 10));
        let d = split(&l, &SplitSpec { strategy: SplitStrategy::Discarding, seed: 3 }).unwrap();
        assert_eq!(d.meta.train_anomalies, 0);
        assert_eq!(d.train.len() + d.discarded.len(), 55);
        assert_eq!(d.test.len(), 55);
    }

    #[test]
    fn partitions_cover_dataset() {
        let l: Vec<u8> = (0..137).map(|i| u8::from(i % 7 == 0)).collect();
        for strategy in SplitStrategy::ALL {
            let s = split(&l, &SplitSpec { strategy, seed: 11 }).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).chain(&s.discarded).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..137).collect::<Vec<_>>(), "{strategy}");
            assert_eq!(s, split(&l, &SplitSpec { strategy, seed: 11 }).unwrap());
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let spec = SplitSpec::default();
        assert!(split(&labels(20, 0), &spec).is_err());
        assert!(split(&labels(20, 1), &spec).is_err());
        assert!(split(&labels(5, 2), &spec).is_err());
        assert!(split(&[0, 2, 1, 1, 0, 0, 0, 0, 0, 0], &spec).is_err());
        assert!(split(&labels(20, 1), &SplitSpec { strategy: SplitStrategy::Recycling, seed: 0 }).is_ok());
    }

    #[test]
    fn strategy_names() {
        for s in SplitStrategy::ALL {
            assert_eq!(s.name().parse::<SplitStrategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
    }
}
