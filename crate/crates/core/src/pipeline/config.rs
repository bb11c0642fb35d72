//! Pipeline configuration, read from TOML with command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::{DetectorKind, DetectorParams};
use crate::encode::{EncoderConfig, Encoding};
use crate::eval::{default_tau_grid, parse_tau_grid, SplitStrategy};
use crate::vcgen::{AnomalyConfig, SynthSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    /// Run the claims generator, optionally over a vehicle CSV.
    Generate,
    /// Read an already labeled CSV.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: SourceKind,
    /// Generate: base vehicle CSV (synthetic base when absent).
    /// Csv: the labeled dataset.
    pub path: Option<PathBuf>,
    pub rows: usize,
    pub label_column: String,
    /// Csv source: columns forced to numerical; the rest are inferred.
    pub numerical_columns: Option<Vec<String>>,
    /// Csv source: columns forced to categorical.
    pub categorical_columns: Option<Vec<String>>,
    pub with_dates: bool,
    pub synth: SynthSpec,
    pub anomalies: AnomalyConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            source: SourceKind::Generate,
            path: None,
            rows: 10_000,
            label_column: "label".into(),
            numerical_columns: None,
            categorical_columns: None,
            with_dates: false,
            synth: SynthSpec::default(),
            anomalies: AnomalyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub strategy: SplitStrategy,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            strategy: SplitStrategy::Stratified7030,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZScoreConfig {
    /// Source column scored by the z-score detector.
    pub column: String,
}

impl Default for ZScoreConfig {
    fn default() -> Self {
        ZScoreConfig {
            column: "repair_cost".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Every stage seed is derived from this and the stage name.
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub encodings: Vec<Encoding>,
    pub detectors: Vec<DetectorKind>,
    /// `lo:hi:step` or a comma-separated list.
    pub tau_grid: Option<String>,
    pub dataset: DatasetConfig,
    pub split: SplitConfig,
    pub encoder: EncoderConfig,
    pub detector: DetectorParams,
    pub zscore: ZScoreConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            out: None,
            encodings: vec![Encoding::OneHot],
            detectors: vec![DetectorKind::Som],
            tau_grid: None,
            dataset: DatasetConfig::default(),
            split: SplitConfig::default(),
            encoder: EncoderConfig::default(),
            detector: DetectorParams::default(),
            zscore: ZScoreConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn tau_grid(&self) -> Result<Vec<f64>> {
        match &self.tau_grid {
            Some(s) => parse_tau_grid(s),
            None => Ok(default_tau_grid()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encodings.is_empty() || self.detectors.is_empty() {
            return Err(Error::Config("at least one encoding and one detector are required".into()));
        }
        self.tau_grid()?;
        let d = &self.dataset;
        match d.source {
            SourceKind::Generate => {
                if d.path.is_none() && d.rows == 0 {
                    return Err(Error::Config("dataset.rows must be >= 1".into()));
                }
                d.anomalies.validate()?;
            }
            SourceKind::Csv => {
                if d.path.is_none() {
                    return Err(Error::Config("dataset.path is required for a csv source".into()));
                }
            }
        }
        if let Some(p) = &d.path {
            if !p.exists() {
                return Err(Error::Config(format!("dataset file {} does not exist", p.display())));
            }
        }
        let p = &self.detector;
        if !(5..=25).contains(&p.som.grid) {
            log::warn!("SOM grid {} is outside the usual 5..=25 range", p.som.grid);
        }
        p.ae.validate()?;
        if p.iforest.trees == 0 || p.lof.k == 0 || p.som.grid == 0 {
            return Err(Error::Config("detector sizes (trees, k, grid) must be >= 1".into()));
        }
        Ok(())
    }
}
