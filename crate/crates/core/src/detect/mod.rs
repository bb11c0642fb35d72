//! Unsupervised anomaly detectors. Every detector orients its scores so
//! that higher means more anomalous.

mod ae;
mod iforest;
mod lof;
mod modelfile;
mod som;
mod zscore;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use ae::{ae_score, ae_train, AeModel, AeParams, Dense, Gradients};
pub use iforest::{average_path_length, iforest_fit, iforest_score, IForestParams, IsolationForestModel, IsolationTree, Node};
pub use lof::{lof_fit, lof_score, LofModel, LofParams, LRD_DENOMINATOR_CAP};
pub use modelfile::{BlockInfo, ModelFile};
pub use som::{som_train, som_score, SomMap, SomParams};
pub use zscore::{zscore_fit, zscore_score, ZScoreModel};

use crate::encode::EmbeddingTable;
use crate::{Error, Result};

/// Per-row anomaly scores, all finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()), "non-finite anomaly score");
        ScoreVector(values)
    }

    /// Rejects non-finite values instead of asserting.
    pub fn try_new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("score {i} is not finite ({})", values[i])));
        }
        Ok(ScoreVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Detector input: a dense matrix, or category indices plus numerical
/// columns for a model with its own embedding layer.
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Dense(ArrayView2<'a, f64>),
    Embedded {
        indices: ArrayView2<'a, usize>,
        numeric: ArrayView2<'a, f64>,
    },
}

impl Input<'_> {
    pub fn nrows(&self) -> usize {
        match self {
            Input::Dense(x) => x.nrows(),
            Input::Embedded { indices, .. } => indices.nrows(),
        }
    }

    fn dense(&self, detector: DetectorKind) -> Result<ArrayView2<'_, f64>> {
        match self {
            Input::Dense(x) => Ok(*x),
            Input::Embedded { .. } => Err(Error::InvalidInput(format!(
                "{detector} expects a dense matrix; expand embeddings first"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Som,
    #[serde(rename = "iforest")]
    IForest,
    Lof,
    Ae,
    #[serde(rename = "zscore")]
    ZScore,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::Som,
        DetectorKind::IForest,
        DetectorKind::Lof,
        DetectorKind::Ae,
        DetectorKind::ZScore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Som => "som",
            DetectorKind::IForest => "iforest",
            DetectorKind::Lof => "lof",
            DetectorKind::Ae => "ae",
            DetectorKind::ZScore => "zscore",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown detector {s:?}; expected one of som, iforest, lof, ae, zscore")))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    pub som: SomParams,
    pub iforest: IForestParams,
    pub lof: LofParams,
    pub ae: AeParams,
    /// Matrix column scored by the z-score detector; resolved from a column
    /// name by the caller.
    #[serde(skip)]
    pub zscore_column: usize,
}

impl DetectorParams {
    /// Copies `seed` into every seeded detector.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.som.seed = seed;
        self.iforest.seed = seed;
        self.ae.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Som(SomMap),
    IForest(IsolationForestModel),
    Lof(LofModel),
    Ae(AeModel),
    ZScore(ZScoreModel),
}

impl Model {
    /// Fits `kind` on `input`. Only the autoencoder accepts
    /// [`Input::Embedded`], with `embedding` as its initial tables.
    pub fn fit(kind: DetectorKind, input: &Input, params: &DetectorParams, embedding: Option<EmbeddingTable>) -> Result<Model> {
        Ok(match kind {
            DetectorKind::Som => Model::Som(som_train(input.dense(kind)?, &params.som)?),
            DetectorKind::IForest => Model::IForest(iforest_fit(input.dense(kind)?, &params.iforest)?),
            DetectorKind::Lof => {
                let x = input.dense(kind)?;
                let k = params.lof.k.min(x.nrows().saturating_sub(1));
                if k != params.lof.k {
                    log::warn!("lof: k={} reduced to {k} for {} training rows", params.lof.k, x.nrows());
                }
                Model::Lof(lof_fit(x, k)?)
            }
            DetectorKind::Ae => Model::Ae(ae_train(input, &params.ae, embedding)?),
            DetectorKind::ZScore => Model::ZScore(zscore_fit(input.dense(kind)?, params.zscore_column)?),
        })
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            Model::Som(_) => DetectorKind::Som,
            Model::IForest(_) => DetectorKind::IForest,
            Model::Lof(_) => DetectorKind::Lof,
            Model::Ae(_) => DetectorKind::Ae,
            Model::ZScore(_) => DetectorKind::ZScore,
        }
    }

    pub fn score(&self, input: &Input) -> Result<ScoreVector> {
        let kind = self.kind();
        match self {
            Model::Som(m) => som_score(m, input.dense(kind)?),
            Model::IForest(m) => iforest_score(m, input.dense(kind)?),
            Model::Lof(m) => lof_score(m, input.dense(kind)?),
            Model::Ae(m) => ae_score(m, input),
            Model::ZScore(m) => zscore_score(m, input.dense(kind)?),
        }
    }

    pub fn to_file(&self) -> Result<ModelFile> {
        match self {
            Model::Som(m) => m.to_file(),
            Model::IForest(m) => m.to_file(),
            Model::Lof(m) => m.to_file(),
            Model::Ae(m) => m.to_file(),
            Model::ZScore(m) => m.to_file(),
        }
    }

    pub fn from_file(f: &ModelFile) -> Result<Model> {
        let kind: DetectorKind = f.kind.parse().map_err(|_| Error::ModelFormat(format!("unknown model kind {:?}", f.kind)))?;
        Ok(match kind {
            DetectorKind::Som => Model::Som(SomMap::from_file(f)?),
            DetectorKind::IForest => Model::IForest(IsolationForestModel::from_file(f)?),
            DetectorKind::Lof => Model::Lof(LofModel::from_file(f)?),
            DetectorKind::Ae => Model::Ae(AeModel::from_file(f)?),
            DetectorKind::ZScore => Model::ZScore(ZScoreModel::from_file(f)?),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_file()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Model> {
        Model::from_file(&ModelFile::load(path)?)
    }
}
