//! Categorical encodings: label, one-hot, GEL and embedding lookup.
//!
//! An encoder is fitted on training rows only (vocabularies, standardization
//! statistics, bin edges, GEL projection) and then applied unchanged to any
//! table with the same columns.

mod basic;
mod embedding;
mod gel;
mod matrix;
mod schema;

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use basic::{binarize, category_indices, encode_label, encode_one_hot, Binarizer};
pub use embedding::{embedding_dim, embedding_dims, EmbeddingTable, INIT_SCALE, MAX_EMBEDDING_DIM};
pub use gel::{feature_marginals, gel_fit, gel_transform, row_marginals, GelModel};
pub use matrix::{ColumnOrigin, EncodedMatrix, Provenance};
pub use schema::{fit_schema, ColumnKind, ColumnSchema, Schema};

use crate::table::{LabeledTable, Table};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Label,
    OneHot,
    Gel,
    Embedding,
}

impl Encoding {
    pub const ALL: [Encoding; 4] = [
        Encoding::Label,
        Encoding::OneHot,
        Encoding::Gel,
        Encoding::Embedding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Encoding::Label => "label",
            Encoding::OneHot => "onehot",
            Encoding::Gel => "gel",
            Encoding::Embedding => "embedding",
        }
    }
}

impl std::str::FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "label" | "l" => Ok(Encoding::Label),
            "onehot" | "one_hot" | "one-hot" | "o" => Ok(Encoding::OneHot),
            "gel" | "g" => Ok(Encoding::Gel),
            "embedding" | "e" => Ok(Encoding::Embedding),
            other => Err(Error::Config(format!("unknown encoding {other:?}"))),
        }
    }
}

impl std::fmt::Display for Encoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    /// GEL width; defaults to the number of categorical attributes.
    pub gel_k: Option<usize>,
    /// Quantile bins per numerical column when numerical columns enter the
    /// GEL binary matrix.
    pub bins: usize,
    /// Binarize numerical columns into the GEL input instead of appending
    /// them standardized.
    pub gel_include_numeric: bool,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            gel_k: None,
            bins: 10,
            gel_include_numeric: false,
            seed: 0,
        }
    }
}

const SIDECAR_FORMAT: &str = "auditbench-encoder";
const SIDECAR_VERSION: u32 = 1;

/// A fitted encoder; persisted as a JSON sidecar carrying a schema hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEncoder {
    pub format: String,
    pub version: u32,
    pub encoding: Encoding,
    pub schema_hash: String,
    pub schema: Schema,
    pub config: EncoderConfig,
    pub gel: Option<GelModel>,
    pub embedding: Option<EmbeddingTable>,
}

impl FittedEncoder {
    pub fn fit(
        encoding: Encoding,
        train: &Table,
        kinds: &[(String, ColumnKind)],
        config: &EncoderConfig,
    ) -> Result<Self> {
        let schema = fit_schema(train, kinds)?;
        let mut gel = None;
        let mut embedding = None;
        match encoding {
            Encoding::Label | Encoding::OneHot => {}
            Encoding::Gel => {
                let binarizer = Binarizer::fit(train, &schema, config.bins, config.gel_include_numeric)?;
                let (w, _) = binarizer.transform(train, &schema)?;
                let default_k = schema.n_categorical().max(1);
                let k = config.gel_k.unwrap_or(default_k).min(w.ncols());
                let mut model = gel_fit(w.view(), k)?;
                model.binarizer = Some(binarizer);
                gel = Some(model);
            }
            Encoding::Embedding => embedding = Some(EmbeddingTable::init(&schema, config.seed)),
        }
        Ok(FittedEncoder {
            format: SIDECAR_FORMAT.into(),
            version: SIDECAR_VERSION,
            encoding,
            schema_hash: schema.hash(),
            schema,
            config: config.clone(),
            gel,
            embedding,
        })
    }

    /// Encodes `table`. For [`Encoding::Embedding`] the result holds the
    /// categorical index columns and standardized numerical columns; use
    /// [`Self::expand_embeddings`] for the frozen-lookup vectors.
    pub fn transform(&self, table: &Table) -> Result<EncodedMatrix> {
        let schema = &self.schema;
        match self.encoding {
            Encoding::Label => encode_label(table, schema),
            Encoding::OneHot => encode_one_hot(table, schema),
            Encoding::Gel => {
                let model = self.gel.as_ref().ok_or_else(|| Error::Config("encoder has no GEL model".into()))?;
                let binarizer = model.binarizer.as_ref().ok_or_else(|| Error::Config("GEL model has no binarizer".into()))?;
                let (w, _) = binarizer.transform(table, schema)?;
                let f = gel_transform(w.view(), model)?;
                let prov = (0..model.k)
                    .map(|i| Provenance::new("gel", ColumnOrigin::Gel, Some(i.to_string())))
                    .collect();
                let mut blocks = vec![(f, prov)];
                if !binarizer.include_numeric {
                    blocks.push(basic::numeric_block(table, schema)?);
                }
                Ok(basic::hstack(blocks, table.len()))
            }
            Encoding::Embedding => {
                let idx = category_indices(table, schema)?.mapv(|v| v as f64);
                let prov = schema
                    .categorical()
                    .map(|c| Provenance::new(&c.name, ColumnOrigin::EmbeddingIndex, None))
                    .collect();
                let num = basic::numeric_block(table, schema)?;
                Ok(basic::hstack(vec![(idx, prov), num], table.len()))
            }
        }
    }

    pub fn transform_labeled(&self, data: &LabeledTable) -> Result<EncodedMatrix> {
        Ok(self.transform(&data.table)?.with_labels(data.labels.clone()))
    }

    /// Replaces embedding index columns with their (frozen) table rows.
    /// Matrices without index columns are returned unchanged.
    pub fn expand_embeddings(&self, m: &EncodedMatrix) -> Result<EncodedMatrix> {
        let Some(tables) = &self.embedding else {
            return Ok(m.clone());
        };
        let (indices, numeric, num_prov) = split_embedding_input(m)?;
        let values = tables.expand(&indices, &numeric)?;
        let mut provenance: Vec<Provenance> = tables
            .columns
            .iter()
            .zip(&tables.dims)
            .flat_map(|(c, d)| (0..*d).map(move |i| Provenance::new(c, ColumnOrigin::Embedding, Some(i.to_string()))))
            .collect();
        provenance.extend(num_prov);
        Ok(EncodedMatrix {
            values,
            provenance,
            labels: m.labels.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let enc: FittedEncoder = serde_json::from_slice(&bytes)?;
        if enc.format != SIDECAR_FORMAT || enc.version != SIDECAR_VERSION {
            return Err(Error::ModelFormat(format!(
                "{}: unsupported encoder sidecar {} v{}",
                path.display(),
                enc.format,
                enc.version
            )));
        }
        if enc.schema.hash() != enc.schema_hash {
            return Err(Error::ModelFormat(format!("{}: schema hash mismatch", path.display())));
        }
        Ok(enc)
    }
}

/// Splits an embedding-input matrix into categorical indices, numerical
/// values and the numerical provenance.
pub fn split_embedding_input(m: &EncodedMatrix) -> Result<(Array2<usize>, Array2<f64>, Vec<Provenance>)> {
    let cat: Vec<usize> = (0..m.ncols())
        .filter(|&j| m.provenance[j].origin == ColumnOrigin::EmbeddingIndex)
        .collect();
    let num: Vec<usize> = (0..m.ncols())
        .filter(|&j| m.provenance[j].origin != ColumnOrigin::EmbeddingIndex)
        .collect();
    let mut indices = Array2::zeros((m.nrows(), cat.len()));
    for (jj, &j) in cat.iter().enumerate() {
        for i in 0..m.nrows() {
            let v = m.values[[i, j]];
            if !(v >= 0.0 && v.fract() == 0.0) {
                return Err(Error::InvalidInput(format!("embedding index {v} is not a category index")));
            }
            indices[[i, jj]] = v as usize;
        }
    }
    let numeric = m.values.select(ndarray::Axis(1), &num);
    let prov = num.iter().map(|&j| m.provenance[j].clone()).collect();
    Ok((indices, numeric, prov))
}
