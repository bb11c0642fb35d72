//! Per-attribute embedding lookup tables.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::schema::Schema;
use crate::rng::keyed;
use crate::{Error, Result};

/// Initial weights are drawn from `[-INIT_SCALE, INIT_SCALE]`.
pub const INIT_SCALE: f64 = 0.05;
pub const MAX_EMBEDDING_DIM: usize = 50;

/// Embedding width for an attribute with `n` categories:
/// `min(50, ceil(n / 2))`, at least 1.
pub fn embedding_dim(n: usize) -> usize {
    n.div_ceil(2).clamp(1, MAX_EMBEDDING_DIM)
}

pub fn embedding_dims(schema: &Schema) -> Vec<usize> {
    schema.categorical().map(|c| embedding_dim(c.cardinality())).collect()
}

/// One `(n_j + 1) x d_j` table per categorical attribute. The last row of
/// each table is the reserved slot for categories unseen at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub columns: Vec<String>,
    pub dims: Vec<usize>,
    pub tables: Vec<Array2<f64>>,
}

impl EmbeddingTable {
    pub fn init(schema: &Schema, seed: u64) -> Self {
        let mut columns = Vec::new();
        let mut dims = Vec::new();
        let mut tables = Vec::new();
        for (j, c) in schema.categorical().enumerate() {
            let d = embedding_dim(c.cardinality());
            let mut rng = keyed(seed, j as u64, "embedding");
            let t = Array2::from_shape_simple_fn((c.cardinality() + 1, d), || {
                rng.random_range(-INIT_SCALE..=INIT_SCALE)
            });
            columns.push(c.name.clone());
            dims.push(d);
            tables.push(t);
        }
        EmbeddingTable {
            columns,
            dims,
            tables,
        }
    }

    pub fn width(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        self.dims
            .iter()
            .scan(0, |acc, d| {
                let at = *acc;
                *acc += d;
                Some(at)
            })
            .collect()
    }

    /// Concatenates the looked-up embedding of each categorical index, then
    /// the numerical features.
    pub fn embed_concat(&self, indices: &[usize], numeric: ArrayView1<f64>) -> Result<Array1<f64>> {
        if indices.len() != self.tables.len() {
            return Err(Error::DimensionMismatch {
                expected: self.tables.len(),
                actual: indices.len(),
            });
        }
        let mut out = Array1::zeros(self.width() + numeric.len());
        let mut at = 0;
        for (t, &i) in self.tables.iter().zip(indices) {
            let row = i.min(t.nrows() - 1);
            let d = t.ncols();
            out.slice_mut(ndarray::s![at..at + d]).assign(&t.row(row));
            at += d;
        }
        out.slice_mut(ndarray::s![at..]).assign(&numeric);
        Ok(out)
    }

    /// Applies [`Self::embed_concat`] to every row.
    pub fn expand(&self, indices: &Array2<usize>, numeric: &Array2<f64>) -> Result<Array2<f64>> {
        let n = indices.nrows();
        let mut out = Array2::zeros((n, self.width() + numeric.ncols()));
        for i in 0..n {
            let idx = indices.row(i).to_vec();
            out.row_mut(i).assign(&self.embed_concat(&idx, numeric.row(i))?);
        }
        Ok(out)
    }
}
