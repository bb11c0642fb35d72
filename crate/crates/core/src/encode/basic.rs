//! Label and one-hot encodings plus the binary matrix used by GEL.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::matrix::{ColumnOrigin, EncodedMatrix, Provenance};
use super::schema::Schema;
use crate::table::Table;
use crate::{Error, Result};

/// Standardized numerical block in schema order.
pub(crate) fn numeric_block(table: &Table, schema: &Schema) -> Result<(Array2<f64>, Vec<Provenance>)> {
    let pos = schema.locate(table)?;
    let cols: Vec<(usize, &super::ColumnSchema)> = schema
        .columns
        .iter()
        .zip(&pos)
        .filter(|(c, _)| !c.kind.is_categorical())
        .map(|(c, p)| (*p, c))
        .collect();
    let mut out = Array2::zeros((table.len(), cols.len()));
    for (i, row) in table.rows.iter().enumerate() {
        for (j, (p, c)) in cols.iter().enumerate() {
            out[[i, j]] = c.standardize(&row[*p]);
        }
    }
    let prov = cols
        .iter()
        .map(|(_, c)| Provenance::new(&c.name, ColumnOrigin::Numerical, None))
        .collect();
    Ok((out, prov))
}

/// Categorical vocabulary indices (`n x #categorical`); unseen categories get
/// the reserved slot equal to the vocabulary size.
pub fn category_indices(table: &Table, schema: &Schema) -> Result<Array2<usize>> {
    let pos = schema.locate(table)?;
    let cols: Vec<(usize, &super::ColumnSchema)> = schema
        .columns
        .iter()
        .zip(&pos)
        .filter(|(c, _)| c.kind.is_categorical())
        .map(|(c, p)| (*p, c))
        .collect();
    let mut out = Array2::zeros((table.len(), cols.len()));
    for (i, row) in table.rows.iter().enumerate() {
        for (j, (p, c)) in cols.iter().enumerate() {
            out[[i, j]] = c.index_of(&row[*p]).unwrap_or(c.cardinality());
        }
    }
    Ok(out)
}

pub(crate) fn hstack(blocks: Vec<(Array2<f64>, Vec<Provenance>)>, rows: usize) -> EncodedMatrix {
    let width: usize = blocks.iter().map(|(b, _)| b.ncols()).sum();
    let mut values = Array2::zeros((rows, width));
    let mut provenance = Vec::with_capacity(width);
    let mut at = 0;
    for (block, prov) in blocks {
        let w = block.ncols();
        values.slice_mut(ndarray::s![.., at..at + w]).assign(&block);
        provenance.extend(prov);
        at += w;
    }
    EncodedMatrix::new(values, provenance)
}

/// One real column per categorical attribute holding its vocabulary index,
/// followed by the standardized numerical columns.
pub fn encode_label(table: &Table, schema: &Schema) -> Result<EncodedMatrix> {
    let idx = category_indices(table, schema)?;
    let cat = idx.mapv(|v| v as f64);
    let prov = schema
        .categorical()
        .map(|c| Provenance::new(&c.name, ColumnOrigin::Label, None))
        .collect();
    let num = numeric_block(table, schema)?;
    Ok(hstack(vec![(cat, prov), num], table.len()))
}

fn one_hot_block(table: &Table, schema: &Schema) -> Result<(Array2<f64>, Vec<Provenance>)> {
    let idx = category_indices(table, schema)?;
    let cats: Vec<&super::ColumnSchema> = schema.categorical().collect();
    let mut offsets = Vec::with_capacity(cats.len());
    let mut width = 0;
    for c in &cats {
        offsets.push(width);
        width += c.cardinality();
    }
    let mut out = Array2::zeros((table.len(), width));
    for i in 0..table.len() {
        for (j, c) in cats.iter().enumerate() {
            let k = idx[[i, j]];
            if k < c.cardinality() {
                out[[i, offsets[j] + k]] = 1.0;
            }
        }
    }
    let prov = cats
        .iter()
        .flat_map(|c| {
            c.vocabulary
                .iter()
                .map(|v| Provenance::new(&c.name, ColumnOrigin::OneHot, Some(v.clone())))
        })
        .collect();
    Ok((out, prov))
}

/// Indicator block per categorical attribute (all zeros for an unseen
/// category), followed by the standardized numerical columns.
pub fn encode_one_hot(table: &Table, schema: &Schema) -> Result<EncodedMatrix> {
    let block = one_hot_block(table, schema)?;
    let num = numeric_block(table, schema)?;
    Ok(hstack(vec![block, num], table.len()))
}

/// Column layout of a binary matrix: categorical one-hot blocks, optionally
/// followed by quantile-bin indicators of numerical columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binarizer {
    /// Upper-inclusive bin edges per numerical column; empty when numerical
    /// columns are left out of the binary matrix.
    pub numeric_edges: Vec<(String, Vec<f64>)>,
    pub include_numeric: bool,
}

impl Binarizer {
    /// Fits quantile bin edges on `table`. Edges at or above a column's
    /// maximum are dropped, so a constant column yields one indicator.
    pub fn fit(table: &Table, schema: &Schema, bins: usize, include_numeric: bool) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidInput("bins must be >= 2".into()));
        }
        let mut numeric_edges = Vec::new();
        if include_numeric {
            let pos = schema.locate(table)?;
            for (c, p) in schema.columns.iter().zip(pos) {
                if c.kind.is_categorical() {
                    continue;
                }
                let mut vals: Vec<f64> = table
                    .column(p)
                    .filter_map(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .collect();
                vals.sort_by(f64::total_cmp);
                let n = vals.len();
                let max = vals.last().copied().unwrap_or(0.0);
                let mut edges: Vec<f64> = (1..bins)
                    .map(|j| {
                        let rank = (j * n).div_ceil(bins).max(1);
                        vals[rank - 1]
                    })
                    .filter(|e| *e < max)
                    .collect();
                edges.dedup();
                if edges.is_empty() {
                    log::warn!("numerical column {:?} is constant; binarized as a single indicator", c.name);
                }
                numeric_edges.push((c.name.clone(), edges));
            }
        }
        Ok(Binarizer {
            numeric_edges,
            include_numeric,
        })
    }

    pub fn width(&self, schema: &Schema) -> usize {
        schema.total_cardinality()
            + self
                .numeric_edges
                .iter()
                .map(|(_, e)| e.len() + 1)
                .sum::<usize>()
    }

    pub fn transform(&self, table: &Table, schema: &Schema) -> Result<(Array2<f64>, Vec<Provenance>)> {
        let (mut w, mut prov) = one_hot_block(table, schema)?;
        if !self.numeric_edges.is_empty() {
            let extra: usize = self.numeric_edges.iter().map(|(_, e)| e.len() + 1).sum();
            let base = w.ncols();
            let mut full = Array2::zeros((table.len(), base + extra));
            full.slice_mut(ndarray::s![.., ..base]).assign(&w);
            let mut at = base;
            for (name, edges) in &self.numeric_edges {
                let p = table
                    .column_index(name)
                    .ok_or_else(|| Error::MissingColumn(name.clone()))?;
                let col = schema.columns.iter().find(|c| &c.name == name).expect("schema column");
                for (i, row) in table.rows.iter().enumerate() {
                    let x = row[p].trim().parse::<f64>().ok().filter(|v| v.is_finite()).unwrap_or(col.mean);
                    let bin = edges.iter().take_while(|e| x > **e).count();
                    full[[i, at + bin]] = 1.0;
                }
                for b in 0..=edges.len() {
                    prov.push(Provenance::new(name, ColumnOrigin::Bin, Some(b.to_string())));
                }
                at += edges.len() + 1;
            }
            w = full;
        }
        Ok((w, prov))
    }
}

/// Binary matrix with categorical one-hot blocks and `bins` quantile
/// indicators per numerical column, fitted on `table` itself.
pub fn binarize(table: &Table, schema: &Schema, bins: usize) -> Result<Array2<f64>> {
    let b = Binarizer::fit(table, schema, bins, true)?;
    Ok(b.transform(table, schema)?.0)
}
