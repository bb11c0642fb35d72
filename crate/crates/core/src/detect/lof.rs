//! Local Outlier Factor with Euclidean distance. Neighborhoods use set
//! semantics: every point tied with the k-th nearest distance is included,
//! so scores do not depend on the order of training rows.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::modelfile::ModelFile;
use super::{check_dim, ScoreVector};
use crate::{Error, Result};

/// Floor for the mean reachability distance; keeps the density of
/// duplicate-heavy neighborhoods finite.
pub const LRD_DENOMINATOR_CAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LofParams {
    pub k: usize,
}

impl Default for LofParams {
    fn default() -> Self {
        LofParams { k: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LofModel {
    pub k: usize,
    pub train: Array2<f64>,
    /// k-distance of every training point, among the other training points.
    pub k_distance: Vec<f64>,
    /// Local reachability density of every training point.
    pub lrd: Vec<f64>,
}

fn dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distances from `x` to every training row, skipping `exclude`.
fn distances(train: ArrayView2<f64>, x: ArrayView1<f64>, exclude: Option<usize>) -> Vec<(f64, usize)> {
    train
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, r)| (dist(x, r), i))
        .collect()
}

/// The k-distance and the k-distance neighborhood (all points within it).
fn neighborhood(mut d: Vec<(f64, usize)>, k: usize) -> (f64, Vec<(f64, usize)>) {
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let kd = d[k - 1].0;
    let end = d.partition_point(|p| p.0 <= kd);
    d.truncate(end);
    (kd, d)
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

impl LofModel {
    fn lrd_of(&self, nbrs: &[(f64, usize)]) -> f64 {
        let reach = sorted_sum(nbrs.iter().map(|&(d, o)| d.max(self.k_distance[o])).collect());
        1.0 / (reach / nbrs.len() as f64).max(LRD_DENOMINATOR_CAP)
    }

    fn lof_of(&self, nbrs: &[(f64, usize)]) -> f64 {
        let own = self.lrd_of(nbrs);
        let ratio = sorted_sum(nbrs.iter().map(|&(_, o)| self.lrd[o]).collect());
        ratio / nbrs.len() as f64 / own
    }

    /// LOF of each training point with itself excluded from its neighborhood.
    pub fn training_scores(&self) -> ScoreVector {
        let t = self.train.view();
        ScoreVector::new(
            (0..t.nrows())
                .map(|i| self.lof_of(&neighborhood(distances(t, t.row(i), Some(i)), self.k).1))
                .collect(),
        )
    }

    pub fn to_file(&self) -> Result<ModelFile> {
        let mut f = ModelFile::new("lof", serde_json::json!({ "k": self.k }));
        let (n, d) = self.train.dim();
        f.push("train", &[n, d], self.train.iter().copied().collect());
        Ok(f)
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        let p: LofParams = f.meta()?;
        lof_fit(f.block_2d("train")?.view(), p.k)
    }
}

pub fn lof_fit(data: ArrayView2<f64>, k: usize) -> Result<LofModel> {
    let n = data.nrows();
    if k == 0 || k >= n {
        return Err(Error::Config(format!("LOF needs 1 <= k < training rows, got k={k} with {n} rows")));
    }
    let hoods: Vec<(f64, Vec<(f64, usize)>)> =
        (0..n).map(|i| neighborhood(distances(data, data.row(i), Some(i)), k)).collect();
    let mut model = LofModel {
        k,
        train: data.to_owned(),
        k_distance: hoods.iter().map(|h| h.0).collect(),
        lrd: Vec::new(),
    };
    model.lrd = hoods.iter().map(|h| model.lrd_of(&h.1)).collect();
    Ok(model)
}

/// Scores query rows against the training neighbors only; a query equal to
/// a training row is not excluded.
pub fn lof_score(model: &LofModel, data: ArrayView2<f64>) -> Result<ScoreVector> {
    check_dim(model.train.ncols(), data.ncols())?;
    let t = model.train.view();
    Ok(ScoreVector::new(
        data.rows()
            .into_iter()
            .map(|x| model.lof_of(&neighborhood(distances(t, x, None), model.k).1))
            .collect(),
    ))
}
