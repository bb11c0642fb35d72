//! Single-column z-score baseline: `|x - mu| / sigma` with training
//! statistics.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::modelfile::ModelFile;
use super::ScoreVector;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreModel {
    pub column: usize,
    pub mean: f64,
    pub std: f64,
    pub dim: usize,
}

pub fn zscore_fit(data: ArrayView2<f64>, column: usize) -> Result<ZScoreModel> {
    let (n, d) = data.dim();
    if column >= d {
        return Err(Error::InvalidInput(format!("z-score column {column} out of range for width {d}")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("z-score needs at least one row".into()));
    }
    let col = data.column(column);
    let mean = col.sum() / n as f64;
    let std = (col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64).sqrt();
    if !(std > 0.0) {
        return Err(Error::DegenerateColumn(format!("#{column}")));
    }
    Ok(ZScoreModel { column, mean, std, dim: d })
}

pub fn zscore_score(model: &ZScoreModel, data: ArrayView2<f64>) -> Result<ScoreVector> {
    if model.column >= data.ncols() {
        return Err(Error::DimensionMismatch { expected: model.dim, actual: data.ncols() });
    }
    Ok(ScoreVector::new(
        data.column(model.column).iter().map(|x| (x - model.mean).abs() / model.std).collect(),
    ))
}

impl ZScoreModel {
    pub fn to_file(&self) -> Result<ModelFile> {
        Ok(ModelFile::new("zscore", serde_json::to_value(self)?))
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        f.meta()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mean_scores_zero_and_affine_invariance() {
        let data = array![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [10.0, 0.0]];
        let m = zscore_fit(data.view(), 0).unwrap();
        let at_mean = array![[4.0, 0.0]];
        assert_eq!(zscore_score(&m, at_mean.view()).unwrap().values()[0], 0.0);
        let a = zscore_score(&m, data.view()).unwrap();
        let scaled = data.mapv(|x| 3.0 * x - 7.0);
        let ms = zscore_fit(scaled.view(), 0).unwrap();
        let b = zscore_score(&ms, scaled.view()).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_variance_rejected() {
        let data = array![[1.0, 0.0], [2.0, 0.0]];
        assert!(matches!(zscore_fit(data.view(), 1), Err(Error::DegenerateColumn(_))));
        assert!(zscore_fit(data.view(), 2).is_err());
    }
}
