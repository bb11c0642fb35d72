//! Self-organizing map trained by competitive learning; the anomaly score of
//! a sample is its quantization error (distance to the best matching unit).

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::modelfile::ModelFile;
use super::{check_dim, ScoreVector};
use crate::rng::keyed;
use crate::{Error, Result};

/// Neighborhood weights below this are skipped.
const NEIGHBORHOOD_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SomParams {
    /// Side length of the square grid.
    pub grid: usize,
    pub learning_rate: f64,
    pub sigma: f64,
    /// Number of batches; also the decay time constant.
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SomParams {
    fn default() -> Self {
        SomParams {
            grid: 10,
            learning_rate: 0.5,
            sigma: 0.5,
            iterations: 200,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl SomParams {
    /// Learning rate and radius at batch `t`: `x0 * exp(-t / T)`.
    pub fn schedule(&self, t: usize) -> (f64, f64) {
        let decay = (-(t as f64) / self.iterations.max(1) as f64).exp();
        (self.learning_rate * decay, self.sigma * decay)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SomMap {
    pub params: SomParams,
    /// `(grid * grid) x d`, neuron `(r, c)` at row `r * grid + c`.
    pub weights: Array2<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl SomMap {
    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Index of the nearest neuron (lowest index on ties) and its squared
    /// distance.
    pub fn bmu(&self, x: ArrayView1<f64>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, w) in self.weights.rows().into_iter().enumerate() {
            let d = sq_dist(x, w);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    pub fn to_file(&self) -> Result<ModelFile> {
        let mut f = ModelFile::new("som", serde_json::to_value(&self.params)?);
        let (n, d) = self.weights.dim();
        f.push("weights", &[n, d], self.weights.iter().copied().collect());
        Ok(f)
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        Ok(SomMap {
            params: f.meta()?,
            weights: f.block_2d("weights")?,
        })
    }
}

pub fn som_train(data: ArrayView2<f64>, params: &SomParams) -> Result<SomMap> {
    let (n, d) = data.dim();
    if n == 0 || d == 0 {
        return Err(Error::InvalidInput("SOM needs a non-empty matrix".into()));
    }
    if params.grid == 0 || params.batch_size == 0 {
        return Err(Error::Config("SOM grid and batch size must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&params.learning_rate) || params.sigma < 0.0 {
        return Err(Error::Config("SOM learning rate must lie in [0, 1] and sigma >= 0".into()));
    }
    let g = params.grid;
    let neurons = g * g;
    let lo: Vec<f64> = (0..d).map(|j| data.column(j).iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..d).map(|j| data.column(j).iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut weights = Array2::zeros((neurons, d));
    for i in 0..neurons {
        let mut rng = keyed(params.seed, i as u64, "som_init");
        for j in 0..d {
            weights[[i, j]] = if hi[j] > lo[j] { rng.random_range(lo[j]..hi[j]) } else { lo[j] };
        }
    }
    let mut map = SomMap {
        params: params.clone(),
        weights,
    };
    for t in 0..params.iterations {
        let (alpha, sigma) = params.schedule(t);
        if alpha == 0.0 {
            continue;
        }
        let mut rng = keyed(params.seed, t as u64, "som_batch");
        for _ in 0..params.batch_size {
            let x = data.row(rng.random_range(0..n));
            let (b, _) = map.bmu(x);
            let (br, bc) = ((b / g) as f64, (b % g) as f64);
            for i in 0..neurons {
                let (r, c) = ((i / g) as f64, (i % g) as f64);
                let grid_d2 = (r - br) * (r - br) + (c - bc) * (c - bc);
                let h = if i == b {
                    1.0
                } else if sigma > 0.0 {
                    (-grid_d2 / (2.0 * sigma * sigma)).exp()
                } else {
                    0.0
                };
                if h < NEIGHBORHOOD_CUTOFF {
                    continue;
                }
                let step = alpha * h;
                let mut w = map.weights.row_mut(i);
                w.zip_mut_with(&x, |wv, xv| *wv += step * (xv - *wv));
            }
        }
    }
    if map.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Diverged("SOM weights became non-finite".into()));
    }
    Ok(map)
}

/// Quantization error: Euclidean distance to the best matching unit.
pub fn som_score(map: &SomMap, data: ArrayView2<f64>) -> Result<ScoreVector> {
    check_dim(map.dim(), data.ncols())?;
    Ok(ScoreVector::new(data.rows().into_iter().map(|x| map.bmu(x).1.sqrt()).collect()))
}
