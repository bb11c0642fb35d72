//! Fully connected reconstruction autoencoder with hand-written
//! backpropagation, Adam, and an optional trainable embedding layer in front
//! of the first dense layer.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::modelfile::ModelFile;
use super::{Input, ScoreVector};
use crate::encode::EmbeddingTable;
use crate::rng::keyed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeParams {
    /// Hidden layer widths; the output layer always matches the input.
    pub hidden: Vec<usize>,
    pub negative_slope: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for AeParams {
    fn default() -> Self {
        AeParams {
            hidden: vec![64, 16, 4, 16, 64],
            negative_slope: 0.01,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 20,
            seed: 0,
        }
    }
}

impl AeParams {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("autoencoder epochs and batch size must be >= 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("autoencoder hidden widths must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("autoencoder learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `inputs x outputs`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Activations kept from a forward pass: `z[l]` pre-activation of layer
/// `l`, `a[l]` its input (`a[0]` is the network input).
struct Trace {
    a: Vec<Array2<f64>>,
    z: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
    /// Per table: `(row, gradient)` for each row used by the batch, sorted by
    /// row.
    pub embedding: Vec<Vec<(usize, Array1<f64>)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeModel {
    pub params: AeParams,
    pub layers: Vec<Dense>,
    pub embedding: Option<EmbeddingTable>,
    /// Numerical columns fed after the embeddings (0 without embeddings).
    pub numeric_width: usize,
    /// Mean training loss per epoch.
    pub history: Vec<f64>,
}

impl AeModel {
    /// Xavier-uniform weights and zero biases.
    pub fn init(input_dim: usize, params: &AeParams, embedding: Option<EmbeddingTable>, numeric_width: usize) -> Result<Self> {
        params.validate()?;
        if input_dim == 0 {
            return Err(Error::InvalidInput("autoencoder needs at least one input column".into()));
        }
        let mut widths = vec![input_dim];
        widths.extend(&params.hidden);
        widths.push(input_dim);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, io)| {
                let limit = (6.0 / (io[0] + io[1]) as f64).sqrt();
                let mut rng = keyed(params.seed, l as u64, "ae_init");
                Dense {
                    w: Array2::from_shape_simple_fn((io[0], io[1]), || rng.random_range(-limit..=limit)),
                    b: Array1::zeros(io[1]),
                }
            })
            .collect();
        Ok(AeModel {
            params: params.clone(),
            layers,
            embedding,
            numeric_width,
            history: Vec::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    fn check_input(&self, input: &Input) -> Result<()> {
        let width = match (input, &self.embedding) {
            (Input::Dense(x), None) => x.ncols(),
            (Input::Embedded { indices, numeric }, Some(e)) => {
                if indices.ncols() != e.tables.len() {
                    return Err(Error::DimensionMismatch { expected: e.tables.len(), actual: indices.ncols() });
                }
                if indices.nrows() != numeric.nrows() {
                    return Err(Error::InvalidInput("index and numeric blocks differ in row count".into()));
                }
                e.width() + numeric.ncols()
            }
            (Input::Dense(_), Some(_)) => {
                return Err(Error::InvalidInput("model has an embedding layer; pass category indices".into()))
            }
            (Input::Embedded { .. }, None) => {
                return Err(Error::InvalidInput("model has no embedding layer".into()))
            }
        };
        if width != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), actual: width });
        }
        Ok(())
    }

    /// The network input for the given rows, after the embedding lookup.
    pub fn represent(&self, input: &Input, rows: &[usize]) -> Result<Array2<f64>> {
        self.check_input(input)?;
        Ok(match (input, &self.embedding) {
            (Input::Dense(x), _) => x.select(Axis(0), rows),
            (Input::Embedded { indices, numeric }, Some(e)) => {
                let mut out = Array2::zeros((rows.len(), self.input_dim()));
                for (k, &r) in rows.iter().enumerate() {
                    let idx = indices.row(r).to_vec();
                    out.row_mut(k).assign(&e.embed_concat(&idx, numeric.row(r))?);
                }
                out
            }
            _ => unreachable!("checked above"),
        })
    }

    fn forward_trace(&self, x: Array2<f64>) -> Trace {
        let slope = self.params.negative_slope;
        let last = self.layers.len() - 1;
        let mut a = vec![x];
        let mut z = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let pre = a[l].dot(&layer.w) + &layer.b;
            if l < last {
                a.push(pre.mapv(|v| if v > 0.0 { v } else { slope * v }));
            }
            z.push(pre);
        }
        Trace { a, z }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_trace(x.to_owned()).z.pop().expect("at least one layer")
    }

    /// Mean squared reconstruction error over the batch and its gradient.
    /// The reconstruction target is the embedded input itself, so embedding
    /// rows receive gradient from both the input and the target side.
    pub fn loss_and_gradients(&self, input: &Input, rows: &[usize]) -> Result<(f64, Gradients)> {
        let x = self.represent(input, rows)?;
        let (bsz, d) = x.dim();
        let trace = self.forward_trace(x);
        let x = &trace.a[0];
        let y = trace.z.last().expect("at least one layer");
        let diff = y - x;
        let scale = 1.0 / (bsz * d) as f64;
        let loss = diff.iter().map(|v| v * v).sum::<f64>() * scale;
        let dy = diff.mapv(|v| 2.0 * v * scale);

        let slope = self.params.negative_slope;
        let last = self.layers.len() - 1;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = dy.clone();
        for l in (0..=last).rev() {
            if l < last {
                Zip::from(&mut delta).and(&trace.z[l]).for_each(|g, &z| {
                    if z <= 0.0 {
                        *g *= slope;
                    }
                });
            }
            let gw = trace.a[l].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Dense { w: gw, b: gb });
            if l > 0 || self.embedding.is_some() {
                delta = delta.dot(&self.layers[l].w.t());
            }
        }
        grads.reverse();

        let mut embedding = Vec::new();
        if let (Some(e), Input::Embedded { indices, .. }) = (&self.embedding, input) {
            let dx = delta - &dy;
            for (j, (t, off)) in e.tables.iter().zip(e.offsets()).enumerate() {
                let dj = t.ncols();
                let mut acc: std::collections::BTreeMap<usize, Array1<f64>> = Default::default();
                for (k, &r) in rows.iter().enumerate() {
                    let row = indices[[r, j]].min(t.nrows() - 1);
                    let g = dx.slice(s![k, off..off + dj]);
                    acc.entry(row).and_modify(|a| *a += &g).or_insert_with(|| g.to_owned());
                }
                embedding.push(acc.into_iter().collect());
            }
        }
        Ok((loss, Gradients { layers: grads, embedding }))
    }

    /// All trainable parameters: per layer `W` then `b` (row-major), then
    /// every embedding table.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        if let Some(e) = &self.embedding {
            for t in &e.tables {
                out.extend(t.iter());
            }
        }
        out
    }

    pub fn set_flat_params(&mut self, p: &[f64]) -> Result<()> {
        let expected = self.flat_params().len();
        if p.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: p.len() });
        }
        let mut it = p.iter().copied();
        for l in &mut self.layers {
            l.w.iter_mut().chain(l.b.iter_mut()).for_each(|v| *v = it.next().unwrap());
        }
        if let Some(e) = &mut self.embedding {
            for t in &mut e.tables {
                t.iter_mut().for_each(|v| *v = it.next().unwrap());
            }
        }
        Ok(())
    }

    /// Gradients laid out like [`Self::flat_params`], zero for embedding
    /// rows the batch did not touch.
    pub fn flat_gradients(&self, g: &Gradients) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &g.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        if let Some(e) = &self.embedding {
            for (j, t) in e.tables.iter().enumerate() {
                let mut dense = Array2::<f64>::zeros(t.dim());
                if let Some(rows) = g.embedding.get(j) {
                    for (r, v) in rows {
                        dense.row_mut(*r).assign(v);
                    }
                }
                out.extend(dense.iter());
            }
        }
        out
    }

    /// Squared L2 reconstruction error per row.
    pub fn reconstruction_errors(&self, input: &Input) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let n = input.nrows();
        let mut out = Vec::with_capacity(n);
        let all: Vec<usize> = (0..n).collect();
        for chunk in all.chunks(1024) {
            let x = self.represent(input, chunk)?;
            let y = self.forward(x.view());
            out.extend((&y - &x).rows().into_iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()));
        }
        Ok(out)
    }

    pub fn to_file(&self) -> Result<ModelFile> {
        let meta = serde_json::json!({
            "params": self.params,
            "numeric_width": self.numeric_width,
            "history": self.history,
            "embedding_columns": self.embedding.as_ref().map(|e| &e.columns),
        });
        let mut f = ModelFile::new("ae", meta);
        for (l, layer) in self.layers.iter().enumerate() {
            f.push(&format!("w{l}"), &[layer.w.nrows(), layer.w.ncols()], layer.w.iter().copied().collect());
            f.push(&format!("b{l}"), &[layer.b.len()], layer.b.to_vec());
        }
        if let Some(e) = &self.embedding {
            for (j, t) in e.tables.iter().enumerate() {
                f.push(&format!("embedding{j}"), &[t.nrows(), t.ncols()], t.iter().copied().collect());
            }
        }
        Ok(f)
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        #[derive(Deserialize)]
        struct Meta {
            params: AeParams,
            numeric_width: usize,
            history: Vec<f64>,
            embedding_columns: Option<Vec<String>>,
        }
        let meta: Meta = f.meta()?;
        let mut layers = Vec::new();
        for l in 0..=meta.params.hidden.len() {
            let w = f.block_2d(&format!("w{l}"))?;
            let b = Array1::from(f.block(&format!("b{l}"))?.1.to_vec());
            if b.len() != w.ncols() {
                return Err(Error::ModelFormat(format!("layer {l} bias length {} != width {}", b.len(), w.ncols())));
            }
            layers.push(Dense { w, b });
        }
        let embedding = match meta.embedding_columns {
            Some(columns) => {
                let tables: Vec<Array2<f64>> = (0..columns.len())
                    .map(|j| f.block_2d(&format!("embedding{j}")))
                    .collect::<Result<_>>()?;
                Some(EmbeddingTable {
                    dims: tables.iter().map(|t| t.ncols()).collect(),
                    columns,
                    tables,
                })
            }
            None => None,
        };
        Ok(AeModel {
            params: meta.params,
            layers,
            embedding,
            numeric_width: meta.numeric_width,
            history: meta.history,
        })
    }
}

/// Adam moments; embedding rows are updated lazily, only when a batch uses
/// them, with the global step count for bias correction.
struct Adam {
    step: i32,
    layers: Vec<(Dense, Dense)>,
    tables: Vec<(Array2<f64>, Array2<f64>)>,
}

impl Adam {
    fn new(model: &AeModel) -> Self {
        let zero = |l: &Dense| Dense { w: Array2::zeros(l.w.dim()), b: Array1::zeros(l.b.len()) };
        Adam {
            step: 0,
            layers: model.layers.iter().map(|l| (zero(l), zero(l))).collect(),
            tables: model
                .embedding
                .iter()
                .flat_map(|e| e.tables.iter())
                .map(|t| (Array2::zeros(t.dim()), Array2::zeros(t.dim())))
                .collect(),
        }
    }

    fn apply(&mut self, model: &mut AeModel, g: &Gradients) {
        let p = model.params.clone();
        self.step += 1;
        let c1 = 1.0 - p.beta1.powi(self.step);
        let c2 = 1.0 - p.beta2.powi(self.step);
        let update = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = p.beta1 * *m + (1.0 - p.beta1) * g;
            *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
            *w -= p.learning_rate * (*m / c1) / ((*v / c2).sqrt() + p.epsilon);
        };
        for ((layer, (m, v)), gl) in model.layers.iter_mut().zip(&mut self.layers).zip(&g.layers) {
            Zip::from(&mut layer.w).and(&mut m.w).and(&mut v.w).and(&gl.w).for_each(|w, m, v, &g| update(w, m, v, g));
            Zip::from(&mut layer.b).and(&mut m.b).and(&mut v.b).and(&gl.b).for_each(|w, m, v, &g| update(w, m, v, g));
        }
        if let Some(e) = &mut model.embedding {
            for ((t, (m, v)), rows) in e.tables.iter_mut().zip(&mut self.tables).zip(&g.embedding) {
                for (r, gr) in rows {
                    Zip::from(t.row_mut(*r))
                        .and(m.row_mut(*r))
                        .and(v.row_mut(*r))
                        .and(gr)
                        .for_each(|w, m, v, &g| update(w, m, v, g));
                }
            }
        }
    }
}

/// Trains on every row of `input`. With embeddings, `embedding` holds the
/// initial tables and `input` must be [`Input::Embedded`].
pub fn ae_train(input: &Input, params: &AeParams, embedding: Option<EmbeddingTable>) -> Result<AeModel> {
    let n = input.nrows();
    if n == 0 {
        return Err(Error::InvalidInput("autoencoder needs at least one training row".into()));
    }
    let (dim, numeric_width) = match (input, &embedding) {
        (Input::Dense(x), _) => (x.ncols(), 0),
        (Input::Embedded { numeric, .. }, Some(e)) => (e.width() + numeric.ncols(), numeric.ncols()),
        (Input::Embedded { .. }, None) => {
            return Err(Error::InvalidInput("category indices given without embedding tables".into()))
        }
    };
    let mut model = AeModel::init(dim, params, embedding, numeric_width)?;
    model.check_input(input)?;
    let mut adam = Adam::new(&model);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..params.epochs {
        order.sort_unstable();
        order.shuffle(&mut keyed(params.seed, epoch as u64, "ae_shuffle"));
        let mut total = 0.0;
        for batch in order.chunks(params.batch_size) {
            let (loss, g) = model.loss_and_gradients(input, batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "autoencoder loss became {loss} in epoch {epoch}; lower the learning rate or standardize inputs"
                )));
            }
            total += loss * batch.len() as f64;
            adam.apply(&mut model, &g);
        }
        model.history.push(total / n as f64);
        log::debug!("ae epoch {epoch}: loss {:.6}", total / n as f64);
    }
    Ok(model)
}

pub fn ae_score(model: &AeModel, input: &Input) -> Result<ScoreVector> {
    Ok(ScoreVector::new(model.reconstruction_errors(input)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    fn blob(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = keyed(seed, 0, "blob");
        Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut rng))
    }

    #[test]
    fn zero_input_zero_loss() {
        let x = Array2::zeros((8, 5));
        let m = AeModel::init(5, &AeParams::default(), None, 0).unwrap();
        let (loss, _) = m.loss_and_gradients(&Input::Dense(x.view()), &(0..8).collect::<Vec<_>>()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(m.forward(x.view()).dim(), (8, 5));
    }

    #[test]
    fn loss_decreases() {
        let x = blob(100, 6, 1);
        let p = AeParams { epochs: 50, batch_size: 16, seed: 2, ..AeParams::default() };
        let m = ae_train(&Input::Dense(x.view()), &p, None).unwrap();
        assert_eq!(m.history.len(), 50);
        assert!(m.history.iter().all(|l| l.is_finite()));
        assert!(m.history[49] < m.history[0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = blob(7, 4, 3);
        let p = AeParams { hidden: vec![3, 2], seed: 5, ..AeParams::default() };
        let mut m = AeModel::init(4, &p, None, 0).unwrap();
        let input = Input::Dense(x.view());
        let rows: Vec<usize> = (0..7).collect();
        let (_, g) = m.loss_and_gradients(&input, &rows).unwrap();
        let analytic = m.flat_gradients(&g);
        let base = m.flat_params();
        for i in 0..base.len() {
            let mut q = base.clone();
            q[i] += 1e-5;
            m.set_flat_params(&q).unwrap();
            let up = m.loss_and_gradients(&input, &rows).unwrap().0;
            q[i] -= 2e-5;
            m.set_flat_params(&q).unwrap();
            let down = m.loss_and_gradients(&input, &rows).unwrap().0;
            let fd = (up - down) / 2e-5;
            assert!((fd - analytic[i]).abs() <= 1e-6 + 1e-4 * fd.abs().max(analytic[i].abs()), "param {i}: {fd} vs {}", analytic[i]);
        }
    }

    #[test]
    fn embedding_gradient_is_sparse() {
        let tables = vec![Array2::from_elem((4, 2), 0.1), Array2::from_elem((3, 1), -0.2)];
        let emb = EmbeddingTable { columns: vec!["a".into(), "b".into()], dims: vec![2, 1], tables };
        let indices = array![[0usize, 1], [2, 1], [3, 0]];
        let numeric = array![[0.5], [-1.0], [2.0]];
        let input = Input::Embedded { indices: indices.view(), numeric: numeric.view() };
        let p = AeParams { hidden: vec![3], ..AeParams::default() };
        let m = AeModel::init(4, &p, Some(emb), 1).unwrap();
        let (_, g) = m.loss_and_gradients(&input, &[0, 1]).unwrap();
        let rows: Vec<Vec<usize>> = g.embedding.iter().map(|t| t.iter().map(|(r, _)| *r).collect()).collect();
        assert_eq!(rows, vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn outliers_score_higher() {
        let train = blob(200, 4, 7).mapv(|v| v * 0.3);
        let p = AeParams { hidden: vec![8, 2, 8], epochs: 40, batch_size: 16, learning_rate: 5e-3, seed: 1, ..AeParams::default() };
        let m = ae_train(&Input::Dense(train.view()), &p, None).unwrap();
        let normal = blob(50, 4, 8).mapv(|v| v * 0.3);
        let outliers = blob(50, 4, 9).mapv(|v| v * 0.3 + 4.0);
        let mean = |x: &Array2<f64>| {
            let s = ae_score(&m, &Input::Dense(x.view())).unwrap();
            s.values().iter().sum::<f64>() / s.len() as f64
        };
        assert!(mean(&outliers) > mean(&normal));
    }

    #[test]
    fn file_roundtrip_and_mismatch() {
        let x = blob(20, 3, 4);
        let p = AeParams { hidden: vec![4, 2, 4], epochs: 2, ..AeParams::default() };
        let m = ae_train(&Input::Dense(x.view()), &p, None).unwrap();
        let back = AeModel::from_file(&m.to_file().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(ae_score(&m, &Input::Dense(blob(2, 5, 1).view())).is_err());
    }

    #[test]
    fn diverging_loss_is_reported() {
        let x = array![[f64::NAN, 1.0], [0.0, 1.0]];
        let p = AeParams { hidden: vec![2], epochs: 1, ..AeParams::default() };
        assert!(matches!(ae_train(&Input::Dense(x.view()), &p, None), Err(Error::Diverged(_))));
    }
}
