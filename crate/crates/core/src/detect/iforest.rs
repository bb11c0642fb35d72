//! Isolation Forest: random axis-aligned splits isolate anomalies in fewer
//! steps, so short average path lengths mean high scores.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::modelfile::ModelFile;
use super::{check_dim, ScoreVector};
use crate::rng::keyed;
use crate::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful binary-search-tree lookup among
/// `n` points; normalizes path lengths and corrects truncated leaves.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IForestParams {
    pub trees: usize,
    /// Subsample size per tree; `None` means `min(256, n)`.
    pub sample_size: Option<usize>,
    pub seed: u64,
}

impl Default for IForestParams {
    fn default() -> Self {
        IForestParams {
            trees: 100,
            sample_size: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf { size: usize },
    Split { feature: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
}

impl IsolationTree {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Edges to the leaf plus the correction for the leaf's size.
    pub fn path_length(&self, x: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[i] {
                Node::Leaf { size } => return depth + average_path_length(size),
                Node::Split { feature, value, left, right } => {
                    i = if x[feature] < value { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForestModel {
    pub params: IForestParams,
    pub sample_size: usize,
    pub height_limit: usize,
    pub dim: usize,
    pub trees: Vec<IsolationTree>,
}

struct Builder<'a, R: Rng> {
    data: ArrayView2<'a, f64>,
    rng: R,
    limit: usize,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: rows.len() });
        if depth >= self.limit || rows.len() <= 1 {
            return id;
        }
        let d = self.data.ncols();
        let mut ranges = Vec::new();
        for j in 0..d {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &r in &rows {
                let v = self.data[[r, j]];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > lo {
                ranges.push((j, lo, hi));
            }
        }
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[self.rng.random_range(0..ranges.len())];
        let mut value = lo + self.rng.random::<f64>() * (hi - lo);
        if value <= lo {
            value = lo + 0.5 * (hi - lo);
        }
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.data[[r, feature]] < value);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split { feature, value, left: l, right: r };
        id
    }
}

pub fn iforest_fit(data: ArrayView2<f64>, params: &IForestParams) -> Result<IsolationForestModel> {
    let (n, d) = data.dim();
    if params.trees == 0 {
        return Err(Error::Config("isolation forest needs at least one tree".into()));
    }
    let psi = params.sample_size.unwrap_or(n.min(256));
    if psi < 2 || psi > n {
        return Err(Error::InvalidInput(format!("subsample size {psi} must lie in 2..={n}")));
    }
    let limit = (psi as f64).log2().ceil() as usize;
    let trees: Vec<IsolationTree> = (0..params.trees)
        .map(|t| {
            let mut rng = keyed(params.seed, t as u64, "iforest");
            let mut rows = sample(&mut rng, n, psi).into_vec();
            rows.sort_unstable();
            let mut b = Builder { data, rng, limit, nodes: Vec::new() };
            b.grow(rows, 0);
            IsolationTree { nodes: b.nodes }
        })
        .collect();
    if trees.iter().all(|t| t.nodes.len() == 1) {
        log::warn!("isolation forest: matrix is constant, every tree is a single leaf");
    }
    Ok(IsolationForestModel {
        params: params.clone(),
        sample_size: psi,
        height_limit: limit,
        dim: d,
        trees,
    })
}

impl IsolationForestModel {
    pub fn expected_path_length(&self, x: ArrayView1<f64>) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// `2^(-E[h(x)] / c(psi))`, in `(0, 1]`.
    pub fn score_of_path(&self, expected: f64) -> f64 {
        2f64.powf(-expected / average_path_length(self.sample_size))
    }

    pub fn to_file(&self) -> Result<ModelFile> {
        #[derive(Serialize)]
        struct Meta<'a> {
            params: &'a IForestParams,
            sample_size: usize,
            height_limit: usize,
            dim: usize,
            tree_sizes: Vec<usize>,
        }
        let meta = Meta {
            params: &self.params,
            sample_size: self.sample_size,
            height_limit: self.height_limit,
            dim: self.dim,
            tree_sizes: self.trees.iter().map(|t| t.nodes.len()).collect(),
        };
        let mut f = ModelFile::new("iforest", serde_json::to_value(&meta)?);
        // per node: feature (-1 for a leaf), split value, left, right, leaf size
        let mut data = Vec::new();
        let mut total = 0;
        for t in &self.trees {
            for node in &t.nodes {
                let row = match *node {
                    Node::Leaf { size } => [-1.0, 0.0, 0.0, 0.0, size as f64],
                    Node::Split { feature, value, left, right } => {
                        [feature as f64, value, left as f64, right as f64, 0.0]
                    }
                };
                data.extend_from_slice(&row);
                total += 1;
            }
        }
        f.push("nodes", &[total, 5], data);
        Ok(f)
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        #[derive(Deserialize)]
        struct Meta {
            params: IForestParams,
            sample_size: usize,
            height_limit: usize,
            dim: usize,
            tree_sizes: Vec<usize>,
        }
        let meta: Meta = f.meta()?;
        let nodes = f.block_2d("nodes")?;
        let mut trees = Vec::with_capacity(meta.tree_sizes.len());
        let mut at = 0;
        for size in meta.tree_sizes {
            let tree_nodes = (at..at + size)
                .map(|i| {
                    let r = nodes.row(i);
                    if r[0] < 0.0 {
                        Node::Leaf { size: r[4] as usize }
                    } else {
                        Node::Split {
                            feature: r[0] as usize,
                            value: r[1],
                            left: r[2] as usize,
                            right: r[3] as usize,
                        }
                    }
                })
                .collect();
            trees.push(IsolationTree { nodes: tree_nodes });
            at += size;
        }
        Ok(IsolationForestModel {
            params: meta.params,
            sample_size: meta.sample_size,
            height_limit: meta.height_limit,
            dim: meta.dim,
            trees,
        })
    }
}

pub fn iforest_score(model: &IsolationForestModel, data: ArrayView2<f64>) -> Result<ScoreVector> {
    check_dim(model.dim, data.ncols())?;
    Ok(ScoreVector::new(
        data.rows()
            .into_iter()
            .map(|x| model.score_of_path(model.expected_path_length(x)))
            .collect(),
    ))
}
