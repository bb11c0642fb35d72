//! Generalized feature embedding learning (GEL).
//!
//! For a binary matrix `W` (`n x m`), `R` holds each row's fraction of zeros
//! and ones, `F` the same per column, `Q = F Rᵀ` and `S = Qᵀ Q W`. The
//! embedding is `W Vk` where `Vk` are the top-k right singular vectors of `S`.
//!
//! `S` is never formed. Since `QᵀQ = R (FᵀF) Rᵀ`, we have `S = R M` with
//! `M = (FᵀF) Rᵀ W` a `2 x m` matrix, so `rank(S) <= 2` and its right
//! singular vectors come from a 2x2 problem. Directions past the rank carry
//! zero singular value; they are completed deterministically by
//! Gram-Schmidt over the standard basis.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::basic::Binarizer;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GelModel {
    pub k: usize,
    /// `m_w x k`, orthonormal columns ordered by descending singular value.
    pub vk: Array2<f64>,
    pub singular_values: Vec<f64>,
    /// Number of leading columns of `vk` with a nonzero singular value.
    pub rank: usize,
    /// Layout of the binary matrix the model was fitted on.
    pub binarizer: Option<Binarizer>,
}

/// `R`: per row, the fraction of zero and one entries.
pub fn row_marginals(w: ArrayView2<f64>) -> Array2<f64> {
    let m = w.ncols() as f64;
    let ones = w.sum_axis(Axis(1)) / m;
    let mut r = Array2::zeros((w.nrows(), 2));
    for (i, p) in ones.iter().enumerate() {
        r[[i, 0]] = 1.0 - p;
        r[[i, 1]] = *p;
    }
    r
}

/// `F`: per column, the fraction of zero and one entries.
pub fn feature_marginals(w: ArrayView2<f64>) -> Array2<f64> {
    let n = w.nrows() as f64;
    let ones = w.sum_axis(Axis(0)) / n;
    let mut f = Array2::zeros((w.ncols(), 2));
    for (j, p) in ones.iter().enumerate() {
        f[[j, 0]] = 1.0 - p;
        f[[j, 1]] = *p;
    }
    f
}

fn dot(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.dot(b)
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Vectors whose
/// residual falls below `tol` times their original norm are dropped.
/// Returns the basis and, for each input, its coefficients on that basis.
fn orthonormalize(vectors: &[Array1<f64>], tol: f64) -> (Vec<Array1<f64>>, Vec<Vec<f64>>) {
    let mut basis: Vec<Array1<f64>> = Vec::new();
    let mut coeffs = vec![Vec::new(); vectors.len()];
    let scale = vectors.iter().map(|v| dot(v, v).sqrt()).fold(0.0, f64::max);
    for v in vectors {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &r);
                r.scaled_add(-c, q);
            }
        }
        let norm = dot(&r, &r).sqrt();
        if norm > tol * scale && norm > 0.0 {
            basis.push(r / norm);
        }
    }
    for (i, v) in vectors.iter().enumerate() {
        coeffs[i] = basis.iter().map(|q| dot(q, v)).collect();
    }
    (basis, coeffs)
}

/// Eigenvectors of a symmetric 2x2 matrix as columns `(c, s)`, `(-s, c)`.
fn jacobi_2x2(a: f64, b: f64, d: f64) -> [[f64; 2]; 2] {
    if b == 0.0 {
        return [[1.0, 0.0], [0.0, 1.0]];
    }
    let theta = 0.5 * (2.0 * b).atan2(a - d);
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
fn canonical_sign(v: &mut Array1<f64>) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

fn check_binary(w: ArrayView2<f64>) -> Result<()> {
    if w.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::InvalidInput("GEL input must be a 0/1 matrix".into()));
    }
    Ok(())
}

pub fn gel_fit(w: ArrayView2<f64>, k: usize) -> Result<GelModel> {
    let (n, m) = w.dim();
    if n < 2 {
        return Err(Error::InvalidInput("GEL needs at least two rows".into()));
    }
    if k == 0 || k > m {
        return Err(Error::InvalidInput(format!("k = {k} must lie in 1..={m}")));
    }
    check_binary(w)?;
    if w.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidInput("GEL input is all zeros".into()));
    }

    let r = row_marginals(w);
    let f = feature_marginals(w);
    let g = f.t().dot(&f);
    let m_small = g.dot(&r.t().dot(&w)); // 2 x m

    // R = Qr T, so S = Qr (T M) and S shares right singular vectors with T M.
    let r_cols: Vec<Array1<f64>> = (0..2).map(|j| r.column(j).to_owned()).collect();
    let (_, t_coeffs) = orthonormalize(&r_cols, 1e-12);
    let p = t_coeffs[0].len();
    let mut tm = Array2::<f64>::zeros((p, m));
    for a in 0..p {
        for (j, col) in t_coeffs.iter().enumerate() {
            tm.row_mut(a).scaled_add(col[a], &m_small.row(j));
        }
    }

    // Row space of T M, then the small SVD inside it.
    let rows: Vec<Array1<f64>> = tm.rows().into_iter().map(|r| r.to_owned()).collect();
    let (qb, c_coeffs) = orthonormalize(&rows, 1e-12);
    let q = qb.len();
    // C = (T M) Qb, p x q
    let c = Array2::from_shape_fn((p, q), |(i, j)| c_coeffs[i][j]);
    let mut range: Vec<(f64, Array1<f64>)> = Vec::new();
    if q > 0 {
        let ctc = c.t().dot(&c);
        let rot = if q == 2 {
            jacobi_2x2(ctc[[0, 0]], ctc[[0, 1]], ctc[[1, 1]])
        } else {
            [[1.0, 0.0], [0.0, 1.0]]
        };
        for col in 0..q {
            let dir = Array1::from_shape_fn(q, |i| rot[i][col]);
            let sigma = c.dot(&dir).iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut v = Array1::<f64>::zeros(m);
            for (i, b) in qb.iter().enumerate() {
                v.scaled_add(dir[i], b);
            }
            range.push((sigma, v));
        }
        range.sort_by(|a, b| b.0.total_cmp(&a.0));
    }

    let rank = range.len();
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(k);
    let mut singular_values = Vec::with_capacity(k);
    for (sigma, v) in range.into_iter().take(k) {
        basis.push(v);
        singular_values.push(sigma);
    }
    // Complete with zero-singular-value directions from the standard basis.
    let mut j = 0;
    while basis.len() < k && j < m {
        let mut e = Array1::<f64>::zeros(m);
        e[j] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &e);
                e.scaled_add(-c, b);
            }
        }
        let norm = dot(&e, &e).sqrt();
        if norm > 1e-6 {
            basis.push(e / norm);
            singular_values.push(0.0);
        }
        j += 1;
    }
    let mut vk = Array2::zeros((m, k));
    for (col, mut v) in basis.into_iter().enumerate() {
        canonical_sign(&mut v);
        vk.column_mut(col).assign(&v);
    }
    Ok(GelModel {
        k,
        vk,
        singular_values,
        rank: rank.min(k),
        binarizer: None,
    })
}

/// Projects a binary matrix with the fitted layout: `W_new Vk`.
pub fn gel_transform(w_new: ArrayView2<f64>, model: &GelModel) -> Result<Array2<f64>> {
    if w_new.ncols() != model.vk.nrows() {
        return Err(Error::DimensionMismatch {
            expected: model.vk.nrows(),
            actual: w_new.ncols(),
        });
    }
    Ok(w_new.dot(&model.vk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn marginals_of_a_single_row() {
        let w = array![[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0]];
        let r = row_marginals(w.view());
        assert_eq!(r.row(0).to_vec(), vec![0.75, 0.25]);
        let f = feature_marginals(w.view());
        assert_eq!(f.row(0).to_vec(), vec![0.0, 1.0]);
        assert_eq!(f.row(1).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn identity_hand_case() {
        let w = array![[1.0, 0.0], [0.0, 1.0]];
        let model = gel_fit(w.view(), 2).unwrap();
        assert!((model.singular_values[0] - 1.0).abs() < 1e-12);
        assert_eq!(model.singular_values[1], 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((model.vk[[0, 0]] - h).abs() < 1e-12);
        assert!((model.vk[[1, 0]] - h).abs() < 1e-12);

        let model = gel_fit(w.view(), 1).unwrap();
        let emb = gel_transform(w.view(), &model).unwrap();
        assert_eq!(emb.dim(), (2, 1));
        assert!((emb[[0, 0]] - 0.7071).abs() < 1e-4);
        assert!((emb[[1, 0]] - 0.7071).abs() < 1e-4);
    }

    #[test]
    fn zero_row_maps_to_zero() {
        let w = array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0]];
        let model = gel_fit(w.view(), 2).unwrap();
        let out = gel_transform(array![[0.0, 0.0, 0.0]].view(), &model).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn errors() {
        let w = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(gel_fit(w.view(), 3).is_err());
        assert!(gel_fit(w.view(), 0).is_err());
        assert!(gel_fit(array![[0.0, 0.0], [0.0, 0.0]].view(), 1).is_err());
        assert!(gel_fit(array![[0.5, 0.0], [0.0, 1.0]].view(), 1).is_err());
        let model = gel_fit(w.view(), 1).unwrap();
        assert!(matches!(
            gel_transform(array![[1.0, 0.0, 0.0]].view(), &model),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
