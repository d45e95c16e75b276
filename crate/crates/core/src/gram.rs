//! Calibration Gram matrix `G = X Xᵀ`.
//!
//! `X` is `d_in × B`: one row per input feature, one column per calibration
//! token. Everything downstream depends on `X` only through `G`, so the
//! activations can be streamed in column blocks and dropped.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensorio::DenseMatrix;

/// Symmetric `d_in × d_in` Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: DenseMatrix,
}

impl GramMatrix {
    /// Wraps a square matrix, storing `(G + Gᵀ) / 2`.
    pub fn from_matrix(m: DenseMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::shape(format!("gram matrix must be square, got {}x{}", m.rows(), m.cols())));
        }
        let mut g = Self { values: m };
        g.symmetrize();
        Ok(g)
    }

    pub fn identity(dim: usize) -> Self {
        Self { values: DenseMatrix::identity(dim) }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    /// Row `i`, which equals column `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn as_matrix(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.values
    }

    pub fn trace(&self) -> f64 {
        self.values.trace()
    }

    /// `vᵀ G v`.
    pub fn quadratic_form(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::shape(format!("vector of length {} against {}-dim gram", v.len(), self.dim())));
        }
        let mut total = 0.0;
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            total += vi * dot(self.row(i), v);
        }
        Ok(total)
    }

    fn symmetrize(&mut self) {
        let n = self.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.values.get(i, j) + self.values.get(j, i));
                self.values.set(i, j, avg);
                self.values.set(j, i, avg);
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `X_b X_bᵀ` for one block, upper triangle mirrored.
fn block_gram(block: &DenseMatrix) -> Vec<f64> {
    let d = block.rows();
    let mut g = vec![0.0; d * d];
    for i in 0..d {
        let ri = block.row(i);
        for j in i..d {
            let v = dot(ri, block.row(j));
            g[i * d + j] = v;
            g[j * d + i] = v;
        }
    }
    g
}

/// Accumulates `G = Σ_b X_b X_bᵀ` over column blocks of the calibration
/// activations.
///
/// Blocks are processed in parallel and summed pairwise along a fixed binary
/// tree over block indices, so the result does not depend on thread count.
pub fn accumulate_gram(blocks: &[DenseMatrix]) -> Result<GramMatrix> {
    let first = blocks.first().ok_or_else(|| Error::shape("no calibration blocks"))?;
    let d = first.rows();
    for (b, block) in blocks.iter().enumerate() {
        if block.rows() != d {
            return Err(Error::shape(format!("block {b} has {} feature rows, expected {d}", block.rows())));
        }
    }

    let mut level: Vec<Vec<f64>> = blocks.par_iter().map(block_gram).collect();
    while level.len() > 1 {
        level = level
            .par_chunks(2)
            .map(|pair| match pair {
                [a, b] => a.iter().zip(b).map(|(x, y)| x + y).collect(),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    let values = DenseMatrix::new(d, d, level.pop().unwrap())?;
    GramMatrix::from_matrix(values)
}

/// Per-feature activation norms `‖X_{j,:}‖₂ = √G_jj`, clamping rounding
/// negatives to zero.
pub fn feature_norms(g: &GramMatrix) -> Vec<f64> {
    g.diag().into_iter().map(|v| v.max(0.0).sqrt()).collect()
}

/// Outcome of comparing the full activations against their SVD-compressed
/// `d_in × d_in` surrogate `X' = U Σ'`.
#[derive(Debug, Clone, Serialize)]
pub struct SvdCheckReport {
    pub loss_full: f64,
    pub loss_compressed: f64,
    /// `|‖w_pᵀX‖² − ‖w_pᵀX'‖²|`, relative to the larger of the two.
    pub loss_rel_diff: f64,
    /// `max |X'X'ᵀ − XXᵀ|`, relative to `max |XXᵀ|`.
    pub gram_rel_diff: f64,
    pub passed: bool,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Checks that compressing `X` to `X' = U Σ'` preserves both the loss of the
/// pruned-weight vector `w_p` and the Gram matrix, within relative `tol`.
pub fn svd_equivalence_check(x: &DenseMatrix, w_p: &[f64], tol: f64) -> Result<SvdCheckReport> {
    let (d, b) = x.shape();
    if b < d {
        return Err(Error::shape(format!("need at least as many columns as rows, got {d}x{b}")));
    }
    if w_p.len() != d {
        return Err(Error::shape(format!("w_p has length {}, X has {d} rows", w_p.len())));
    }

    let xm = DMatrix::from_row_slice(d, b, x.data());
    let svd = xm.clone().try_svd(true, false, f64::EPSILON, 10_000).ok_or(Error::DecompositionFailure)?;
    let u = svd.u.as_ref().ok_or(Error::DecompositionFailure)?;
    let x_compressed = u * DMatrix::from_diagonal(&svd.singular_values);

    let wv = DVector::from_column_slice(w_p);
    let loss_full = (xm.transpose() * &wv).norm_squared();
    let loss_compressed = (x_compressed.transpose() * &wv).norm_squared();

    let g = &xm * xm.transpose();
    let g_compressed = &x_compressed * x_compressed.transpose();
    let g_scale = g.amax();
    let gram_rel_diff = if g_scale == 0.0 { (g_compressed - &g).amax() } else { (g_compressed - &g).amax() / g_scale };

    let loss_rel_diff = rel_diff(loss_full, loss_compressed);
    Ok(SvdCheckReport {
        loss_full,
        loss_compressed,
        loss_rel_diff,
        gram_rel_diff,
        passed: loss_rel_diff <= tol && gram_rel_diff <= tol,
    })
}
