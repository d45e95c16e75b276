//! Exact pruning loss.
//!
//! For one row `w` with mask `m` the loss is `‖(w − m⊙w)ᵀ X‖²`, which equals
//! the quadratic form `vᵀ G v` with `v = (1 − m) ⊙ w`. The layer loss is the
//! sum over rows.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gram::GramMatrix;
use crate::tensorio::{DenseMatrix, PruningMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowLossBreakdown {
    pub row_index: usize,
    pub loss: f64,
    pub pruned_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerLoss {
    pub total: f64,
    pub rows: Vec<RowLossBreakdown>,
}

/// The residual weights `(1 − m) ⊙ w`.
pub fn pruned_weights(w: &[f64], m: &[bool]) -> Vec<f64> {
    w.iter().zip(m).map(|(&wj, &keep)| if keep { 0.0 } else { wj }).collect()
}

fn check_row(w: &[f64], m: &[bool], d_in: usize) -> Result<()> {
    if w.len() != d_in || m.len() != d_in {
        return Err(Error::shape(format!("row has {} weights and {} mask entries, expected {d_in}", w.len(), m.len())));
    }
    Ok(())
}

/// `vᵀ (G v)` with `v = (1 − m) ⊙ w`, clamped at zero.
pub fn row_loss_gram(w: &[f64], m: &[bool], g: &GramMatrix) -> Result<f64> {
    check_row(w, m, g.dim())?;
    let v = pruned_weights(w, m);
    Ok(g.quadratic_form(&v)?.max(0.0))
}

/// `Σ_k (Σ_j (1 − m_j) w_j X_jk)²`, straight from the activations.
pub fn row_loss_direct(w: &[f64], m: &[bool], x: &DenseMatrix) -> Result<f64> {
    check_row(w, m, x.rows())?;
    let mut out = vec![0.0; x.cols()];
    for (j, (&wj, &keep)) in w.iter().zip(m).enumerate() {
        if keep || wj == 0.0 {
            continue;
        }
        for (o, &xjk) in out.iter_mut().zip(x.row(j)) {
            *o += wj * xjk;
        }
    }
    Ok(out.iter().map(|v| v * v).sum())
}

/// Layer loss `‖WX − (M⊙W)X‖_F²` evaluated row by row through `G`.
///
/// Rows may be evaluated in parallel; the total is summed in row order.
pub fn full_loss(w: &DenseMatrix, mask: &PruningMask, g: &GramMatrix) -> Result<LayerLoss> {
    if w.shape() != mask.shape() {
        return Err(Error::shape(format!(
            "weights are {}x{} but mask is {}x{}",
            w.rows(),
            w.cols(),
            mask.rows(),
            mask.cols()
        )));
    }
    if w.cols() != g.dim() {
        return Err(Error::shape(format!("weights have {} columns, gram is {}-dim", w.cols(), g.dim())));
    }
    let rows = (0..w.rows())
        .into_par_iter()
        .map(|i| {
            let m = mask.row(i);
            Ok(RowLossBreakdown {
                row_index: i,
                loss: row_loss_gram(w.row(i), m, g)?,
                pruned_count: m.iter().filter(|&&k| !k).count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total = rows.iter().map(|r| r.loss).sum();
    Ok(LayerLoss { total, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::accumulate_gram;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn counterexample() -> (Vec<f64>, Vec<bool>, GramMatrix) {
        let x = DenseMatrix::new(4, 1, vec![1.0; 4]).unwrap();
        (vec![10.0, -1.0, 9.0, -9.0], vec![false, false, true, true], accumulate_gram(&[x]).unwrap())
    }

    fn randn(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
        DenseMatrix::new(rows, cols, data).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn counterexample_loss_is_81() {
        let (w, m, g) = counterexample();
        assert_eq!(row_loss_gram(&w, &m, &g).unwrap(), 81.0);
        let x = DenseMatrix::new(4, 1, vec![1.0; 4]).unwrap();
        assert_eq!(row_loss_direct(&w, &m, &x).unwrap(), 81.0);
    }

    #[test]
    fn all_kept_is_zero() {
        let (w, _, g) = counterexample();
        assert_eq!(row_loss_gram(&w, &[true; 4], &g).unwrap(), 0.0);
        let x = DenseMatrix::new(4, 1, vec![1.0; 4]).unwrap();
        assert_eq!(row_loss_direct(&w, &[true; 4], &x).unwrap(), 0.0);
        assert_eq!(row_loss_gram(&[0.0; 4], &[false; 4], &g).unwrap(), 0.0);
    }

    #[test]
    fn shape_errors() {
        let (w, m, g) = counterexample();
        assert!(row_loss_gram(&w[..3], &m[..3], &g).is_err());
        assert!(full_loss(&DenseMatrix::zeros(2, 4), &PruningMask::ones(2, 3), &g).is_err());
    }

    #[test]
    fn gram_matches_direct_on_random_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let d = rng.random_range(1..20);
            let b = rng.random_range(1..30);
            let x = randn(d, b, &mut rng);
            let g = accumulate_gram(std::slice::from_ref(&x)).unwrap();
            let w = randn(1, d, &mut rng);
            let m: Vec<bool> = (0..d).map(|_| rng.random_bool(0.5)).collect();
            let lg = row_loss_gram(w.data(), &m, &g).unwrap();
            let ld = row_loss_direct(w.data(), &m, &x).unwrap();
            assert!(rel(lg, ld) <= 1e-10 || (lg - ld).abs() < 1e-12, "{lg} vs {ld}");
        }
    }

    #[test]
    fn zero_row_contributes_nothing() {
        let (w, m, g) = counterexample();
        let wm = DenseMatrix::from_rows(&[w.clone(), vec![0.0; 4]]).unwrap();
        let mask = PruningMask::from_rows(&[m.clone(), m.clone()]).unwrap();
        let loss = full_loss(&wm, &mask, &g).unwrap();
        assert_eq!(loss.total, 81.0);
        assert_eq!(loss.rows[1].loss, 0.0);
        assert_eq!(loss.rows[1].pruned_count, 2);
        assert_eq!(full_loss(&wm, &PruningMask::ones(2, 4), &g).unwrap().total, 0.0);
    }

    #[test]
    fn layer_loss_matches_frobenius() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..20 {
            let w = randn(8, 16, &mut rng);
            let x = randn(16, 40, &mut rng);
            let g = accumulate_gram(std::slice::from_ref(&x)).unwrap();
            // Feasible per-row mask: prune 8 of 16 at random positions.
            let mut bits = Vec::new();
            for _ in 0..8 {
                let mut row = vec![true; 16];
                for j in rand::seq::index::sample(&mut rng, 16, 8) {
                    row[j] = false;
                }
                bits.extend(row);
            }
            let mask = PruningMask::new(8, 16, bits).unwrap();
            let loss = full_loss(&w, &mask, &g).unwrap();
            let masked = DenseMatrix::new(
                8,
                16,
                w.data().iter().zip(mask.bits()).map(|(&v, &k)| if k { v } else { 0.0 }).collect(),
            )
            .unwrap();
            let full = w.matmul(&x).unwrap();
            let pruned = masked.matmul(&x).unwrap();
            let frob: f64 = full.data().iter().zip(pruned.data()).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(rel(loss.total, frob) <= 1e-10);
            assert_eq!(loss.total, loss.rows.iter().map(|r| r.loss).sum::<f64>());
        }
    }
}
