//! Exhaustive reference solvers for small rows.
//!
//! Everything here evaluates candidate masks with
//! [`row_loss_gram`](crate::objective::row_loss_gram) and never uses the
//! engine's incremental swap costs, so it can certify the engine
//! independently. The one exception is [`enumerate_swap_deltas`], whose job
//! is to put the two side by side.

use itertools::Itertools;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gram::GramMatrix;
use crate::objective::row_loss_gram;
use crate::swapengine::RowState;
use crate::warmstart::SparsityConstraint;

/// Maximum number of per-row subsets enumerated.
pub const PER_ROW_BUDGET: u128 = 1_000_000;
/// Maximum size of the N:M cross product, `2^20`.
pub const BLOCK_BUDGET: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub best_mask: Vec<bool>,
    pub best_loss: f64,
    pub n_evaluated: u64,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of feasible masks for a row of length `d_in`.
pub fn feasible_count(d_in: usize, constraint: &SparsityConstraint) -> u128 {
    match *constraint {
        SparsityConstraint::PerRow { prune_count } => binomial(d_in, prune_count),
        SparsityConstraint::BlockNM { n_keep, m_block } => {
            let per_block = binomial(m_block, m_block - n_keep);
            let blocks = (d_in / m_block) as u32;
            per_block.checked_pow(blocks).unwrap_or(u128::MAX)
        }
    }
}

fn mask_from_pruned(d_in: usize, pruned: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut m = vec![true; d_in];
    for j in pruned {
        m[j] = false;
    }
    m
}

/// Globally optimal feasible mask by full enumeration.
///
/// Pruned index sets are visited in lexicographic order and the first
/// minimum wins. N:M blocks interact through off-diagonal entries of `G`, so
/// the whole cross product of block choices is enumerated.
pub fn brute_force_row(w: &[f64], g: &GramMatrix, constraint: &SparsityConstraint) -> Result<OracleResult> {
    let d = g.dim();
    if w.len() != d {
        return Err(Error::shape(format!("row of length {} against {d}-dim gram", w.len())));
    }
    constraint.validate(d)?;
    let count = feasible_count(d, constraint);
    let budget = match constraint {
        SparsityConstraint::PerRow { .. } => PER_ROW_BUDGET,
        SparsityConstraint::BlockNM { .. } => BLOCK_BUDGET,
    };
    if count > budget {
        return Err(Error::TooLarge { count, budget });
    }

    let candidates: Box<dyn Iterator<Item = Vec<usize>>> = match *constraint {
        SparsityConstraint::PerRow { prune_count } => Box::new((0..d).combinations(prune_count)),
        SparsityConstraint::BlockNM { n_keep, m_block } => {
            let per_block: Vec<Vec<Vec<usize>>> = (0..d / m_block)
                .map(|b| (b * m_block..(b + 1) * m_block).combinations(m_block - n_keep).collect())
                .collect();
            Box::new(
                per_block
                    .into_iter()
                    .map(|choices| choices.into_iter())
                    .multi_cartesian_product()
                    .map(|parts| parts.concat()),
            )
        }
    };

    let mut best: Option<(Vec<bool>, f64)> = None;
    let mut n_evaluated = 0u64;
    for pruned in candidates {
        let mask = mask_from_pruned(d, pruned);
        let loss = row_loss_gram(w, &mask, g)?;
        n_evaluated += 1;
        if best.as_ref().is_none_or(|(_, b)| loss < *b) {
            best = Some((mask, loss));
        }
    }
    let (best_mask, best_loss) = best.expect("at least one feasible mask");
    Ok(OracleResult { best_mask, best_loss, n_evaluated })
}

/// All feasible `(u, p)` pairs: `u` kept, `p` pruned, same group.
fn feasible_pairs(m: &[bool], constraint: &SparsityConstraint) -> Vec<(usize, usize)> {
    let kept = (0..m.len()).filter(|&j| m[j]);
    kept.flat_map(|u| (0..m.len()).filter(move |&p| !m[p]).map(move |p| (u, p)))
        .filter(|&(u, p)| constraint.allows_swap(u, p))
        .collect()
}

fn swapped(m: &[bool], u: usize, p: usize) -> Vec<bool> {
    let mut out = m.to_vec();
    out[u] = false;
    out[p] = true;
    out
}

/// True iff no feasible single swap lowers the loss by more than `eps`,
/// checked by recomputing the loss of every neighbour.
pub fn is_one_swap_optimal(
    w: &[f64],
    m: &[bool],
    g: &GramMatrix,
    constraint: &SparsityConstraint,
    eps: f64,
) -> Result<bool> {
    let base = row_loss_gram(w, m, g)?;
    for (u, p) in feasible_pairs(m, constraint) {
        if row_loss_gram(w, &swapped(m, u, p), g)? - base < -eps {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapDeltaEntry {
    pub u: usize,
    pub p: usize,
    /// Difference of two full loss evaluations.
    pub direct: f64,
    /// The engine's incremental swap cost.
    pub formula: f64,
}

impl SwapDeltaEntry {
    pub fn rel_disagreement(&self) -> f64 {
        let scale = self.direct.abs().max(self.formula.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.direct - self.formula).abs() / scale
        }
    }
}

/// Every feasible swap with its cost computed both ways.
pub fn enumerate_swap_deltas(
    w: &[f64],
    m: &[bool],
    g: &GramMatrix,
    constraint: &SparsityConstraint,
) -> Result<Vec<SwapDeltaEntry>> {
    let base = row_loss_gram(w, m, g)?;
    let state = RowState::new(w, m, g)?;
    feasible_pairs(m, constraint)
        .into_iter()
        .map(|(u, p)| {
            Ok(SwapDeltaEntry {
                u,
                p,
                direct: row_loss_gram(w, &swapped(m, u, p), g)? - base,
                formula: state.swap_delta(u, p, g)?,
            })
        })
        .collect()
}
