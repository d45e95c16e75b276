//! Sparsity constraints and feasible initial masks from importance scores.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::{feature_norms, GramMatrix};
use crate::tensorio::{DenseMatrix, PruningMask};

pub const DEFAULT_RIA_EXPONENT: f64 = 0.5;

/// A sparsity pattern that fixes the number of pruned weights per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SparsityConstraint {
    /// Exactly `prune_count` zeros in every row.
    PerRow { prune_count: usize },
    /// Exactly `n_keep` ones in every aligned block of `m_block` columns.
    BlockNM { n_keep: usize, m_block: usize },
}

impl SparsityConstraint {
    pub fn validate(&self, d_in: usize) -> Result<()> {
        match *self {
            SparsityConstraint::PerRow { prune_count } if prune_count > d_in => {
                Err(Error::IncompatibleConstraint(format!("cannot prune {prune_count} of {d_in} columns")))
            }
            SparsityConstraint::BlockNM { n_keep, m_block } if n_keep == 0 || n_keep > m_block => {
                Err(Error::IncompatibleConstraint(format!("N:M needs 0 < N <= M, got {n_keep}:{m_block}")))
            }
            SparsityConstraint::BlockNM { m_block, .. } if !d_in.is_multiple_of(m_block) => {
                Err(Error::IncompatibleConstraint(format!("{d_in} columns are not divisible into blocks of {m_block}")))
            }
            _ => Ok(()),
        }
    }

    /// Kept entries per row for a row of length `d_in`.
    pub fn kept_per_row(&self, d_in: usize) -> usize {
        match *self {
            SparsityConstraint::PerRow { prune_count } => d_in - prune_count,
            SparsityConstraint::BlockNM { n_keep, m_block } => d_in / m_block * n_keep,
        }
    }

    /// Width of the independent column groups: the whole row for per-row
    /// sparsity, `m_block` otherwise.
    pub fn group_width(&self, d_in: usize) -> usize {
        match *self {
            SparsityConstraint::PerRow { .. } => d_in,
            SparsityConstraint::BlockNM { m_block, .. } => m_block,
        }
    }

    /// Whether a swap between columns `u` and `p` stays feasible.
    pub fn allows_swap(&self, u: usize, p: usize) -> bool {
        match *self {
            SparsityConstraint::PerRow { .. } => true,
            SparsityConstraint::BlockNM { m_block, .. } => u / m_block == p / m_block,
        }
    }

    /// Describes the first violation in `mask_row`, if any.
    pub fn violation(&self, mask_row: &[bool]) -> Option<String> {
        let d_in = mask_row.len();
        if let Err(e) = self.validate(d_in) {
            return Some(e.to_string());
        }
        match *self {
            SparsityConstraint::PerRow { prune_count } => {
                let pruned = mask_row.iter().filter(|&&k| !k).count();
                (pruned != prune_count).then(|| format!("{pruned} pruned entries, expected {prune_count}"))
            }
            SparsityConstraint::BlockNM { n_keep, m_block } => {
                mask_row.chunks(m_block).enumerate().find_map(|(b, block)| {
                    let kept = block.iter().filter(|&&k| k).count();
                    (kept != n_keep).then(|| format!("block {b} keeps {kept}, expected {n_keep}"))
                })
            }
        }
    }

    pub fn is_satisfied(&self, mask_row: &[bool]) -> bool {
        self.violation(mask_row).is_none()
    }

    /// Returns the first infeasible row as an error.
    pub fn check_mask(&self, mask: &PruningMask) -> Result<()> {
        for i in 0..mask.rows() {
            if let Some(reason) = self.violation(mask.row(i)) {
                return Err(Error::InfeasibleWarmstart { row: i, reason });
            }
        }
        Ok(())
    }
}

impl fmt::Display for SparsityConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SparsityConstraint::PerRow { prune_count } => write!(f, "perrow:{prune_count}"),
            SparsityConstraint::BlockNM { n_keep, m_block } => write!(f, "nm:{n_keep}:{m_block}"),
        }
    }
}

impl FromStr for SparsityConstraint {
    type Err = Error;

    /// Parses `perrow:<p>` or `nm:<N>:<M>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("constraint {s:?} is not perrow:<p> or nm:<N>:<M>"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            [kind, p] if kind.eq_ignore_ascii_case("perrow") => Ok(Self::PerRow { prune_count: num(p)? }),
            [kind, n, m] if kind.eq_ignore_ascii_case("nm") => Ok(Self::BlockNM { n_keep: num(n)?, m_block: num(m)? }),
            _ => Err(bad()),
        }
    }
}

/// Nonnegative importance scores, one per weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix(DenseMatrix);

impl ScoreMatrix {
    pub fn new(m: DenseMatrix) -> Result<Self> {
        if let Some(index) = m.data().iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(format!("score {} at flat index {index}", m.data()[index])));
        }
        Ok(Self(m))
    }

    pub fn as_matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Magnitude,
    Wanda,
    Ria,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Magnitude, Criterion::Wanda, Criterion::Ria];

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Magnitude => "magnitude",
            Criterion::Wanda => "wanda",
            Criterion::Ria => "ria",
        }
    }

    pub fn scores(&self, w: &DenseMatrix, g: &GramMatrix, ria_exponent: f64) -> Result<ScoreMatrix> {
        match self {
            Criterion::Magnitude => Ok(score_magnitude(w)),
            Criterion::Wanda => score_wanda(w, g),
            Criterion::Ria => score_ria(w, g, ria_exponent),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "magnitude" => Ok(Criterion::Magnitude),
            "wanda" => Ok(Criterion::Wanda),
            "ria" => Ok(Criterion::Ria),
            other => Err(Error::InvalidConfig(format!("unknown criterion {other:?}"))),
        }
    }
}

fn check_gram(w: &DenseMatrix, g: &GramMatrix) -> Result<()> {
    if w.cols() != g.dim() {
        return Err(Error::shape(format!("weights have {} columns, gram is {}-dim", w.cols(), g.dim())));
    }
    Ok(())
}

/// `|W_ij|`.
pub fn score_magnitude(w: &DenseMatrix) -> ScoreMatrix {
    let data = w.data().iter().map(|v| v.abs()).collect();
    ScoreMatrix(DenseMatrix::new(w.rows(), w.cols(), data).unwrap())
}

/// `|W_ij| · ‖X_{j,:}‖₂`.
pub fn score_wanda(w: &DenseMatrix, g: &GramMatrix) -> Result<ScoreMatrix> {
    check_gram(w, g)?;
    let norms = feature_norms(g);
    let mut s = DenseMatrix::zeros(w.rows(), w.cols());
    for i in 0..w.rows() {
        for ((o, &wij), &n) in s.row_mut(i).iter_mut().zip(w.row(i)).zip(&norms) {
            *o = wij.abs() * n;
        }
    }
    Ok(ScoreMatrix(s))
}

/// Relative importance with activations:
/// `(|W_ij| / Σ_i' |W_i'j| + |W_ij| / Σ_j' |W_ij'|) · ‖X_{j,:}‖₂^a`.
///
/// A zero row or column sum contributes 0 to its ratio term.
pub fn score_ria(w: &DenseMatrix, g: &GramMatrix, exponent: f64) -> Result<ScoreMatrix> {
    check_gram(w, g)?;
    let norms = feature_norms(g);
    let abs = score_magnitude(w).0;
    let row_sums: Vec<f64> = abs.row_iter().map(|r| r.iter().sum()).collect();
    let mut col_sums = vec![0.0; w.cols()];
    for r in abs.row_iter() {
        for (c, v) in col_sums.iter_mut().zip(r) {
            *c += v;
        }
    }
    let ratio = |v: f64, total: f64| if total > 0.0 { v / total } else { 0.0 };

    let mut s = DenseMatrix::zeros(w.rows(), w.cols());
    for (i, &row_sum) in row_sums.iter().enumerate() {
        for j in 0..w.cols() {
            let a = abs.get(i, j);
            let rel = ratio(a, col_sums[j]) + ratio(a, row_sum);
            s.set(i, j, rel * norms[j].powf(exponent));
        }
    }
    ScoreMatrix::new(s)
}

/// Indices of the `keep` highest scores in `scores`; ties keep the lower index.
fn top_k(scores: &[f64], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(keep);
    order
}

/// Keeps the highest-scoring entries of each row (or of each N:M block).
pub fn select_mask(scores: &ScoreMatrix, constraint: &SparsityConstraint) -> Result<PruningMask> {
    let (rows, d_in) = scores.0.shape();
    constraint.validate(d_in)?;
    let width = constraint.group_width(d_in);
    let keep = match *constraint {
        SparsityConstraint::PerRow { prune_count } => d_in - prune_count,
        SparsityConstraint::BlockNM { n_keep, .. } => n_keep,
    };
    let mut mask = PruningMask::new(rows, d_in, vec![false; rows * d_in])?;
    for i in 0..rows {
        let srow = scores.row(i);
        let mrow = mask.row_mut(i);
        for start in (0..d_in).step_by(width) {
            for j in top_k(&srow[start..start + width], keep) {
                mrow[start + j] = true;
            }
        }
    }
    Ok(mask)
}

/// Scores `w` with `criterion` and selects a feasible mask.
pub fn warm_start(
    w: &DenseMatrix,
    g: &GramMatrix,
    criterion: Criterion,
    constraint: &SparsityConstraint,
    ria_exponent: f64,
) -> Result<PruningMask> {
    select_mask(&criterion.scores(w, g, ria_exponent)?, constraint)
}

/// `floor(s · d_in)`, the number of weights to prune for sparsity `s`.
///
/// A `1e-9` slack absorbs representation error in decimal fractions
/// (`0.29 · 100` evaluates to `28.999…`).
pub fn prune_count_from_fraction(d_in: usize, s: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidConfig(format!("sparsity {s} outside [0, 1]")));
    }
    Ok(((s * d_in as f64 + 1e-9).floor() as usize).min(d_in))
}
