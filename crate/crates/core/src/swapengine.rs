//! Greedy 1-swap refinement of pruning masks.
//!
//! For one row with weights `w`, mask `m`, pruned set `P = {j : m_j = 0}` and
//! kept set `U = {j : m_j = 1}`, the loss is `‖r‖²` with residual
//! `r = Σ_{j∈P} w_j φ_j` (`φ_j` the j-th feature row of the activations).
//! The engine tracks the correlation vector `c = G · ((1 − m) ⊙ w)`, i.e.
//! `c_i = ⟨φ_i, r⟩`, which makes the exact loss change of pruning `u ∈ U`
//! while restoring `p ∈ P` a handful of lookups:
//!
//! ```text
//! ΔL(u, p) = 2 w_u c_u + w_u² G_uu − 2 w_p c_p + w_p² G_pp − 2 w_u w_p G_up
//!          = a_u + b_p − 2 w_u w_p G_up
//! ```
//!
//! After accepting `(u, p)` the correlation vector moves by two columns of
//! `G`: `c ← c + w_u G_{:,u} − w_p G_{:,p}`.
//!
//! Each iteration takes the single best feasible swap and accepts it only if
//! `ΔL < −ε`. Rows never interact, so a layer is refined row by row in
//! parallel with results independent of scheduling.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::GramMatrix;
use crate::objective::row_loss_gram;
use crate::report::{RefineReport, RowRecord};
use crate::tensorio::{DenseMatrix, PruningMask};
use crate::warmstart::SparsityConstraint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Maximum swap iterations per row.
    pub t_max: usize,
    /// A swap is accepted iff `ΔL < −accept_threshold`.
    pub accept_threshold: f64,
}

impl RefineConfig {
    pub fn new(t_max: usize, accept_threshold: f64) -> Result<Self> {
        if !(accept_threshold >= 0.0 && accept_threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!("accept threshold {accept_threshold} must be finite and >= 0")));
        }
        Ok(Self { t_max, accept_threshold })
    }
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self { t_max: 100, accept_threshold: 0.0 }
    }
}

/// Prune `u`, restore `p`, changing the loss by `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapDecision {
    pub u: usize,
    pub p: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// No feasible swap improves the loss by more than the threshold.
    LocalOptimum,
    /// The pruned or kept set is empty, so no swap exists.
    NoCandidates,
    /// `t_max` iterations were spent.
    IterationLimit,
}

/// `c = G · ((1 − m) ⊙ w)`.
pub fn init_correlation(w: &[f64], m: &[bool], g: &GramMatrix) -> Result<Vec<f64>> {
    let d = g.dim();
    if w.len() != d || m.len() != d {
        return Err(Error::shape(format!("row of length {}/{} against {d}-dim gram", w.len(), m.len())));
    }
    let mut c = vec![0.0; d];
    for (j, (&wj, &keep)) in w.iter().zip(m).enumerate() {
        if keep || wj == 0.0 {
            continue;
        }
        // G is symmetric, so row j is column j.
        for (ci, &gij) in c.iter_mut().zip(g.row(j)) {
            *ci += wj * gij;
        }
    }
    Ok(c)
}

/// One row under refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RowState {
    w: Vec<f64>,
    mask: Vec<bool>,
    pruned: Vec<usize>,
    unpruned: Vec<usize>,
    corr: Vec<f64>,
}

impl RowState {
    pub fn new(w: &[f64], mask: &[bool], g: &GramMatrix) -> Result<Self> {
        let corr = init_correlation(w, mask, g)?;
        let (unpruned, pruned): (Vec<usize>, Vec<usize>) = (0..mask.len()).partition(|&j| mask[j]);
        Ok(Self { w: w.to_vec(), mask: mask.to_vec(), pruned, unpruned, corr })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Pruned indices, ascending.
    pub fn pruned(&self) -> &[usize] {
        &self.pruned
    }

    /// Kept indices, ascending.
    pub fn unpruned(&self) -> &[usize] {
        &self.unpruned
    }

    pub fn correlation(&self) -> &[f64] {
        &self.corr
    }

    pub fn into_mask(self) -> Vec<bool> {
        self.mask
    }

    /// Loss change from pruning kept index `u` alone: `2 w_u c_u + w_u² G_uu`.
    #[inline]
    fn prune_term(&self, u: usize, g: &GramMatrix) -> f64 {
        let wu = self.w[u];
        2.0 * wu * self.corr[u] + wu * wu * g.get(u, u)
    }

    /// Loss change from restoring pruned index `p` alone: `−2 w_p c_p + w_p² G_pp`.
    #[inline]
    fn restore_term(&self, p: usize, g: &GramMatrix) -> f64 {
        let wp = self.w[p];
        -2.0 * wp * self.corr[p] + wp * wp * g.get(p, p)
    }

    fn check_pair(&self, u: usize, p: usize) -> Result<()> {
        if self.unpruned.binary_search(&u).is_err() {
            return Err(Error::IndexNotInSet { index: u, set: "kept" });
        }
        if self.pruned.binary_search(&p).is_err() {
            return Err(Error::IndexNotInSet { index: p, set: "pruned" });
        }
        Ok(())
    }

    /// Exact loss change of pruning `u` and restoring `p`.
    pub fn swap_delta(&self, u: usize, p: usize, g: &GramMatrix) -> Result<f64> {
        self.check_pair(u, p)?;
        let (wu, wp) = (self.w[u], self.w[p]);
        Ok(self.prune_term(u, g) + self.restore_term(p, g) - 2.0 * wu * wp * g.get(u, p))
    }

    /// Best swap with both indices in `lo..hi`; ties keep the smallest `(u, p)`.
    fn best_in_range(&self, lo: usize, hi: usize, g: &GramMatrix, best: &mut Option<SwapDecision>) {
        let in_range = |set: &[usize]| {
            let a = set.partition_point(|&j| j < lo);
            let b = set.partition_point(|&j| j < hi);
            (a, b)
        };
        let (pa, pb) = in_range(&self.pruned);
        let (ua, ub) = in_range(&self.unpruned);
        let pruned = &self.pruned[pa..pb];
        if pruned.is_empty() || ua == ub {
            return;
        }
        let restore: Vec<f64> = pruned.iter().map(|&p| self.restore_term(p, g)).collect();
        let wp: Vec<f64> = pruned.iter().map(|&p| self.w[p]).collect();

        for &u in &self.unpruned[ua..ub] {
            let a = self.prune_term(u, g);
            let two_wu = 2.0 * self.w[u];
            let gu = g.row(u);
            for ((&p, &b), &w_p) in pruned.iter().zip(&restore).zip(&wp) {
                let delta = a + b - two_wu * w_p * gu[p];
                if best.is_none_or(|d| delta < d.delta) {
                    *best = Some(SwapDecision { u, p, delta });
                }
            }
        }
    }

    /// The feasible swap with the smallest `ΔL`, or `None` when no swap exists.
    ///
    /// Under N:M sparsity both indices come from the same block.
    pub fn best_swap(&self, g: &GramMatrix, constraint: &SparsityConstraint) -> Option<SwapDecision> {
        let d = self.w.len();
        let width = constraint.group_width(d).max(1);
        let mut best = None;
        for lo in (0..d).step_by(width) {
            self.best_in_range(lo, (lo + width).min(d), g, &mut best);
        }
        best
    }

    /// Flips `u` to pruned and `p` to kept and moves `c` by two Gram columns.
    pub fn apply_swap(&mut self, decision: &SwapDecision, g: &GramMatrix) -> Result<()> {
        let (u, p) = (decision.u, decision.p);
        self.check_pair(u, p)?;
        self.mask[u] = false;
        self.mask[p] = true;
        move_index(&mut self.unpruned, &mut self.pruned, u);
        move_index(&mut self.pruned, &mut self.unpruned, p);

        let (wu, wp) = (self.w[u], self.w[p]);
        if wu != 0.0 || wp != 0.0 {
            for ((ci, &gu), &gp) in self.corr.iter_mut().zip(g.row(u)).zip(g.row(p)) {
                *ci = *ci + wu * gu - wp * gp;
            }
        }
        Ok(())
    }
}

/// Moves `j` from sorted `from` into sorted `to`.
fn move_index(from: &mut Vec<usize>, to: &mut Vec<usize>, j: usize) {
    let at = from.binary_search(&j).expect("index present");
    from.remove(at);
    let at = to.binary_search(&j).unwrap_err();
    to.insert(at, j);
}

/// Free-function form of [`RowState::swap_delta`].
pub fn swap_delta(state: &RowState, u: usize, p: usize, g: &GramMatrix) -> Result<f64> {
    state.swap_delta(u, p, g)
}

pub fn best_swap(state: &RowState, g: &GramMatrix, constraint: &SparsityConstraint) -> Option<SwapDecision> {
    state.best_swap(g, constraint)
}

pub fn apply_swap(state: &mut RowState, decision: &SwapDecision, g: &GramMatrix) -> Result<()> {
    state.apply_swap(decision, g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowRefinement {
    pub mask: Vec<bool>,
    /// Loss before any swap, then after each accepted swap (running sum of
    /// the accepted deltas).
    pub trace: Vec<f64>,
    pub swaps: Vec<SwapDecision>,
    pub termination: Termination,
}

impl RowRefinement {
    pub fn initial_loss(&self) -> f64 {
        self.trace[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.trace.last().unwrap()
    }
}

pub fn refine_row(
    w: &[f64],
    m_init: &[bool],
    g: &GramMatrix,
    constraint: &SparsityConstraint,
    cfg: &RefineConfig,
) -> Result<RowRefinement> {
    refine_row_observed(w, m_init, g, constraint, cfg, |_, _| {})
}

/// [`refine_row`] with a callback invoked after every accepted swap.
pub fn refine_row_observed<F>(
    w: &[f64],
    m_init: &[bool],
    g: &GramMatrix,
    constraint: &SparsityConstraint,
    cfg: &RefineConfig,
    mut on_swap: F,
) -> Result<RowRefinement>
where
    F: FnMut(&RowState, &SwapDecision),
{
    if let Some(reason) = constraint.violation(m_init) {
        return Err(Error::InfeasibleWarmstart { row: 0, reason });
    }
    let mut state = RowState::new(w, m_init, g)?;
    let mut loss = row_loss_gram(w, m_init, g)?;
    let mut trace = vec![loss];
    let mut swaps = Vec::new();
    let mut termination = Termination::IterationLimit;

    for _ in 0..cfg.t_max {
        match state.best_swap(g, constraint) {
            None => {
                termination = Termination::NoCandidates;
                break;
            }
            Some(d) if d.delta < -cfg.accept_threshold => {
                state.apply_swap(&d, g)?;
                loss += d.delta;
                trace.push(loss);
                swaps.push(d);
                on_swap(&state, &d);
            }
            Some(_) => {
                termination = Termination::LocalOptimum;
                break;
            }
        }
    }

    Ok(RowRefinement { mask: state.into_mask(), trace, swaps, termination })
}

/// Refines every row of a layer independently.
pub fn refine_matrix(
    w: &DenseMatrix,
    m_init: &PruningMask,
    g: &GramMatrix,
    constraint: &SparsityConstraint,
    cfg: &RefineConfig,
) -> Result<(PruningMask, RefineReport)> {
    if w.shape() != m_init.shape() {
        return Err(Error::shape(format!(
            "weights are {}x{} but mask is {}x{}",
            w.rows(),
            w.cols(),
            m_init.rows(),
            m_init.cols()
        )));
    }
    if w.cols() != g.dim() {
        return Err(Error::shape(format!("weights have {} columns, gram is {}-dim", w.cols(), g.dim())));
    }
    constraint.validate(w.cols())?;
    constraint.check_mask(m_init)?;

    let start = Instant::now();
    let rows: Vec<(RowRefinement, f64)> = (0..w.rows())
        .into_par_iter()
        .map(|i| {
            let r = refine_row(w.row(i), m_init.row(i), g, constraint, cfg)?;
            let after = row_loss_gram(w.row(i), &r.mask, g)?;
            Ok((r, after))
        })
        .collect::<Result<_>>()?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut mask = m_init.clone();
    let mut records = Vec::with_capacity(rows.len());
    for (i, (r, after)) in rows.into_iter().enumerate() {
        mask.row_mut(i).copy_from_slice(&r.mask);
        records.push(RowRecord::new(i, r.initial_loss(), after, r.swaps.len(), r.termination));
    }
    Ok((mask, RefineReport::from_rows(records, wall_time_ms)))
}

/// One swap chosen by judging `p` and `u` in isolation: restore the `p`
/// with the best standalone effect, then prune the `u` with the best
/// standalone effect against the original residual. Ignores the interaction
/// term `−2 w_u w_p G_up`; kept only to exhibit that failure mode.
pub fn greedy_separate_baseline(w: &[f64], m: &[bool], g: &GramMatrix) -> Result<(Vec<bool>, f64)> {
    let state = RowState::new(w, m, g)?;
    let argmin = |set: &[usize], f: &dyn Fn(usize) -> f64| {
        set.iter().copied().fold(None, |best: Option<(usize, f64)>, j| {
            let v = f(j);
            match best {
                Some((_, bv)) if bv <= v => best,
                _ => Some((j, v)),
            }
        })
    };
    let (p, _) = argmin(&state.pruned, &|p| state.restore_term(p, g)).ok_or(Error::EmptySet("pruned"))?;
    let (u, _) = argmin(&state.unpruned, &|u| state.prune_term(u, g)).ok_or(Error::EmptySet("kept"))?;
    let mut mask = m.to_vec();
    mask[p] = true;
    mask[u] = false;
    let loss = row_loss_gram(w, &mask, g)?;
    Ok((mask, loss))
}
