//! Per-row and per-layer outcome of a refinement run.

use serde::Serialize;

use crate::swapengine::Termination;
use crate::synth::relative_error_reduction;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowRecord {
    pub row: usize,
    pub loss_before: f64,
    pub loss_after: f64,
    pub swaps: usize,
    /// `100 · (before − after) / before`; absent when `before` is zero.
    pub reduction_pct: Option<f64>,
    pub termination: Termination,
}

impl RowRecord {
    pub fn new(row: usize, loss_before: f64, loss_after: f64, swaps: usize, termination: Termination) -> Self {
        let reduction_pct = (loss_before > 0.0).then(|| 100.0 * (loss_before - loss_after) / loss_before);
        Self { row, loss_before, loss_after, swaps, reduction_pct, termination }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerSummary {
    pub total_before: f64,
    pub total_after: f64,
    /// Mean of the per-row reductions over rows with nonzero warm-start loss.
    pub mean_reduction_pct: Option<f64>,
    /// Reduction of the summed layer loss.
    pub layer_reduction_pct: Option<f64>,
    pub rows_improved: usize,
    /// Rows excluded from the mean because their warm-start loss was zero.
    pub zero_loss_rows: Vec<usize>,
    pub total_swaps: usize,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineReport {
    pub rows: Vec<RowRecord>,
    pub summary: LayerSummary,
}

impl RefineReport {
    pub fn from_rows(rows: Vec<RowRecord>, wall_time_ms: f64) -> Self {
        let before: Vec<f64> = rows.iter().map(|r| r.loss_before).collect();
        let after: Vec<f64> = rows.iter().map(|r| r.loss_after).collect();
        let reduction = relative_error_reduction(&before, &after).expect("equal lengths");
        let total_before: f64 = before.iter().sum();
        let total_after: f64 = after.iter().sum();
        let summary = LayerSummary {
            total_before,
            total_after,
            mean_reduction_pct: reduction.mean_pct,
            layer_reduction_pct: (total_before > 0.0).then(|| 100.0 * (total_before - total_after) / total_before),
            rows_improved: rows.iter().filter(|r| r.loss_after < r.loss_before).count(),
            zero_loss_rows: reduction.excluded_rows,
            total_swaps: rows.iter().map(|r| r.swaps).sum(),
            wall_time_ms,
        };
        Self { rows, summary }
    }
}
