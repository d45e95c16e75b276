//! Layer-wise pruning mask selection by exact greedy 1-swap refinement.
//!
//! Given a weight matrix `W`, calibration activations `X` (through their Gram
//! matrix `G = XXᵀ`) and any feasible warm-start mask, the engine repeatedly
//! exchanges one kept and one pruned weight per row, always taking the swap
//! that lowers `‖WX − (M⊙W)X‖_F²` the most, until no swap helps or the
//! iteration budget runs out. Per-row and N:M constraints are preserved by
//! every swap.
//!
//! Modules:
//! - [`tensorio`]: matrices, masks and the SSWT file format
//! - [`gram`]: Gram accumulation and the SVD compression check
//! - [`objective`]: exact row and layer losses
//! - [`warmstart`]: constraints, importance scores and initial masks
//! - [`swapengine`]: the refinement itself
//! - [`oracle`]: exhaustive reference solvers for small rows
//! - [`synth`]: synthetic layers and relative error reduction
//! - [`bench`]: criterion × iteration sweeps over synthetic layers

pub mod bench;
pub mod error;
pub mod gram;
pub mod objective;
pub mod oracle;
pub mod report;
pub mod swapengine;
pub mod synth;
pub mod tensorio;
pub mod warmstart;

pub use error::{Error, Result};
pub use gram::{accumulate_gram, feature_norms, svd_equivalence_check, GramMatrix, SvdCheckReport};
pub use objective::{full_loss, row_loss_direct, row_loss_gram, LayerLoss, RowLossBreakdown};
pub use oracle::{brute_force_row, enumerate_swap_deltas, is_one_swap_optimal, OracleResult};
pub use report::{LayerSummary, RefineReport, RowRecord};
pub use swapengine::{
    greedy_separate_baseline, init_correlation, refine_matrix, refine_row, refine_row_observed, RefineConfig,
    RowRefinement, RowState, SwapDecision, Termination,
};
pub use synth::{generate_layer, relative_error_reduction, SynthConfig};
pub use tensorio::{load_mask, load_matrix, save_mask, save_matrix, CalibrationMeta, DenseMatrix, PruningMask};
pub use warmstart::{
    prune_count_from_fraction, score_magnitude, score_ria, score_wanda, select_mask, warm_start, Criterion,
    ScoreMatrix, SparsityConstraint,
};
