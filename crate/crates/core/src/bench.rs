//! Synthetic sweep over warm-start criteria and iteration budgets.
//!
//! Each layer is generated from the synthetic model, its Gram matrix
//! accumulated, warm-started with every criterion and refined once per
//! iteration budget from that same warm start.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::accumulate_gram;
use crate::swapengine::{refine_matrix, RefineConfig};
use crate::synth::{generate_layer, SynthConfig};
use crate::warmstart::{prune_count_from_fraction, warm_start, Criterion, SparsityConstraint, DEFAULT_RIA_EXPONENT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub synth: SynthConfig,
    /// Independent layers; layer `l` uses seed `synth.seed + l`.
    pub layers: usize,
    /// Per-row sparsity used when `constraint` is absent.
    pub sparsity: f64,
    pub constraint: Option<SparsityConstraint>,
    pub criteria: Vec<Criterion>,
    pub t_max: Vec<usize>,
    pub epsilon: f64,
    pub ria_exponent: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            layers: 1,
            sparsity: 0.6,
            constraint: None,
            criteria: vec![Criterion::Wanda],
            t_max: vec![1, 2, 5, 10, 25, 50, 100],
            epsilon: 0.0,
            ria_exponent: DEFAULT_RIA_EXPONENT,
        }
    }
}

impl BenchConfig {
    pub fn resolved_constraint(&self) -> Result<SparsityConstraint> {
        let c = match self.constraint {
            Some(c) => c,
            None => {
                SparsityConstraint::PerRow { prune_count: prune_count_from_fraction(self.synth.d_in, self.sparsity)? }
            }
        };
        c.validate(self.synth.d_in)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        if self.layers == 0 {
            return Err(Error::InvalidConfig("layers must be >= 1".into()));
        }
        if self.criteria.is_empty() {
            return Err(Error::InvalidConfig("no criteria given".into()));
        }
        if self.t_max.is_empty() {
            return Err(Error::InvalidConfig("no t_max values given".into()));
        }
        RefineConfig::new(0, self.epsilon)?;
        self.resolved_constraint().map(|_| ())
    }
}

/// One record per (layer, criterion, t_max, row).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub layer: usize,
    pub criterion: Criterion,
    pub t_max: usize,
    pub row: usize,
    pub loss_warm: f64,
    pub loss_refined: f64,
    pub swaps: usize,
    pub reduction_pct: Option<f64>,
}

/// Aggregate over one group of records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub criterion: Criterion,
    pub t_max: usize,
    /// `None` for the aggregate across all layers.
    pub layer: Option<usize>,
    pub rows: usize,
    pub total_warm: f64,
    pub total_refined: f64,
    pub mean_reduction_pct: Option<f64>,
    pub layer_reduction_pct: Option<f64>,
    pub rows_improved: usize,
    pub refine_time_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub generate_ms: f64,
    pub gram_ms: f64,
    pub warmstart_ms: f64,
    pub refine_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub constraint: SparsityConstraint,
    pub records: Vec<BenchRecord>,
    /// One entry per (criterion, t_max), aggregated over layers.
    pub summaries: Vec<BenchSummary>,
    /// One entry per (criterion, t_max, layer).
    pub per_layer: Vec<BenchSummary>,
    pub times: PhaseTimes,
}

fn summarize(
    records: &[&BenchRecord],
    criterion: Criterion,
    t_max: usize,
    layer: Option<usize>,
    refine_time_ms: f64,
) -> BenchSummary {
    let total_warm: f64 = records.iter().map(|r| r.loss_warm).sum();
    let total_refined: f64 = records.iter().map(|r| r.loss_refined).sum();
    let reductions: Vec<f64> = records.iter().filter_map(|r| r.reduction_pct).collect();
    BenchSummary {
        criterion,
        t_max,
        layer,
        rows: records.len(),
        total_warm,
        total_refined,
        mean_reduction_pct: (!reductions.is_empty()).then(|| reductions.iter().sum::<f64>() / reductions.len() as f64),
        layer_reduction_pct: (total_warm > 0.0).then(|| 100.0 * (total_warm - total_refined) / total_warm),
        rows_improved: records.iter().filter(|r| r.loss_refined < r.loss_warm).count(),
        refine_time_ms,
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let constraint = cfg.resolved_constraint()?;
    let mut times = PhaseTimes::default();
    let mut records = Vec::new();
    let mut refine_times = Vec::new();

    for layer in 0..cfg.layers {
        let synth = SynthConfig { seed: cfg.synth.seed.wrapping_add(layer as u64), ..cfg.synth };
        let t = Instant::now();
        let (w, x) = generate_layer(&synth)?;
        times.generate_ms += elapsed_ms(t);

        let t = Instant::now();
        let g = accumulate_gram(&[x])?;
        times.gram_ms += elapsed_ms(t);

        for &criterion in &cfg.criteria {
            let t = Instant::now();
            let warm = warm_start(&w, &g, criterion, &constraint, cfg.ria_exponent)?;
            times.warmstart_ms += elapsed_ms(t);

            for &t_max in &cfg.t_max {
                let refine_cfg = RefineConfig::new(t_max, cfg.epsilon)?;
                let (_, report) = refine_matrix(&w, &warm, &g, &constraint, &refine_cfg)?;
                times.refine_ms += report.summary.wall_time_ms;
                refine_times.push(((layer, criterion, t_max), report.summary.wall_time_ms));
                records.extend(report.rows.iter().map(|r| BenchRecord {
                    layer,
                    criterion,
                    t_max,
                    row: r.row,
                    loss_warm: r.loss_before,
                    loss_refined: r.loss_after,
                    swaps: r.swaps,
                    reduction_pct: r.reduction_pct,
                }));
            }
        }
    }

    let time_of = |layer: Option<usize>, criterion: Criterion, t_max: usize| -> f64 {
        refine_times
            .iter()
            .filter(|((l, c, t), _)| layer.is_none_or(|x| x == *l) && *c == criterion && *t == t_max)
            .map(|(_, ms)| ms)
            .sum()
    };
    let mut summaries = Vec::new();
    let mut per_layer = Vec::new();
    for &criterion in &cfg.criteria {
        for &t_max in &cfg.t_max {
            let group: Vec<&BenchRecord> =
                records.iter().filter(|r| r.criterion == criterion && r.t_max == t_max).collect();
            summaries.push(summarize(&group, criterion, t_max, None, time_of(None, criterion, t_max)));
            for layer in 0..cfg.layers {
                let sub: Vec<&BenchRecord> = group.iter().copied().filter(|r| r.layer == layer).collect();
                per_layer.push(summarize(&sub, criterion, t_max, Some(layer), time_of(Some(layer), criterion, t_max)));
            }
        }
    }

    Ok(BenchResult { constraint, records, summaries, per_layer, times })
}
