use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sparseswaps::bench::{run_bench, BenchConfig, BenchSummary};
use sparseswaps::oracle::brute_force_row;
use sparseswaps::{
    accumulate_gram, full_loss, generate_layer, is_one_swap_optimal, load_mask, load_matrix, refine_matrix,
    row_loss_gram, save_mask, save_matrix, warm_start, Criterion, DenseMatrix, GramMatrix, RefineConfig, RowRecord,
    SparsityConstraint, SynthConfig,
};

use crate::config::{required, resolve_constraint, FileConfig};
use crate::output::{artifact, ensure_dir, print_json, write_csv, write_json, Artifact, Envelope};
use crate::{BenchArgs, CliError, EvalArgs, GramArgs, OracleArgs, RefineArgs, SynthArgs, SynthFlags, WarmstartArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn load_gram(path: &Path) -> Result<GramMatrix, CliError> {
    Ok(GramMatrix::from_matrix(load_matrix(path)?)?)
}

fn check_dims(w: &DenseMatrix, g: &GramMatrix) -> Result<(), CliError> {
    if w.cols() != g.dim() {
        return Err(sparseswaps::Error::ShapeMismatch(format!(
            "weights have {} columns, gram is {}x{}",
            w.cols(),
            g.dim(),
            g.dim()
        ))
        .into());
    }
    Ok(())
}

/// Weights and Gram matrix shared by most commands.
fn load_layer(
    weights: Option<PathBuf>,
    gram: Option<PathBuf>,
    file: &FileConfig,
    artifacts: &mut Vec<Artifact>,
) -> Result<(DenseMatrix, GramMatrix, PathBuf, PathBuf), CliError> {
    let wp = required(weights, file.weights.clone(), "weights")?;
    let gp = required(gram, file.gram.clone(), "gram")?;
    let w = load_matrix(&wp)?;
    let g = load_gram(&gp)?;
    check_dims(&w, &g)?;
    artifacts.push(artifact("weights", &wp)?);
    artifacts.push(artifact("gram", &gp)?);
    Ok((w, g, wp, gp))
}

// ---------------------------------------------------------------- gram

#[derive(Serialize)]
struct GramConfig {
    activations: Vec<PathBuf>,
    out: PathBuf,
}

#[derive(Serialize)]
struct GramBody {
    d_in: usize,
    total_cols: usize,
    blocks: usize,
    trace: f64,
    gram_ms: f64,
}

pub fn gram(args: GramArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let activations = if args.activations.is_empty() { file.activations.clone() } else { Some(args.activations) };
    let cfg = GramConfig {
        activations: required(activations, None, "activations")?,
        out: required(args.out, file.out.clone(), "out")?,
    };
    if cfg.activations.is_empty() {
        return Err(CliError::usage("no activation blocks given"));
    }
    let mut artifacts = Vec::new();
    let mut blocks = Vec::with_capacity(cfg.activations.len());
    for p in &cfg.activations {
        blocks.push(load_matrix(p)?);
        artifacts.push(artifact("activations", p)?);
    }
    let t = Instant::now();
    let g = accumulate_gram(&blocks)?;
    let gram_ms = ms(t);
    save_matrix(g.as_matrix(), &cfg.out)?;
    artifacts.push(artifact("gram", &cfg.out)?);

    let body = GramBody {
        d_in: g.dim(),
        total_cols: blocks.iter().map(DenseMatrix::cols).sum(),
        blocks: blocks.len(),
        trace: g.trace(),
        gram_ms,
    };
    print_json(&Envelope {
        command: "gram",
        version: VERSION,
        seed: args.common.seed.or(file.seed).unwrap_or(0),
        config: &cfg,
        artifacts: &artifacts,
        body,
    })
}

// ----------------------------------------------------------- warmstart

#[derive(Serialize)]
struct WarmstartConfig {
    weights: PathBuf,
    gram: PathBuf,
    criterion: Criterion,
    constraint: SparsityConstraint,
    ria_exponent: f64,
    mask_out: PathBuf,
}

#[derive(Serialize)]
struct WarmstartBody {
    sparsity: f64,
    pruned: usize,
    total: usize,
    loss: f64,
    warmstart_ms: f64,
}

pub fn warmstart(args: WarmstartArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let mut artifacts = Vec::new();
    let (w, g, weights, gram) = load_layer(args.weights, args.gram, &file, &mut artifacts)?;
    let cfg = WarmstartConfig {
        weights,
        gram,
        criterion: required(args.criterion, file.criterion, "criterion")?,
        constraint: resolve_constraint(
            args.constraint,
            file.constraint.as_deref(),
            args.sparsity.or(file.sparsity),
            w.cols(),
        )?,
        ria_exponent: args.ria_exponent.or(file.ria_exponent).unwrap_or(sparseswaps::warmstart::DEFAULT_RIA_EXPONENT),
        mask_out: required(args.mask_out, file.mask_out.clone(), "mask-out")?,
    };
    let t = Instant::now();
    let mask = warm_start(&w, &g, cfg.criterion, &cfg.constraint, cfg.ria_exponent)?;
    let warmstart_ms = ms(t);
    let loss = full_loss(&w, &mask, &g)?.total;
    save_mask(&mask, &cfg.mask_out)?;
    artifacts.push(artifact("mask_out", &cfg.mask_out)?);
    let body = WarmstartBody {
        sparsity: mask.sparsity(),
        pruned: mask.pruned_count(),
        total: mask.bits().len(),
        loss,
        warmstart_ms,
    };
    print_json(&Envelope {
        command: "warmstart",
        version: VERSION,
        seed: args.common.seed.or(file.seed).unwrap_or(0),
        config: &cfg,
        artifacts: &artifacts,
        body,
    })
}

// -------------------------------------------------------------- refine

#[derive(Serialize)]
struct RefineRunConfig {
    weights: PathBuf,
    gram: PathBuf,
    mask_in: PathBuf,
    constraint: SparsityConstraint,
    t_max: usize,
    epsilon: f64,
    mask_out: PathBuf,
    report: Option<PathBuf>,
}

#[derive(Serialize)]
struct RefineTimes {
    load_ms: f64,
    refine_ms: f64,
}

#[derive(Serialize)]
struct RefineBody<'a> {
    times: RefineTimes,
    report: &'a sparseswaps::RefineReport,
}

pub fn refine(args: RefineArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let t_load = Instant::now();
    let mut artifacts = Vec::new();
    let (w, g, weights, gram) = load_layer(args.weights, args.gram, &file, &mut artifacts)?;
    let mask_in = required(args.mask_in, file.mask_in.clone(), "mask-in")?;
    let m0 = load_mask(&mask_in)?;
    artifacts.push(artifact("mask_in", &mask_in)?);
    let t_max = match (args.t_max, file.t_max.clone()) {
        (Some(t), _) => t,
        (None, Some(t)) => match t.into_vec().as_slice() {
            [t] => *t,
            _ => return Err(CliError::usage("refine takes a single t_max")),
        },
        (None, None) => RefineConfig::default().t_max,
    };
    let cfg = RefineRunConfig {
        weights,
        gram,
        mask_in,
        constraint: resolve_constraint(
            args.constraint,
            file.constraint.as_deref(),
            args.sparsity.or(file.sparsity),
            w.cols(),
        )?,
        t_max,
        epsilon: args.epsilon.or(file.epsilon).unwrap_or(0.0),
        mask_out: required(args.mask_out, file.mask_out.clone(), "mask-out")?,
        report: args.report.or(file.report.clone()),
    };
    let load_ms = ms(t_load);
    let refine_cfg = RefineConfig::new(cfg.t_max, cfg.epsilon)?;
    let (mask, report) = refine_matrix(&w, &m0, &g, &cfg.constraint, &refine_cfg)?;
    save_mask(&mask, &cfg.mask_out)?;
    artifacts.push(artifact("mask_out", &cfg.mask_out)?);

    if let Some(path) = &cfg.report {
        let csv_path = path.with_extension("csv");
        write_csv(report.rows.iter().map(RefineCsvRow::from), &csv_path)?;
        artifacts.push(artifact("report_csv", &csv_path)?);
        let times = RefineTimes { load_ms, refine_ms: report.summary.wall_time_ms };
        write_json(
            &Envelope {
                command: "refine",
                version: VERSION,
                seed: args.common.seed.or(file.seed).unwrap_or(0),
                config: &cfg,
                artifacts: &artifacts,
                body: RefineBody { times, report: &report },
            },
            path,
        )?;
    }
    print_json(&report.summary)
}

#[derive(Serialize)]
struct RefineCsvRow {
    row: usize,
    loss_before: f64,
    loss_after: f64,
    swaps: usize,
    reduction_pct: Option<f64>,
    termination: sparseswaps::Termination,
}

impl From<&RowRecord> for RefineCsvRow {
    fn from(r: &RowRecord) -> Self {
        Self {
            row: r.row,
            loss_before: r.loss_before,
            loss_after: r.loss_after,
            swaps: r.swaps,
            reduction_pct: r.reduction_pct,
            termination: r.termination,
        }
    }
}

// ---------------------------------------------------------------- eval

#[derive(Serialize)]
struct EvalConfig {
    weights: PathBuf,
    gram: PathBuf,
    mask_in: PathBuf,
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let mut artifacts = Vec::new();
    let (w, g, weights, gram) = load_layer(args.weights, args.gram, &file, &mut artifacts)?;
    let mask_in = required(args.mask_in, file.mask_in.clone(), "mask-in")?;
    let mask = load_mask(&mask_in)?;
    artifacts.push(artifact("mask_in", &mask_in)?);
    let loss = full_loss(&w, &mask, &g)?;
    print_json(&Envelope {
        command: "eval",
        version: VERSION,
        seed: args.common.seed.or(file.seed).unwrap_or(0),
        config: &EvalConfig { weights, gram, mask_in },
        artifacts: &artifacts,
        body: loss,
    })
}

// -------------------------------------------------------------- oracle

#[derive(Serialize)]
struct OracleConfig {
    weights: PathBuf,
    gram: PathBuf,
    constraint: SparsityConstraint,
    mask_in: Option<PathBuf>,
    epsilon: f64,
}

#[derive(Serialize)]
struct OracleRow {
    row: usize,
    optimum_loss: f64,
    optimum_mask: String,
    n_evaluated: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    one_swap_optimal: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
}

#[derive(Serialize)]
struct OracleBody {
    total_optimum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    total_mask_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    all_one_swap_optimal: Option<bool>,
    rows: Vec<OracleRow>,
    oracle_ms: f64,
}

fn bits_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn oracle(args: OracleArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let mut artifacts = Vec::new();
    let (w, g, weights, gram) = load_layer(args.weights, args.gram, &file, &mut artifacts)?;
    let cfg = OracleConfig {
        weights,
        gram,
        constraint: resolve_constraint(
            args.constraint,
            file.constraint.as_deref(),
            args.sparsity.or(file.sparsity),
            w.cols(),
        )?,
        mask_in: args.mask_in.or(file.mask_in.clone()),
        epsilon: args.epsilon.or(file.epsilon).unwrap_or(0.0),
    };
    if !(cfg.epsilon >= 0.0 && cfg.epsilon.is_finite()) {
        return Err(CliError::usage(format!("epsilon {} must be finite and >= 0", cfg.epsilon)));
    }
    let mask = match &cfg.mask_in {
        Some(p) => {
            let m = load_mask(p)?;
            artifacts.push(artifact("mask_in", p)?);
            if m.shape() != w.shape() {
                return Err(sparseswaps::Error::ShapeMismatch(format!(
                    "mask is {}x{}, weights are {}x{}",
                    m.rows(),
                    m.cols(),
                    w.rows(),
                    w.cols()
                ))
                .into());
            }
            cfg.constraint.check_mask(&m)?;
            Some(m)
        }
        None => None,
    };

    let t = Instant::now();
    let mut rows = Vec::with_capacity(w.rows());
    for i in 0..w.rows() {
        let opt = brute_force_row(w.row(i), &g, &cfg.constraint)?;
        let (mask_loss, one_swap_optimal, gap) = match &mask {
            Some(m) => {
                let l = row_loss_gram(w.row(i), m.row(i), &g)?;
                let ok = is_one_swap_optimal(w.row(i), m.row(i), &g, &cfg.constraint, cfg.epsilon)?;
                (Some(l), Some(ok), Some(l - opt.best_loss))
            }
            None => (None, None, None),
        };
        rows.push(OracleRow {
            row: i,
            optimum_loss: opt.best_loss,
            optimum_mask: bits_string(&opt.best_mask),
            n_evaluated: opt.n_evaluated,
            mask_loss,
            one_swap_optimal,
            gap,
        });
    }
    let body = OracleBody {
        total_optimum: rows.iter().map(|r| r.optimum_loss).sum(),
        total_mask_loss: mask.as_ref().map(|_| rows.iter().filter_map(|r| r.mask_loss).sum()),
        all_one_swap_optimal: mask.as_ref().map(|_| rows.iter().all(|r| r.one_swap_optimal == Some(true))),
        rows,
        oracle_ms: ms(t),
    };
    let env = Envelope {
        command: "oracle",
        version: VERSION,
        seed: args.common.seed.or(file.seed).unwrap_or(0),
        config: &cfg,
        artifacts: &artifacts,
        body,
    };
    if let Some(p) = args.report.or(file.report.clone()) {
        write_json(&env, &p)?;
    }
    print_json(&env)
}

// --------------------------------------------------------------- bench

fn synth_config(flags: &SynthFlags, file: &FileConfig, seed: Option<u64>) -> SynthConfig {
    let d = SynthConfig::default();
    SynthConfig {
        d_in: flags.d_in.or(file.d_in).unwrap_or(d.d_in),
        d_out: flags.d_out.or(file.d_out).unwrap_or(d.d_out),
        n_cols: flags.n_cols.or(file.n_cols).unwrap_or(d.n_cols),
        corr_rank: flags.corr_rank.or(file.corr_rank).unwrap_or(d.corr_rank),
        outlier_count: flags.outlier_count.or(file.outlier_count).unwrap_or(d.outlier_count),
        outlier_scale: flags.outlier_scale.or(file.outlier_scale).unwrap_or(d.outlier_scale),
        seed: seed.or(file.seed).unwrap_or(d.seed),
    }
}

/// Aggregation row without timings, so the CSV is reproducible.
#[derive(Serialize)]
struct LayerCsvRow {
    layer: usize,
    criterion: Criterion,
    t_max: usize,
    rows: usize,
    total_warm: f64,
    total_refined: f64,
    mean_reduction_pct: Option<f64>,
    layer_reduction_pct: Option<f64>,
    rows_improved: usize,
}

impl From<&BenchSummary> for LayerCsvRow {
    fn from(s: &BenchSummary) -> Self {
        Self {
            layer: s.layer.unwrap_or(0),
            criterion: s.criterion,
            t_max: s.t_max,
            rows: s.rows,
            total_warm: s.total_warm,
            total_refined: s.total_refined,
            mean_reduction_pct: s.mean_reduction_pct,
            layer_reduction_pct: s.layer_reduction_pct,
            rows_improved: s.rows_improved,
        }
    }
}

#[derive(Serialize)]
struct BenchBody<'a> {
    constraint: SparsityConstraint,
    threads: usize,
    summaries: &'a [BenchSummary],
    per_layer: &'a [BenchSummary],
    times: &'a sparseswaps::bench::PhaseTimes,
}

pub fn bench(args: BenchArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let d = BenchConfig::default();
    let t_max = args.t_max.or(file.t_max.clone().map(|t| t.into_vec())).unwrap_or(d.t_max.clone());
    if t_max.is_empty() {
        return Err(CliError::usage("empty t_max list\nusage: sparseswaps bench --t-max <T>[,<T>...] --out-dir <DIR>"));
    }
    let out_dir = required(args.out_dir, file.out_dir.clone(), "out-dir")?;
    let synth = synth_config(&args.synth, &file, args.common.seed);
    let constraint = match (args.constraint, file.constraint.as_deref()) {
        (Some(c), _) => Some(c),
        (None, Some(s)) => Some(s.parse::<SparsityConstraint>()?),
        (None, None) => None,
    };
    let cfg = BenchConfig {
        synth,
        layers: args.layers.or(file.layers).unwrap_or(d.layers),
        sparsity: args.sparsity.or(file.sparsity).unwrap_or(d.sparsity),
        constraint,
        criteria: args.criteria.or(file.criteria.clone()).unwrap_or(d.criteria.clone()),
        t_max,
        epsilon: args.epsilon.or(file.epsilon).unwrap_or(d.epsilon),
        ria_exponent: args.ria_exponent.or(file.ria_exponent).unwrap_or(d.ria_exponent),
    };
    let result = run_bench(&cfg)?;

    ensure_dir(&out_dir)?;
    let records_path = out_dir.join("bench.csv");
    let layers_path = out_dir.join("per_layer.csv");
    let summary_path = out_dir.join("summary.json");
    write_csv(&result.records, &records_path)?;
    write_csv(result.per_layer.iter().map(LayerCsvRow::from), &layers_path)?;
    let artifacts = vec![artifact("records_csv", &records_path)?, artifact("per_layer_csv", &layers_path)?];
    let env = Envelope {
        command: "bench",
        version: VERSION,
        seed: cfg.synth.seed,
        config: &cfg,
        artifacts: &artifacts,
        body: BenchBody {
            constraint: result.constraint,
            threads: rayon::current_num_threads(),
            summaries: &result.summaries,
            per_layer: &result.per_layer,
            times: &result.times,
        },
    };
    write_json(&env, &summary_path)?;
    print_json(&result.summaries)
}

// --------------------------------------------------------------- synth

#[derive(Serialize)]
struct SynthBody {
    weights_shape: (usize, usize),
    activations_shape: (usize, usize),
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let cfg = synth_config(&args.synth, &file, args.common.seed);
    let out_dir = required(args.out_dir, file.out_dir.clone(), "out-dir")?;
    let (w, x) = generate_layer(&cfg)?;
    ensure_dir(&out_dir)?;
    let wp = out_dir.join("weights.sswt");
    let xp = out_dir.join("activations.sswt");
    save_matrix(&w, &wp)?;
    save_matrix(&x, &xp)?;
    print_json(&Envelope {
        command: "synth",
        version: VERSION,
        seed: cfg.seed,
        config: &cfg,
        artifacts: &[artifact("weights", &wp)?, artifact("activations", &xp)?],
        body: SynthBody { weights_shape: w.shape(), activations_shape: x.shape() },
    })
}
