//! Acceptance suite: one PASS/FAIL line per criterion, pinned tolerances.
//!
//! Runs without the libtest harness so criteria execute sequentially
//! (several of them time themselves) and the report is always printed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;
use sparseswaps::bench::{run_bench, BenchConfig};
use sparseswaps::oracle::brute_force_row;
use sparseswaps::{
    accumulate_gram, generate_layer, greedy_separate_baseline, init_correlation, is_one_swap_optimal, refine_row,
    refine_row_observed, row_loss_direct, row_loss_gram, save_mask, svd_equivalence_check, warm_start, Criterion,
    DenseMatrix, GramMatrix, PruningMask, RefineConfig, RowState, SparsityConstraint, SwapDecision, SynthConfig,
    Termination,
};

/// Collects failed checks; a criterion passes iff none failed.
#[derive(Default)]
struct Checker {
    checks: usize,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checker {
    fn ensure(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(msg());
        }
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }
}

fn randn(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn random_perrow_mask(d: usize, prune: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut m = vec![true; d];
    for j in sample(rng, d, prune) {
        m[j] = false;
    }
    m
}

fn random_nm_mask(d: usize, n: usize, block: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut m = vec![false; d];
    for b in 0..d / block {
        for j in sample(rng, block, n) {
            m[b * block + j] = true;
        }
    }
    m
}

fn swapped(m: &[bool], u: usize, p: usize) -> Vec<bool> {
    let mut out = m.to_vec();
    out[u] = false;
    out[p] = true;
    out
}

fn counterexample() -> (Vec<f64>, Vec<bool>, GramMatrix) {
    let x = DenseMatrix::new(4, 1, vec![1.0; 4]).unwrap();
    (vec![10.0, -1.0, 9.0, -9.0], vec![false, false, true, true], accumulate_gram(&[x]).unwrap())
}

const PER_ROW_2: SparsityConstraint = SparsityConstraint::PerRow { prune_count: 2 };

// ------------------------------------------------------------------ 1

fn counterexample_exactness(ck: &mut Checker) {
    let (w, m, _) = counterexample();
    let mut best_time = Duration::MAX;
    for _ in 0..5 {
        let t = Instant::now();
        let x = DenseMatrix::new(4, 1, vec![1.0; 4]).unwrap();
        let g = accumulate_gram(&[x]).unwrap();
        let l0 = row_loss_gram(&w, &m, &g).unwrap();
        let mut state = RowState::new(&w, &m, &g).unwrap();
        let best = state.best_swap(&g, &PER_ROW_2).unwrap();
        state.apply_swap(&best, &g).unwrap();
        let l1 = row_loss_gram(&w, state.mask(), &g).unwrap();
        let (base_mask, base_loss) = greedy_separate_baseline(&w, &m, &g).unwrap();
        best_time = best_time.min(t.elapsed());

        ck.ensure(l0 == 81.0, || format!("initial loss {l0} != 81"));
        ck.ensure(best == SwapDecision { u: 3, p: 1, delta: -80.0 }, || format!("best swap {best:?}"));
        ck.ensure(l1 == 1.0, || format!("loss after best swap {l1} != 1"));
        ck.ensure(base_loss == 100.0, || format!("separate baseline loss {base_loss} != 100"));
        ck.ensure(base_mask == [true, false, true, false], || format!("baseline mask {base_mask:?}"));
    }
    ck.ensure(best_time < Duration::from_millis(1), || format!("runtime {best_time:?} >= 1 ms"));
    ck.note(format!("81 -> 1 (dL=-80), separate baseline 100, {:.0} us", best_time.as_secs_f64() * 1e6));
}

// ------------------------------------------------------------------ 2

fn second_swap_convergence(ck: &mut Checker) {
    let (w, m, g) = counterexample();
    let oracle = brute_force_row(&w, &g, &PER_ROW_2).unwrap();
    ck.ensure(oracle.best_loss == 0.0 && oracle.n_evaluated == 6, || format!("oracle {oracle:?}"));
    ck.ensure(!is_one_swap_optimal(&w, &m, &g, &PER_ROW_2, 0.0).unwrap(), || "warm start certified optimal".into());
    for t_max in [2, 3, 10, 100] {
        let r = refine_row(&w, &m, &g, &PER_ROW_2, &RefineConfig::new(t_max, 0.0).unwrap()).unwrap();
        let loss = row_loss_gram(&w, &r.mask, &g).unwrap();
        ck.ensure(loss == 0.0 && r.final_loss() == 0.0, || format!("t_max={t_max}: final loss {loss}"));
        ck.ensure(r.trace == [81.0, 1.0, 0.0], || format!("t_max={t_max}: trace {:?}", r.trace));
        ck.ensure(r.mask == oracle.best_mask, || format!("t_max={t_max}: mask {:?}", r.mask));
        ck.ensure(is_one_swap_optimal(&w, &r.mask, &g, &PER_ROW_2, 0.0).unwrap(), || {
            format!("t_max={t_max}: final mask not 1-swap optimal")
        });
    }
    ck.note("81 -> 1 -> 0 = exhaustive optimum over C(4,2)=6, certified");
}

// ------------------------------------------------------------------ 3

fn swap_cost_exactness(ck: &mut Checker) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 64;
    let mut worst = 0.0f64;
    let n = 1000;
    for _ in 0..n {
        let b = rng.random_range(16..=128);
        let mut x = randn(d, b, &mut rng);
        // Heterogeneous feature scales.
        for j in 0..d {
            let s: f64 = StandardNormal.sample(&mut rng);
            x.row_mut(j).iter_mut().for_each(|v| *v *= s.exp());
        }
        let g = accumulate_gram(&[x]).unwrap();
        let w = randn(1, d, &mut rng).into_data();
        let prune = rng.random_range(1..d);
        let m = random_perrow_mask(d, prune, &mut rng);
        let kept: Vec<usize> = (0..d).filter(|&j| m[j]).collect();
        let pruned: Vec<usize> = (0..d).filter(|&j| !m[j]).collect();
        let u = kept[rng.random_range(0..kept.len())];
        let p = pruned[rng.random_range(0..pruned.len())];
        let formula = RowState::new(&w, &m, &g).unwrap().swap_delta(u, p, &g).unwrap();
        let direct = row_loss_gram(&w, &swapped(&m, u, p), &g).unwrap() - row_loss_gram(&w, &m, &g).unwrap();
        let r = rel(formula, direct);
        worst = worst.max(r);
        ck.ensure(r <= 1e-9, || format!("(u={u},p={p}) formula {formula} direct {direct} rel {r:e}"));
    }
    let elapsed = t.elapsed();
    ck.ensure(elapsed < Duration::from_secs(10), || format!("runtime {elapsed:?} >= 10 s"));
    ck.note(format!("{n} instances, max rel {worst:.2e}, {:.2} s", elapsed.as_secs_f64()));
}

// ------------------------------------------------------------------ 4

fn correlation_consistency(ck: &mut Checker) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = 64;
    let mut worst = 0.0f64;
    let mut total = 0;
    for inst in 0..5 {
        let x = randn(d, 96, &mut rng);
        let g = accumulate_gram(&[x]).unwrap();
        let w = randn(1, d, &mut rng).into_data();
        let m = random_perrow_mask(d, d / 2, &mut rng);
        let mut state = RowState::new(&w, &m, &g).unwrap();
        for step in 0..500 {
            let u = state.unpruned()[rng.random_range(0..state.unpruned().len())];
            let p = state.pruned()[rng.random_range(0..state.pruned().len())];
            let delta = state.swap_delta(u, p, &g).unwrap();
            state.apply_swap(&SwapDecision { u, p, delta }, &g).unwrap();
            total += 1;
            let fresh = init_correlation(&w, state.mask(), &g).unwrap();
            let norm = fresh.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let diff = state.correlation().iter().zip(&fresh).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            let r = if norm == 0.0 { diff } else { diff / norm };
            worst = worst.max(r);
            ck.ensure(r <= 1e-9, || format!("instance {inst} step {step}: rel drift {r:e}"));
        }
    }
    ck.note(format!("{total} chained swaps, max inf-norm rel drift {worst:.2e}"));
}

// ------------------------------------------------------------------ 5

fn gram_equivalence(ck: &mut Checker) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_gram = 0.0f64;
    for _ in 0..50 {
        let d = rng.random_range(2..=32);
        let n_blocks = rng.random_range(1..=6);
        let blocks: Vec<DenseMatrix> = (0..n_blocks).map(|_| randn(d, rng.random_range(1..=50), &mut rng)).collect();
        let g = accumulate_gram(&blocks).unwrap();
        let x = DenseMatrix::hcat(&blocks).unwrap();
        let direct = x.matmul(&x.transpose()).unwrap();
        let scale = direct.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let diff = g.as_matrix().data().iter().zip(direct.data()).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        let r = diff / scale;
        worst_gram = worst_gram.max(r);
        ck.ensure(r <= 1e-12, || format!("gram rel {r:e} with {n_blocks} blocks"));
    }

    let mut worst_loss = 0.0f64;
    for _ in 0..1000 {
        let d = rng.random_range(1..=24);
        let x = randn(d, rng.random_range(1..=48), &mut rng);
        let g = accumulate_gram(std::slice::from_ref(&x)).unwrap();
        let w = randn(1, d, &mut rng).into_data();
        let m: Vec<bool> = (0..d).map(|_| rng.random_bool(0.5)).collect();
        let (lg, ld) = (row_loss_gram(&w, &m, &g).unwrap(), row_loss_direct(&w, &m, &x).unwrap());
        let r = rel(lg, ld);
        worst_loss = worst_loss.max(r);
        ck.ensure(r <= 1e-10, || format!("loss gram {lg} direct {ld} rel {r:e}"));
    }

    let mut worst_svd = 0.0f64;
    for _ in 0..20 {
        let x = randn(16, 64, &mut rng);
        let wp = randn(1, 16, &mut rng).into_data();
        let rep = svd_equivalence_check(&x, &wp, 1e-8).unwrap();
        worst_svd = worst_svd.max(rep.loss_rel_diff).max(rep.gram_rel_diff);
        ck.ensure(rep.passed && rep.loss_rel_diff <= 1e-8, || format!("svd check {rep:?}"));
    }
    ck.note(format!("gram {worst_gram:.1e}, loss {worst_loss:.1e}, svd {worst_svd:.1e}"));
}

// ------------------------------------------------------------------ 6

fn oracle_sandwich(ck: &mut Checker) {
    let t = Instant::now();
    let constraint = SparsityConstraint::PerRow { prune_count: 6 };
    let cfg = RefineConfig::new(200, 0.0).unwrap();
    let mut at_optimum = 0;
    let n = 200;
    for seed in 0..n {
        let synth =
            SynthConfig { d_in: 12, d_out: 1, n_cols: 48, corr_rank: 3, outlier_count: 1, outlier_scale: 10.0, seed };
        let (w, x) = generate_layer(&synth).unwrap();
        let g = accumulate_gram(&[x]).unwrap();
        let criterion = Criterion::ALL[seed as usize % 3];
        let warm = warm_start(&w, &g, criterion, &constraint, 0.5).unwrap();
        let row = w.row(0);
        let r = refine_row(row, warm.row(0), &g, &constraint, &cfg).unwrap();
        let l_warm = row_loss_gram(row, warm.row(0), &g).unwrap();
        let l_ref = row_loss_gram(row, &r.mask, &g).unwrap();
        let opt = brute_force_row(row, &g, &constraint).unwrap();
        ck.ensure(opt.best_loss <= l_ref && l_ref <= l_warm, || {
            format!("seed {seed}: oracle {} refined {l_ref} warm {l_warm}", opt.best_loss)
        });
        ck.ensure(r.termination != Termination::IterationLimit, || format!("seed {seed}: hit t_max"));
        ck.ensure(is_one_swap_optimal(row, &r.mask, &g, &constraint, 0.0).unwrap(), || {
            format!("seed {seed}: termination not 1-swap optimal")
        });
        if l_ref == opt.best_loss {
            at_optimum += 1;
        }
    }
    let elapsed = t.elapsed();
    ck.ensure(elapsed < Duration::from_secs(60), || format!("runtime {elapsed:?} >= 60 s"));
    ck.note(format!("{n} instances, {at_optimum} reach the global optimum, {:.2} s", elapsed.as_secs_f64()));
}

// ------------------------------------------------------------------ 7

fn constraint_preservation(ck: &mut Checker) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = RefineConfig::new(100, 0.0).unwrap();
    let mut swaps = [0usize; 2];
    for i in 0..200 {
        let nm = i >= 100;
        let (d, constraint, m0) = if nm {
            let (n, block) = if i % 2 == 0 { (2, 4) } else { (4, 8) };
            let d = block * rng.random_range(1..=8);
            (d, SparsityConstraint::BlockNM { n_keep: n, m_block: block }, random_nm_mask(d, n, block, &mut rng))
        } else {
            let d = rng.random_range(2..=48);
            let prune = rng.random_range(1..d);
            (d, SparsityConstraint::PerRow { prune_count: prune }, random_perrow_mask(d, prune, &mut rng))
        };
        let x = randn(d, rng.random_range(4..=64), &mut rng);
        let g = accumulate_gram(&[x]).unwrap();
        let w = randn(1, d, &mut rng).into_data();
        let kept = constraint.kept_per_row(d);
        let width = constraint.group_width(d);
        let r = refine_row_observed(&w, &m0, &g, &constraint, &cfg, |state, dec| {
            let m = state.mask();
            let ok_counts = m.chunks(width).all(|blk| blk.iter().filter(|&&k| k).count() == kept * width / d);
            ck.ensure(ok_counts && constraint.violation(m).is_none(), || {
                format!("instance {i}: counts broken after {dec:?}")
            });
            ck.ensure(dec.u / width == dec.p / width, || format!("instance {i}: swap {dec:?} crosses a block"));
            ck.ensure(!m[dec.u] && m[dec.p], || format!("instance {i}: swap {dec:?} not applied"));
        })
        .unwrap();
        ck.ensure(constraint.is_satisfied(&r.mask), || format!("instance {i}: final mask infeasible"));
        swaps[nm as usize] += r.swaps.len();
    }
    ck.ensure(swaps[0] > 0 && swaps[1] > 0, || format!("vacuous run: swaps {swaps:?}"));
    ck.note(format!("{} per-row + {} N:M swaps checked", swaps[0], swaps[1]));
}

// ------------------------------------------------------------------ 8

fn monotone_sweep(ck: &mut Checker) {
    let t = Instant::now();
    let cfg = BenchConfig {
        synth: SynthConfig {
            d_in: 128,
            d_out: 32,
            corr_rank: 4,
            outlier_count: 8,
            outlier_scale: 10.0,
            ..SynthConfig::default()
        },
        layers: 1,
        sparsity: 0.6,
        constraint: None,
        criteria: vec![Criterion::Wanda],
        t_max: vec![1, 2, 5, 10, 25, 50, 100],
        epsilon: 0.0,
        ria_exponent: 0.5,
    };
    let res = run_bench(&cfg).unwrap();
    let means: Vec<f64> = res.summaries.iter().map(|s| s.mean_reduction_pct.unwrap_or(f64::NAN)).collect();
    ck.ensure(means.windows(2).all(|w| w[0] <= w[1]), || format!("not monotone: {means:?}"));
    let first: Vec<_> = res.records.iter().filter(|r| r.t_max == 1).collect();
    let positive = first.iter().filter(|r| r.reduction_pct.is_some_and(|p| p > 0.0)).count();
    let frac = positive as f64 / first.len() as f64;
    ck.ensure(frac >= 0.95, || format!("only {positive}/{} rows improved at t_max=1", first.len()));
    let elapsed = t.elapsed();
    ck.ensure(elapsed < Duration::from_secs(300), || format!("runtime {elapsed:?} >= 5 min"));
    let shown: Vec<String> = cfg.t_max.iter().zip(&means).map(|(t, m)| format!("{t}:{m:.2}%")).collect();
    ck.note(format!("{} | {positive}/{} rows > 0 at t=1", shown.join(" "), first.len()));
}

// ------------------------------------------------------------------ 9

fn sparseswaps(args: &[&str], threads: &str) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_sparseswaps"))
        .env("SPARSESWAPS_THREADS", threads)
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn determinism(ck: &mut Checker) {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<_> = ["1", "8"]
        .iter()
        .map(|threads| {
            let out = dir.path().join(format!("t{threads}"));
            sparseswaps(
                &[
                    "bench",
                    "--seed",
                    "42",
                    "--layers",
                    "2",
                    "--criteria",
                    "magnitude,wanda,ria",
                    "--t-max",
                    "0,1,2,5,10,25,50,100",
                    "--out-dir",
                    s(&out),
                ],
                threads,
            );
            let summary: Value =
                serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
            let read = |f: &str| std::fs::read(out.join(f)).unwrap();
            (summary["threads"].as_u64(), read("bench.csv"), read("per_layer.csv"))
        })
        .collect();
    ck.ensure(runs[0].0 == Some(1) && runs[1].0 == Some(8), || {
        format!("thread counts {:?} {:?}", runs[0].0, runs[1].0)
    });
    ck.ensure(runs[0].1 == runs[1].1, || "bench.csv differs between 1 and 8 threads".into());
    ck.ensure(runs[0].2 == runs[1].2, || "per_layer.csv differs between 1 and 8 threads".into());
    let lines = runs[0].1.iter().filter(|&&b| b == b'\n').count();
    ck.note(format!("bench.csv ({lines} lines) and per_layer.csv byte-identical at 1 and 8 threads"));
}

// ----------------------------------------------------------------- 10

/// Least-squares line through the points; returns each point's
/// measured/fitted ratio.
fn linear_fit_ratios(pts: &[(f64, f64)]) -> Vec<f64> {
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    pts.iter().map(|&(x, y)| y / (a + b * x)).collect()
}

/// Minimum refine-phase time of `cmd_refine` over repeats, plus swaps at each budget.
fn time_refine(dir: &Path, constraint: &str, mask: &Path) -> Vec<(f64, f64, u64)> {
    [25usize, 50, 100]
        .iter()
        .map(|&t| {
            let ts = t.to_string();
            let mut best = f64::INFINITY;
            let mut swaps = 0;
            for rep in 0..3 {
                let report = dir.join(format!("r{t}_{rep}.json"));
                let summary = sparseswaps(
                    &[
                        "refine",
                        "--weights",
                        s(&dir.join("weights.sswt")),
                        "--gram",
                        s(&dir.join("g.sswt")),
                        "--mask-in",
                        s(mask),
                        "--constraint",
                        constraint,
                        "--t-max",
                        &ts,
                        "--mask-out",
                        s(&dir.join("out.sswt")),
                        "--report",
                        s(&report),
                    ],
                    "0",
                );
                let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
                best = best.min(r["times"]["refine_ms"].as_f64().unwrap());
                swaps = summary["total_swaps"].as_u64().unwrap();
            }
            (t as f64, best, swaps)
        })
        .collect()
}

fn scaling(ck: &mut Checker) {
    let dir = tempfile::tempdir().unwrap();
    let layer = |name: &str, extra: &[&str]| {
        let d = dir.path().join(name);
        let mut args = vec!["synth", "--out-dir", s(&d)];
        args.extend_from_slice(extra);
        sparseswaps(&args, "0");
        sparseswaps(&["gram", "--activations", s(&d.join("activations.sswt")), "--out", s(&d.join("g.sswt"))], "0");
        d
    };

    // The synthetic suite with a Wanda warm start.
    let suite = layer("suite", &[]);
    let warm = suite.join("warm.sswt");
    let ws = sparseswaps(
        &[
            "warmstart",
            "--weights",
            s(&suite.join("weights.sswt")),
            "--gram",
            s(&suite.join("g.sswt")),
            "--criterion",
            "wanda",
            "--sparsity",
            "0.6",
            "--mask-out",
            s(&warm),
        ],
        "0",
    );
    let constraint = format!("perrow:{}", ws["pruned"].as_u64().unwrap() / 32);
    let suite_pts = time_refine(&suite, &constraint, &warm);

    // Wider, full-rank layer whose warm start prunes the largest weights,
    // so every row keeps swapping for the whole budget.
    let wide = layer(
        "wide",
        &["--d-in", "384", "--n-cols", "768", "--corr-rank", "384", "--outlier-count", "1", "--outlier-scale", "1"],
    );
    let w = sparseswaps::load_matrix(wide.join("weights.sswt")).unwrap();
    let prune = w.cols() / 2;
    let mut bits = Vec::new();
    for row in w.row_iter() {
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| row[b].abs().total_cmp(&row[a].abs()).then(a.cmp(&b)));
        let mut m = vec![true; row.len()];
        order[..prune].iter().for_each(|&j| m[j] = false);
        bits.extend(m);
    }
    let anti = wide.join("anti.sswt");
    save_mask(&PruningMask::new(w.rows(), w.cols(), bits).unwrap(), &anti).unwrap();
    let wide_pts = time_refine(&wide, &format!("perrow:{prune}"), &anti);
    ck.ensure(wide_pts[2].2 == 100 * w.rows() as u64, || format!("wide layer converged early: {wide_pts:?}"));

    let mut notes = Vec::new();
    for (name, pts) in [("suite", &suite_pts), ("wide", &wide_pts)] {
        let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, p.1)).collect();
        let ratios = linear_fit_ratios(&xy);
        ck.ensure(ratios.iter().all(|r| (0.5..=2.0).contains(r)), || format!("{name}: {pts:?} fit ratios {ratios:?}"));
        let ms: Vec<String> = pts.iter().map(|p| format!("{:.1}ms/{}sw", p.1, p.2)).collect();
        let worst = ratios.iter().fold(1.0f64, |a, r| a.max(r.max(1.0 / r)));
        notes.push(format!("{name} [{}] worst {worst:.2}x", ms.join(", ")));
    }
    ck.note(notes.join("; "));
}

type Check = (&'static str, fn(&mut Checker));

fn main() {
    let criteria: [Check; 10] = [
        ("counterexample exactness", counterexample_exactness),
        ("second-swap convergence", second_swap_convergence),
        ("swap-cost exactness", swap_cost_exactness),
        ("correlation-vector consistency", correlation_consistency),
        ("gram equivalence", gram_equivalence),
        ("oracle sandwich", oracle_sandwich),
        ("constraint preservation", constraint_preservation),
        ("monotone iteration sweep", monotone_sweep),
        ("determinism across thread counts", determinism),
        ("scaling sanity", scaling),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let mut ck = Checker::default();
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut ck)));
        if let Err(e) = outcome {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            ck.failures.push(format!("panicked: {}", msg.unwrap_or_default()));
        }
        let pass = ck.failures.is_empty();
        failed += usize::from(!pass);
        println!(
            "[{}] {:>2}. {name} ({} checks, {:.2}s): {}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            ck.checks,
            t.elapsed().as_secs_f64(),
            ck.notes.join("; ")
        );
        for f in ck.failures.iter().take(5) {
            println!("        - {f}");
        }
        if ck.failures.len() > 5 {
            println!("        - ... {} more", ck.failures.len() - 5);
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
