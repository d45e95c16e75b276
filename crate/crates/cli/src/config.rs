//! Optional JSON config file. Flags override file values, file values
//! override defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sparseswaps::{Criterion, SparsityConstraint};

use crate::CliError;

/// `t_max` may be a single budget (refine) or a list (bench).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TMax {
    One(usize),
    Many(Vec<usize>),
}

impl TMax {
    pub fn into_vec(self) -> Vec<usize> {
        match self {
            TMax::One(t) => vec![t],
            TMax::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub activations: Option<Vec<PathBuf>>,
    pub out: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub gram: Option<PathBuf>,
    pub mask_in: Option<PathBuf>,
    pub mask_out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub constraint: Option<String>,
    pub sparsity: Option<f64>,
    pub criterion: Option<Criterion>,
    pub criteria: Option<Vec<Criterion>>,
    pub t_max: Option<TMax>,
    pub epsilon: Option<f64>,
    pub ria_exponent: Option<f64>,
    pub seed: Option<u64>,
    pub layers: Option<usize>,
    pub d_in: Option<usize>,
    pub d_out: Option<usize>,
    pub n_cols: Option<usize>,
    pub corr_rank: Option<usize>,
    pub outlier_count: Option<usize>,
    pub outlier_scale: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                sparseswaps::tensorio::load_json(p).map_err(|e| CliError::usage(format!("config {}: {e}", p.display())))
            }
        }
    }
}

/// First of flag, file value; errors naming the flag if both are missing.
pub fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file).ok_or_else(|| CliError::usage(format!("missing required --{name} (flag or config file)")))
}

/// Constraint from an explicit `perrow:`/`nm:` string, or per-row from a sparsity fraction.
pub fn resolve_constraint(
    flag: Option<SparsityConstraint>,
    file: Option<&str>,
    sparsity: Option<f64>,
    d_in: usize,
) -> Result<SparsityConstraint, CliError> {
    let c = match (flag, file) {
        (Some(c), _) => c,
        (None, Some(s)) => s.parse().map_err(CliError::from)?,
        (None, None) => match sparsity {
            Some(s) => SparsityConstraint::PerRow { prune_count: sparseswaps::prune_count_from_fraction(d_in, s)? },
            None => return Err(CliError::usage("missing --constraint (or --sparsity)")),
        },
    };
    c.validate(d_in)?;
    Ok(c)
}
