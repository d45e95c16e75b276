//! Dense matrices, pruning masks and their on-disk container.
//!
//! Every tensor on disk is an SSWT file, little-endian throughout:
//!
//! ```text
//! offset  size        field
//! 0       4           magic  b"SSWT"
//! 4       4  (u32)    format version = 1
//! 8       4  (u32)    dtype code     = 1 (f64)
//! 12      4  (u32)    ndim           = 2
//! 16      16 (2×u64)  dims [rows, cols]
//! 32      8·rows·cols payload, f64, row-major
//! ```
//!
//! There is no padding and no checksum. Masks use the same container with
//! every payload value exactly `0.0` or `1.0`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SSWT";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F64: u32 = 1;
pub const HEADER_LEN: usize = 32;

/// Row-major matrix of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!("zero dimension {rows}x{cols}")));
        }
        let expected =
            rows.checked_mul(cols).ok_or(Error::DimensionOverflow { rows: rows as u64, cols: cols as u64 })?;
        if data.len() != expected {
            return Err(Error::shape(format!("{rows}x{cols} matrix needs {expected} values, got {}", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero dimension {rows}x{cols}");
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(format!("row {i} has {} entries, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Plain triple-loop product `self · rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Concatenates matrices with equal row counts side by side.
    pub fn hcat(parts: &[DenseMatrix]) -> Result<DenseMatrix> {
        let first = parts.first().ok_or_else(|| Error::shape("nothing to concatenate"))?;
        let rows = first.rows;
        if let Some(bad) = parts.iter().find(|p| p.rows != rows) {
            return Err(Error::shape(format!("row count {} differs from {rows}", bad.rows)));
        }
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row(i));
            }
        }
        DenseMatrix::new(rows, cols, data)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFiniteValue { index, value: self.data[index] }),
            None => Ok(()),
        }
    }
}

/// Binary keep (true) / prune (false) mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PruningMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl PruningMask {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!("zero dimension {rows}x{cols}")));
        }
        if bits.len() != rows * cols {
            return Err(Error::shape(format!("{rows}x{cols} mask needs {} entries, got {}", rows * cols, bits.len())));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero dimension {rows}x{cols}");
        Self { rows, cols, bits: vec![true; rows * cols] }
    }

    pub fn from_rows<R: AsRef<[bool]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut bits = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(format!("row {i} has {} entries, expected {cols}", r.len())));
            }
            bits.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, bits)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [bool] {
        &mut self.bits[i * self.cols..(i + 1) * self.cols]
    }

    pub fn pruned_count(&self) -> usize {
        self.bits.iter().filter(|&&b| !b).count()
    }

    /// Fraction of entries that are pruned.
    pub fn sparsity(&self) -> f64 {
        self.pruned_count() as f64 / self.bits.len() as f64
    }

    pub fn to_matrix(&self) -> DenseMatrix {
        let data = self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// Rejects anything that is not exactly `0.0` or `1.0`.
    pub fn from_matrix(m: &DenseMatrix) -> Result<Self> {
        let mut bits = Vec::with_capacity(m.data.len());
        for (index, &value) in m.data.iter().enumerate() {
            if value == 1.0 {
                bits.push(true);
            } else if value == 0.0 {
                bits.push(false);
            } else {
                return Err(Error::NonBinaryEntry { index, value });
            }
        }
        Ok(Self { rows: m.rows, cols: m.cols, bits })
    }
}

/// Size of a calibration set: `n_samples` sequences of `seq_len` tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationMeta {
    pub n_samples: usize,
    pub seq_len: usize,
}

impl CalibrationMeta {
    pub fn new(n_samples: usize, seq_len: usize) -> Result<Self> {
        match n_samples.checked_mul(seq_len) {
            Some(total) if total >= 1 => Ok(Self { n_samples, seq_len }),
            Some(_) => Err(Error::InvalidConfig("calibration set has no columns".into())),
            None => Err(Error::DimensionOverflow { rows: n_samples as u64, cols: seq_len as u64 }),
        }
    }

    pub fn total_cols(&self) -> usize {
        self.n_samples * self.seq_len
    }
}

pub fn encode_matrix(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&DTYPE_F64.to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(m.rows as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols as u64).to_le_bytes());
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedHeader(format!("file is {} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::MalformedHeader(format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = u32_at(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(Error::MalformedHeader(format!("unsupported version {version}")));
    }
    let dtype = u32_at(bytes, 8);
    if dtype != DTYPE_F64 {
        return Err(Error::MalformedHeader(format!("unsupported dtype code {dtype}")));
    }
    let ndim = u32_at(bytes, 12);
    if ndim != 2 {
        return Err(Error::MalformedHeader(format!("expected ndim 2, got {ndim}")));
    }
    let (rows, cols) = (u64_at(bytes, 16), u64_at(bytes, 24));
    if rows == 0 || cols == 0 {
        return Err(Error::MalformedHeader(format!("zero dimension {rows}x{cols}")));
    }
    let overflow = Error::DimensionOverflow { rows, cols };
    let count = rows.checked_mul(cols).ok_or(overflow)?;
    let count = usize::try_from(count)
        .ok()
        .filter(|c| c.checked_mul(8).is_some())
        .ok_or(Error::DimensionOverflow { rows, cols })?;

    let payload = &bytes[HEADER_LEN..];
    let found = payload.len() / 8;
    if found < count {
        return Err(Error::TruncatedPayload { expected: count, found });
    }
    if payload.len() > count * 8 {
        return Err(Error::TrailingData { extra: payload.len() - count * 8 });
    }
    let data: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let m = DenseMatrix { rows: rows as usize, cols: cols as usize, data };
    m.check_finite()?;
    Ok(m)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    decode_matrix(&fs::read(path)?)
}

pub fn save_matrix(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_matrix(m))?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<PruningMask> {
    PruningMask::from_matrix(&load_matrix(path)?)
}

pub fn save_mask(mask: &PruningMask, path: impl AsRef<Path>) -> Result<()> {
    save_matrix(&mask.to_matrix(), path)
}

/// Reads a JSON document into `T`.
pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
