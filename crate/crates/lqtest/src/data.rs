//! Data containers, CSV ingestion, and the deterministic RNG contract.
//!
//! All random draws in this crate flow through [`SeedSpec`]: a keyed,
//! splittable scheme on top of ChaCha8 streams. `derive_stream(seed, k)`
//! is a pure function, so any computation seeded through it is bit-stable
//! across runs and thread counts.

use std::fmt::Write as _;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An n×p observation matrix, row-major. Immutable after construction;
/// all entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    values: Vec<f64>,
    n: usize,
    p: usize,
}

impl SampleMatrix {
    pub fn new(values: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidDimension(format!(
                "matrix must have n >= 1 and p >= 1, got {n}x{p}"
            )));
        }
        if values.len() != n * p {
            return Err(Error::InvalidDimension(format!(
                "expected {} values for a {n}x{p} matrix, got {}",
                n * p,
                values.len()
            )));
        }
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: idx / p + 1,
                    column: idx % p + 1,
                });
            }
        }
        Ok(Self { values, n, p })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let p = rows[0].len();
        let mut values = Vec::with_capacity(n * p);
        for row in &rows {
            if row.len() != p {
                return Err(Error::InvalidDimension(format!(
                    "rows have inconsistent lengths ({} vs {p})",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(values, n, p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Copies the matrix into column-major vectors (used by the DP kernels).
    pub fn to_columns(&self) -> Vec<Vec<f64>> {
        let mut cols = vec![vec![0.0; self.n]; self.p];
        for i in 0..self.n {
            let row = self.row(i);
            for (j, c) in cols.iter_mut().enumerate() {
                c[i] = row[j];
            }
        }
        cols
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// Returns a copy with the rows reordered as `perm` (row i of the result
    /// is row `perm[i]` of `self`).
    pub fn select_rows(&self, perm: &[usize]) -> SampleMatrix {
        let mut values = Vec::with_capacity(perm.len() * self.p);
        for &i in perm {
            values.extend_from_slice(self.row(i));
        }
        SampleMatrix {
            values,
            n: perm.len(),
            p: self.p,
        }
    }

    /// Writes the matrix as CSV. Values are printed with the shortest
    /// representation that round-trips, so save/load is bit-exact.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for i in 0..self.n {
            let row = self.row(i);
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Covariate/response pairs for regression-coefficient testing.
#[derive(Debug, Clone)]
pub struct PairedSample {
    pub covariates: SampleMatrix,
    pub response: Vec<f64>,
}

impl PairedSample {
    pub fn new(covariates: SampleMatrix, response: Vec<f64>) -> Result<Self> {
        if response.len() != covariates.n() {
            return Err(Error::InvalidDimension(format!(
                "response length {} does not match {} covariate rows",
                response.len(),
                covariates.n()
            )));
        }
        for (i, v) in response.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i + 1,
                    column: covariates.p() + 1,
                });
            }
        }
        Ok(Self {
            covariates,
            response,
        })
    }

    /// Joint n×(p+1) matrix with the response as the last column. This is
    /// the layout the regression kernel evaluates on.
    pub fn to_joint(&self) -> SampleMatrix {
        let n = self.covariates.n();
        let p = self.covariates.p();
        let mut values = Vec::with_capacity(n * (p + 1));
        for i in 0..n {
            values.extend_from_slice(self.covariates.row(i));
            values.push(self.response[i]);
        }
        SampleMatrix {
            values,
            n,
            p: p + 1,
        }
    }
}

/// Two independent samples sharing a column count.
#[derive(Debug, Clone)]
pub struct TwoSampleData {
    pub first: SampleMatrix,
    pub second: SampleMatrix,
}

impl TwoSampleData {
    pub fn new(first: SampleMatrix, second: SampleMatrix) -> Result<Self> {
        if first.p() != second.p() {
            return Err(Error::InvalidDimension(format!(
                "samples must share a column count, got p = {} and {}",
                first.p(),
                second.p()
            )));
        }
        Ok(Self { first, second })
    }
}

/// Any dataset a test can run on. Regression data travel as the joint
/// matrix from [`PairedSample::to_joint`] (response in the last column).
#[derive(Debug, Clone)]
pub enum DataSet {
    OneSample(SampleMatrix),
    TwoSample(TwoSampleData),
}

impl DataSet {
    pub fn as_one_sample(&self) -> Option<&SampleMatrix> {
        match self {
            DataSet::OneSample(m) => Some(m),
            DataSet::TwoSample(_) => None,
        }
    }

    pub fn as_two_sample(&self) -> Option<&TwoSampleData> {
        match self {
            DataSet::OneSample(_) => None,
            DataSet::TwoSample(d) => Some(d),
        }
    }
}

/// Loads a comma-delimited numeric matrix. `has_header` skips the first line.
pub fn load_csv(path: &Path, has_header: bool) -> Result<SampleMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, has_header)
}

pub(crate) fn parse_csv(text: &str, has_header: bool) -> Result<SampleMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut expected = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if has_header && idx == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if expected == 0 {
            expected = fields.len();
        } else if fields.len() != expected {
            return Err(Error::CsvRagged {
                line: line_no,
                expected,
                found: fields.len(),
            });
        }
        let mut row = Vec::with_capacity(fields.len());
        for (col, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::CsvParse {
                line: line_no,
                column: col + 1,
                value: field.trim().to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: line_no,
                    column: col + 1,
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    SampleMatrix::from_rows(rows)
}

/// Key for a deterministic random stream. Identical `(master_seed,
/// stream_id)` pairs yield bit-identical streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            stream_id: 0,
        }
    }

    /// Instantiates the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Derives the `index`-th child stream. Pure: the same `(seed, index)` gives
/// the same child on every run and thread. Distinct indices give distinct
/// stream ids (the mix below is a bijection applied to distinct inputs).
pub fn derive_stream(seed: SeedSpec, index: u64) -> SeedSpec {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let input = seed
        .stream_id
        .wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1)));
    SeedSpec {
        master_seed: seed.master_seed,
        stream_id: mix64(input),
    }
}

// SplitMix64 finalizer; bijective on u64.
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    z
}
