//! Kernel functions for the supported test problems.
//!
//! Each problem contributes a kernel h_l of order r evaluated on r
//! observation rows (or on one row from each sample for the two-sample
//! problem), indexed by a component l. Averaging the q-fold product of a
//! kernel over distinct index tuples estimates the q-th power of the
//! component parameter, and summing over the component set gives the
//! L_q-norm statistic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::SampleMatrix;
use crate::error::{Error, Result};

/// Sign with sgn(0) = 0. Ties therefore contribute nothing to the
/// rank-correlation kernels instead of crashing; they have probability
/// zero under the continuous-distribution assumption.
#[inline(always)]
pub(crate) fn sgn(x: f64) -> f64 {
    ((x > 0.0) as i32 - ((x < 0.0) as i32)) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Mean,
    SpatialSign,
    Covariance,
    KendallTau,
    SpearmanRho,
    LinRegCoef,
    TwoSampleSpatialSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleArity {
    OneSample,
    TwoSample,
}

impl Problem {
    /// Kernel order r (number of observations per evaluation; the
    /// two-sample kernel takes one row from each sample).
    pub fn order(self) -> usize {
        match self {
            Problem::Mean | Problem::SpatialSign | Problem::Covariance => 1,
            Problem::KendallTau | Problem::LinRegCoef => 2,
            Problem::SpearmanRho => 3,
            Problem::TwoSampleSpatialSign => 1,
        }
    }

    /// Degeneracy order s. All supported kernels are non-degenerate
    /// (s = 1), which fixes the n^{qs/2} studentization rate.
    pub fn degeneracy(self) -> usize {
        1
    }

    pub fn sample_arity(self) -> SampleArity {
        match self {
            Problem::TwoSampleSpatialSign => SampleArity::TwoSample,
            _ => SampleArity::OneSample,
        }
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            Problem::Mean => "mean",
            Problem::SpatialSign => "spatial-sign",
            Problem::Covariance => "covariance",
            Problem::KendallTau => "kendall",
            Problem::SpearmanRho => "spearman",
            Problem::LinRegCoef => "linreg",
            Problem::TwoSampleSpatialSign => "two-sample-spatial-sign",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Problem::Mean),
            "spatial-sign" => Ok(Problem::SpatialSign),
            "covariance" => Ok(Problem::Covariance),
            "kendall" => Ok(Problem::KendallTau),
            "spearman" => Ok(Problem::SpearmanRho),
            "linreg" => Ok(Problem::LinRegCoef),
            "two-sample-spatial-sign" => Ok(Problem::TwoSampleSpatialSign),
            other => Err(Error::InvalidParam(format!("unknown problem {other:?}"))),
        }
    }
}

/// A fully specified test problem: the kernel plus its null parameters.
///
/// Regression data are evaluated on the joint matrix layout of
/// [`crate::data::PairedSample::to_joint`]: covariates in columns
/// `0..p-1`, response in the last column.
#[derive(Debug, Clone)]
pub enum KernelSpec {
    /// h_l(X) = x_l − μ₀_l. `mu0 = None` tests against the zero vector.
    Mean { mu0: Option<Vec<f64>> },
    /// h_l(X) = x_l / ‖X‖.
    SpatialSign,
    /// h_l(X) = x_{p1} x_{p2} − σ₀_{p1 p2} over the upper triangle
    /// including the diagonal. `band = d >= 1` restricts the component set
    /// to pairs with p2 ≥ p1 + d (the banded-structure test), where the
    /// null entries vanish; σ₀ defaults to the zero matrix.
    Covariance {
        sigma0: Option<SampleMatrix>,
        band: usize,
    },
    /// h_l(X_i, X_j) = sgn(x_{i,p1} − x_{j,p1}) sgn(x_{i,p2} − x_{j,p2}).
    KendallTau,
    /// Symmetrized six-term average of
    /// sgn(x_{i,p1} − x_{j,p1}) sgn(x_{i,p2} − x_{k,p2}).
    SpearmanRho,
    /// h_l(W_i, W_j) = [(X_i − X_j)(Y_i − Y_j − (X_i − X_j)ᵀ β₀)]_l / 2.
    /// `beta0 = None` tests against the zero coefficient vector.
    LinRegCoef { beta0: Option<Vec<f64>> },
    /// h_l(X_i, Y_j) = (x_{i,l} − y_{j,l}) / ‖X_i − Y_j‖.
    TwoSampleSpatialSign,
}

impl KernelSpec {
    pub fn problem(&self) -> Problem {
        match self {
            KernelSpec::Mean { .. } => Problem::Mean,
            KernelSpec::SpatialSign => Problem::SpatialSign,
            KernelSpec::Covariance { .. } => Problem::Covariance,
            KernelSpec::KendallTau => Problem::KendallTau,
            KernelSpec::SpearmanRho => Problem::SpearmanRho,
            KernelSpec::LinRegCoef { .. } => Problem::LinRegCoef,
            KernelSpec::TwoSampleSpatialSign => Problem::TwoSampleSpatialSign,
        }
    }

    pub fn order(&self) -> usize {
        self.problem().order()
    }

    pub fn degeneracy(&self) -> usize {
        self.problem().degeneracy()
    }

    pub fn sample_arity(&self) -> SampleArity {
        self.problem().sample_arity()
    }

    /// Number of components the kernel indexes over, given a data matrix
    /// with `data_p` columns. For the regression kernel the last column is
    /// the response, so only `data_p - 1` covariate components exist.
    pub fn component_dim(&self, data_p: usize) -> usize {
        match self {
            KernelSpec::LinRegCoef { .. } => data_p.saturating_sub(1),
            _ => data_p,
        }
    }

    /// Checks that the null parameters match the component dimension `p`.
    pub fn validate_params(&self, p: usize) -> Result<()> {
        match self {
            KernelSpec::Mean { mu0: Some(m) } if m.len() != p => Err(Error::InvalidParam(
                format!("mu0 has length {}, expected {p}", m.len()),
            )),
            KernelSpec::Covariance {
                sigma0: Some(s), ..
            } if s.n() != p || s.p() != p => Err(Error::InvalidParam(format!(
                "sigma0 is {}x{}, expected {p}x{p}",
                s.n(),
                s.p()
            ))),
            KernelSpec::LinRegCoef { beta0: Some(b) } if b.len() != p => Err(
                Error::InvalidParam(format!("beta0 has length {}, expected {p}", b.len())),
            ),
            _ => Ok(()),
        }
    }
}

/// A component index l: a scalar for vector-valued parameters, an ordered
/// pair for matrix-valued ones. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentIndex {
    Scalar(usize),
    Pair(usize, usize),
}

/// Deterministic, sorted enumeration of the component set for dimension `p`
/// (for the regression kernel, `p` is the covariate count).
pub fn component_set(spec: &KernelSpec, p: usize) -> Result<Vec<ComponentIndex>> {
    if p == 0 {
        return Err(Error::InvalidDimension("p must be >= 1".into()));
    }
    match spec {
        KernelSpec::Mean { .. }
        | KernelSpec::SpatialSign
        | KernelSpec::LinRegCoef { .. }
        | KernelSpec::TwoSampleSpatialSign => {
            Ok((0..p).map(ComponentIndex::Scalar).collect())
        }
        KernelSpec::Covariance { band, .. } => {
            let offset = *band;
            let set: Vec<ComponentIndex> = (0..p)
                .flat_map(|a| ((a + offset)..p).map(move |b| ComponentIndex::Pair(a, b)))
                .collect();
            if set.is_empty() {
                return Err(Error::PairComponentsUnavailable { p });
            }
            Ok(set)
        }
        KernelSpec::KendallTau | KernelSpec::SpearmanRho => {
            if p < 2 {
                return Err(Error::PairComponentsUnavailable { p });
            }
            Ok((0..p)
                .flat_map(|a| ((a + 1)..p).map(move |b| ComponentIndex::Pair(a, b)))
                .collect())
        }
    }
}

/// Evaluates a one-sample kernel on `rows` (length must equal the order).
pub fn eval_kernel(spec: &KernelSpec, l: ComponentIndex, rows: &[&[f64]]) -> Result<f64> {
    let r = spec.order();
    if rows.len() != r {
        return Err(Error::ArityMismatch {
            expected: r,
            got: rows.len(),
        });
    }
    match (spec, l) {
        (KernelSpec::Mean { mu0 }, ComponentIndex::Scalar(j)) => {
            let shift = mu0.as_ref().map_or(0.0, |m| m[j]);
            Ok(rows[0][j] - shift)
        }
        (KernelSpec::SpatialSign, ComponentIndex::Scalar(j)) => {
            let norm = euclidean_norm(rows[0]);
            if norm == 0.0 {
                return Err(Error::ZeroNormRow { row: 0 });
            }
            Ok(rows[0][j] / norm)
        }
        (KernelSpec::Covariance { sigma0, .. }, ComponentIndex::Pair(a, b)) => {
            let null = sigma0.as_ref().map_or(0.0, |s| s.get(a, b));
            Ok(rows[0][a] * rows[0][b] - null)
        }
        (KernelSpec::KendallTau, ComponentIndex::Pair(a, b)) => {
            Ok(sgn(rows[0][a] - rows[1][a]) * sgn(rows[0][b] - rows[1][b]))
        }
        (KernelSpec::SpearmanRho, ComponentIndex::Pair(a, b)) => {
            let (xi, xj, xk) = (rows[0], rows[1], rows[2]);
            let sum = sgn(xi[a] - xj[a]) * sgn(xi[b] - xk[b])
                + sgn(xi[a] - xk[a]) * sgn(xi[b] - xj[b])
                + sgn(xj[a] - xi[a]) * sgn(xj[b] - xk[b])
                + sgn(xj[a] - xk[a]) * sgn(xj[b] - xi[b])
                + sgn(xk[a] - xi[a]) * sgn(xk[b] - xj[b])
                + sgn(xk[a] - xj[a]) * sgn(xk[b] - xi[b]);
            Ok(sum / 6.0)
        }
        (KernelSpec::LinRegCoef { beta0 }, ComponentIndex::Scalar(j)) => {
            // rows are joint (x..., y); residual factor shared across l
            let p = rows[0].len() - 1;
            let (x1, x2) = (&rows[0][..p], &rows[1][..p]);
            let (y1, y2) = (rows[0][p], rows[1][p]);
            let mut resid = y1 - y2;
            if let Some(b) = beta0 {
                for d in 0..p {
                    resid -= (x1[d] - x2[d]) * b[d];
                }
            }
            Ok((x1[j] - x2[j]) * resid / 2.0)
        }
        (KernelSpec::TwoSampleSpatialSign, _) => Err(Error::InvalidParam(
            "two-sample kernel requires eval_kernel_two_sample".into(),
        )),
        _ => Err(Error::InvalidParam(
            "component index shape does not match the problem".into(),
        )),
    }
}

/// Evaluates the two-sample kernel on one row from each sample.
pub fn eval_kernel_two_sample(
    spec: &KernelSpec,
    l: ComponentIndex,
    x_row: &[f64],
    y_row: &[f64],
) -> Result<f64> {
    match (spec, l) {
        (KernelSpec::TwoSampleSpatialSign, ComponentIndex::Scalar(j)) => {
            let mut sq = 0.0;
            for (a, b) in x_row.iter().zip(y_row) {
                let d = a - b;
                sq += d * d;
            }
            let norm = sq.sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNormRow { row: 0 });
            }
            Ok((x_row[j] - y_row[j]) / norm)
        }
        _ => Err(Error::InvalidParam(
            "eval_kernel_two_sample only supports the two-sample kernel".into(),
        )),
    }
}

pub(crate) fn euclidean_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Reciprocal row norms for the spatial-sign kernel; errors on a zero row.
pub(crate) fn inverse_norms(data: &SampleMatrix) -> Result<Vec<f64>> {
    (0..data.n())
        .map(|i| {
            let norm = euclidean_norm(data.row(i));
            if norm == 0.0 {
                Err(Error::ZeroNormRow { row: i })
            } else {
                Ok(1.0 / norm)
            }
        })
        .collect()
}

/// Fills `out[i] = h_l(X_i)` for an order-1 kernel by direct column
/// arithmetic. `inv_norms` must be supplied for the spatial-sign kernel.
pub(crate) fn order1_sequence(
    data: &SampleMatrix,
    spec: &KernelSpec,
    l: ComponentIndex,
    inv_norms: Option<&[f64]>,
    out: &mut [f64],
) {
    let n = data.n();
    match (spec, l) {
        (KernelSpec::Mean { mu0 }, ComponentIndex::Scalar(j)) => {
            let shift = mu0.as_ref().map_or(0.0, |m| m[j]);
            for (i, slot) in out[..n].iter_mut().enumerate() {
                *slot = data.get(i, j) - shift;
            }
        }
        (KernelSpec::SpatialSign, ComponentIndex::Scalar(j)) => {
            let w = inv_norms.expect("spatial sign needs inverse norms");
            for (i, slot) in out[..n].iter_mut().enumerate() {
                *slot = data.get(i, j) * w[i];
            }
        }
        (KernelSpec::Covariance { sigma0, .. }, ComponentIndex::Pair(a, b)) => {
            let null = sigma0.as_ref().map_or(0.0, |s| s.get(a, b));
            for (i, slot) in out[..n].iter_mut().enumerate() {
                *slot = data.get(i, a) * data.get(i, b) - null;
            }
        }
        _ => unreachable!("order-1 kernel dispatch"),
    }
}
