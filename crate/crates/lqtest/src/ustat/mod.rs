//! L_q-norm U-statistics.
//!
//! Three computation routes:
//!
//! * brute-force enumeration over index tuples — the oracle, feasible only
//!   for small samples and guarded by a tuple-count limit;
//! * an exact dynamic program for order-1 kernels computing the full
//!   symmetric statistic in O(q n |L|);
//! * a dynamic program over monotone (strictly increasing) index tuples
//!   for any kernel order, in O(q n^r |L|), plus its two-sample variant.
//!
//! The full statistic sums the kernel product over all tuples of mutually
//! distinct indices and divides by the falling factorial P^n_{qr}; the
//! monotone variant keeps only increasing tuples and divides by C(n, qr).
//! For order-1 kernels the two coincide value-for-value.

mod brute;
mod dp;

use serde::Serialize;

use crate::data::{SampleMatrix, TwoSampleData};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, SampleArity};

pub use brute::{brute_force_u, brute_force_u_monotone, two_sample_brute};
pub use dp::{
    dp_monotone, dp_monotone_multi, dp_order1_full, dp_order1_full_multi, two_sample_dp,
    two_sample_dp_multi,
};
pub(crate) use dp::sequence_levels;

/// Cap on the number of index tuples the brute-force oracles will visit.
pub const TUPLE_GUARD: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    FullSymmetric,
    MonotoneIndex,
}

/// One computed L_q-norm U-statistic.
#[derive(Debug, Clone)]
pub struct LqStatistic {
    pub q: usize,
    pub variant: Variant,
    /// The normalized statistic (sum of kernel products over tuples,
    /// divided by `normalizer` — with the full symmetric route expressed
    /// over ordered tuples).
    pub value: f64,
    /// Number of index tuples in the defining sum.
    pub normalizer: f64,
    pub kernel: KernelSpec,
}

pub(crate) fn ensure_even_q(q: usize) -> Result<()> {
    if q < 2 || q % 2 != 0 {
        return Err(Error::InvalidQ(q));
    }
    Ok(())
}

pub(crate) fn ensure_q_list(qs: &[usize]) -> Result<()> {
    if qs.is_empty() {
        return Err(Error::InvalidParam("empty q list".into()));
    }
    for &q in qs {
        ensure_even_q(q)?;
    }
    if qs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam(
            "q list must be strictly increasing".into(),
        ));
    }
    Ok(())
}

pub(crate) fn ensure_one_sample(spec: &KernelSpec) -> Result<()> {
    if spec.sample_arity() != SampleArity::OneSample {
        return Err(Error::InvalidParam(format!(
            "problem {} needs the two-sample operations",
            spec.problem()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_sample_size(n: usize, needed: usize) -> Result<()> {
    if n < needed {
        return Err(Error::SampleTooSmall { needed, n });
    }
    Ok(())
}

/// Falling factorial P^n_k = n (n−1) ⋯ (n−k+1) as a double.
pub(crate) fn falling_factorial(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

/// Binomial coefficient as a running product of ratios; stays exact while
/// the value is below 2^53 and never touches raw factorials.
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 1..=k {
        c = c * ((n - k + i) as f64) / (i as f64);
    }
    c
}

pub(crate) fn guard_tuples(tuples: f64) -> Result<()> {
    if tuples > TUPLE_GUARD {
        return Err(Error::TupleGuard {
            tuples,
            limit: TUPLE_GUARD,
        });
    }
    Ok(())
}

pub(crate) fn prepare_one_sample(
    data: &SampleMatrix,
    spec: &KernelSpec,
    qs: &[usize],
) -> Result<usize> {
    ensure_q_list(qs)?;
    ensure_one_sample(spec)?;
    let p = spec.component_dim(data.p());
    spec.validate_params(p)?;
    let qmax = *qs.last().unwrap();
    ensure_sample_size(data.n(), qmax * spec.order())?;
    Ok(qmax)
}

pub(crate) fn prepare_two_sample(
    data: &TwoSampleData,
    spec: &KernelSpec,
    qs: &[usize],
) -> Result<usize> {
    ensure_q_list(qs)?;
    if spec.sample_arity() != SampleArity::TwoSample {
        return Err(Error::InvalidParam(format!(
            "problem {} is a one-sample problem",
            spec.problem()
        )));
    }
    spec.validate_params(data.first.p())?;
    let qmax = *qs.last().unwrap();
    ensure_sample_size(data.first.n(), qmax)?;
    ensure_sample_size(data.second.n(), qmax)?;
    Ok(qmax)
}
