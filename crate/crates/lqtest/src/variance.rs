//! Variance estimation and studentized test statistics.
//!
//! Order-1 kernels get the analytic estimator: center each component
//! kernel at its sample mean, then run the same order-1 U-statistic
//! machinery over the product kernels indexed by component pairs,
//!
//! Σ̂₁(q) = Σ_{l₁,l₂} (P^n_q)⁻¹ Σ* Π_c ĥ_{l₁}(X_c) ĥ_{l₂}(X_c),
//!
//! which is ratio-consistent for the null variance Σ̃₁(q). Everything
//! else is studentized against the permutation estimator: recompute the
//! monotone statistic on B null-preserving permutations of the data and
//! take the sample variance (or read the critical value straight off the
//! permutation draws).

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{derive_stream, DataSet, SampleMatrix, SeedSpec, TwoSampleData};
use crate::error::{Error, Result};
use crate::kernels::{component_set, KernelSpec, Problem, SampleArity};
use crate::normal;
use crate::power::ln_factorial;
use crate::ustat::{
    dp_monotone_multi, ensure_q_list, ensure_sample_size, two_sample_dp_multi, LqStatistic,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMethod {
    AnalyticR1,
    PermutationVariance,
    PermutationEmpirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationScheme {
    /// Each column permuted by an independent uniform permutation
    /// (component-wise independence nulls).
    ColumnsIndependent,
    /// Response column shuffled, covariates fixed (regression null).
    ResponseShuffle,
    /// Pooled rows relabeled into groups of the original sizes
    /// (two-sample nulls).
    PooledRelabel,
}

impl PermutationScheme {
    pub fn name(self) -> &'static str {
        match self {
            PermutationScheme::ColumnsIndependent => "columns-independent",
            PermutationScheme::ResponseShuffle => "response-shuffle",
            PermutationScheme::PooledRelabel => "pooled-relabel",
        }
    }
}

/// The null-preserving permutation scheme for a problem, if one exists.
pub fn scheme_for(problem: Problem) -> Option<PermutationScheme> {
    match problem {
        Problem::KendallTau | Problem::SpearmanRho => Some(PermutationScheme::ColumnsIndependent),
        Problem::LinRegCoef => Some(PermutationScheme::ResponseShuffle),
        Problem::TwoSampleSpatialSign => Some(PermutationScheme::PooledRelabel),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PermutationPlan {
    pub permutations: usize,
    pub seed: SeedSpec,
    pub scheme: PermutationScheme,
}

impl PermutationPlan {
    pub fn new(permutations: usize, seed: SeedSpec, scheme: PermutationScheme) -> Result<Self> {
        if permutations < 2 {
            return Err(Error::InvalidParam(
                "need at least 2 permutations to form a variance".into(),
            ));
        }
        Ok(Self {
            permutations,
            seed,
            scheme,
        })
    }
}

/// A studentized statistic with its one-sided p-value.
#[derive(Debug, Clone, Serialize)]
pub struct StudentizedResult {
    pub q: usize,
    pub statistic: f64,
    pub variance_estimate: f64,
    pub p_value: f64,
    pub method: VarianceMethod,
}

/// Analytic variance estimate Σ̂₁(q) for each q in `qs` (order-1 kernels).
///
/// Cost is O(q n |L|²): every ordered component pair contributes an
/// order-1 U-statistic of the centered product sequence.
pub fn analytic_variance_r1_multi(
    data: &SampleMatrix,
    spec: &KernelSpec,
    qs: &[usize],
) -> Result<Vec<f64>> {
    if spec.order() != 1 {
        return Err(Error::NotOrderOne(spec.order()));
    }
    ensure_q_list(qs)?;
    let qmax = *qs.last().unwrap();
    let n = data.n();
    ensure_sample_size(n, qmax)?;
    spec.validate_params(data.p())?;

    let comps = component_set(spec, data.p())?;
    let inv_norms = match spec {
        KernelSpec::SpatialSign => Some(crate::kernels::inverse_norms(data)?),
        _ => None,
    };
    // centered kernel values, one row per component
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(comps.len());
    let mut buf = vec![0.0f64; n];
    for &l in &comps {
        crate::kernels::order1_sequence(data, spec, l, inv_norms.as_deref(), &mut buf);
        let mean = buf.iter().sum::<f64>() / n as f64;
        centered.push(buf.iter().map(|v| v - mean).collect());
    }

    let mut sums = vec![0.0f64; qmax + 1];
    let mut prod = vec![0.0f64; n];
    for i in 0..centered.len() {
        for j in i..centered.len() {
            let (hi, hj) = (&centered[i], &centered[j]);
            for u in 0..n {
                prod[u] = hi[u] * hj[u];
            }
            let levels = crate::ustat::sequence_levels(&prod, qmax);
            let weight = if i == j { 1.0 } else { 2.0 };
            for c in 1..=qmax {
                sums[c] += weight * levels[c];
            }
        }
    }

    let mut out = Vec::with_capacity(qs.len());
    for &q in qs {
        let sigma = sums[q] / crate::ustat::binomial(n, q);
        if sigma <= 0.0 {
            return Err(Error::DegenerateVariance(sigma));
        }
        out.push(sigma);
    }
    Ok(out)
}

pub fn analytic_variance_r1(data: &SampleMatrix, spec: &KernelSpec, q: usize) -> Result<f64> {
    Ok(analytic_variance_r1_multi(data, spec, &[q])?.pop().unwrap())
}

/// Applies a null-preserving permutation to the dataset.
pub fn permute(data: &DataSet, scheme: PermutationScheme, rng: &mut ChaCha8Rng) -> Result<DataSet> {
    match (scheme, data) {
        (PermutationScheme::ColumnsIndependent, DataSet::OneSample(m)) => {
            let mut cols = m.to_columns();
            for col in cols.iter_mut() {
                col.shuffle(rng);
            }
            let n = m.n();
            let p = m.p();
            let mut values = Vec::with_capacity(n * p);
            for i in 0..n {
                for col in &cols {
                    values.push(col[i]);
                }
            }
            Ok(DataSet::OneSample(SampleMatrix::new(values, n, p)?))
        }
        (PermutationScheme::ResponseShuffle, DataSet::OneSample(m)) => {
            let n = m.n();
            let p = m.p();
            let mut response = m.column(p - 1);
            response.shuffle(rng);
            let mut values = Vec::with_capacity(n * p);
            for i in 0..n {
                values.extend_from_slice(&m.row(i)[..p - 1]);
                values.push(response[i]);
            }
            Ok(DataSet::OneSample(SampleMatrix::new(values, n, p)?))
        }
        (PermutationScheme::PooledRelabel, DataSet::TwoSample(d)) => {
            let n = d.first.n();
            let m = d.second.n();
            let mut idx: Vec<usize> = (0..n + m).collect();
            idx.shuffle(rng);
            let pooled_row = |i: usize| {
                if i < n {
                    d.first.row(i)
                } else {
                    d.second.row(i - n)
                }
            };
            let p = d.first.p();
            let mut first = Vec::with_capacity(n * p);
            for &i in &idx[..n] {
                first.extend_from_slice(pooled_row(i));
            }
            let mut second = Vec::with_capacity(m * p);
            for &i in &idx[n..] {
                second.extend_from_slice(pooled_row(i));
            }
            Ok(DataSet::TwoSample(TwoSampleData::new(
                SampleMatrix::new(first, n, p)?,
                SampleMatrix::new(second, m, p)?,
            )?))
        }
        (scheme, _) => Err(Error::IncompatibleScheme {
            scheme: scheme.name(),
            problem: "dataset of this shape",
        }),
    }
}

fn monotone_values(data: &DataSet, spec: &KernelSpec, qs: &[usize]) -> Result<Vec<f64>> {
    let stats = match (spec.sample_arity(), data) {
        (SampleArity::OneSample, DataSet::OneSample(m)) => dp_monotone_multi(m, spec, qs)?,
        (SampleArity::TwoSample, DataSet::TwoSample(d)) => two_sample_dp_multi(d, spec, qs)?,
        _ => {
            return Err(Error::InvalidParam(format!(
                "dataset shape does not match problem {}",
                spec.problem()
            )))
        }
    };
    Ok(stats.into_iter().map(|s| s.value).collect())
}

/// Recomputes the monotone statistic on `plan.permutations` permuted
/// datasets. Result is indexed `[q position][permutation]`; permutation b
/// always runs on the stream `derive_stream(plan.seed, b)`, so the draws
/// are identical for any thread count.
pub fn permutation_draws(
    data: &DataSet,
    spec: &KernelSpec,
    qs: &[usize],
    plan: &PermutationPlan,
) -> Result<Vec<Vec<f64>>> {
    let canonical = scheme_for(spec.problem()).ok_or(Error::IncompatibleScheme {
        scheme: plan.scheme.name(),
        problem: spec.problem().cli_name(),
    })?;
    if canonical != plan.scheme {
        return Err(Error::IncompatibleScheme {
            scheme: plan.scheme.name(),
            problem: spec.problem().cli_name(),
        });
    }
    let per_b: Vec<Vec<f64>> = (0..plan.permutations)
        .into_par_iter()
        .map(|b| {
            let mut rng = derive_stream(plan.seed, b as u64).rng();
            let permuted = permute(data, plan.scheme, &mut rng)?;
            monotone_values(&permuted, spec, qs)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut draws = vec![vec![0.0f64; plan.permutations]; qs.len()];
    for (b, values) in per_b.iter().enumerate() {
        for (qi, v) in values.iter().enumerate() {
            draws[qi][b] = *v;
        }
    }
    Ok(draws)
}

/// Permutation variance V^M for each q, plus the raw draws for the
/// empirical-critical-value mode.
pub fn permutation_variance(
    data: &DataSet,
    spec: &KernelSpec,
    qs: &[usize],
    plan: &PermutationPlan,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let draws = permutation_draws(data, spec, qs, plan)?;
    let mut variances = Vec::with_capacity(qs.len());
    for row in &draws {
        let v = sample_variance(row);
        if v <= 0.0 {
            return Err(Error::DegenerateVariance(v));
        }
        variances.push(v);
    }
    Ok((variances, draws))
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let b = xs.len();
    let mean = xs.iter().sum::<f64>() / b as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b as f64 - 1.0)
}

/// Studentizes a full symmetric order-1 statistic:
/// T = (q!)^{-1/2} n^{q/2} Σ̂₁^{-1/2}(q) U, with one-sided p = 1 − Φ(T).
pub fn studentize_r1(u: &LqStatistic, sigma_hat: f64, n: usize) -> Result<StudentizedResult> {
    if u.kernel.order() != 1 {
        return Err(Error::NotOrderOne(u.kernel.order()));
    }
    if sigma_hat <= 0.0 {
        return Err(Error::DegenerateVariance(sigma_hat));
    }
    let q = u.q;
    // scale in log space: n^{q/2} / sqrt(q! * sigma)
    let ln_scale = 0.5 * (q as f64) * (n as f64).ln() - 0.5 * ln_factorial(q) - 0.5 * sigma_hat.ln();
    let t = u.value * ln_scale.exp();
    Ok(StudentizedResult {
        q,
        statistic: t,
        variance_estimate: sigma_hat,
        p_value: normal::sf(t),
        method: VarianceMethod::AnalyticR1,
    })
}

/// Studentizes a monotone statistic: T^M = U^M / sqrt(V^M).
pub fn studentize_monotone(u: &LqStatistic, v: f64) -> Result<StudentizedResult> {
    if v <= 0.0 {
        return Err(Error::DegenerateVariance(v));
    }
    let t = u.value / v.sqrt();
    Ok(StudentizedResult {
        q: u.q,
        statistic: t,
        variance_estimate: v,
        p_value: normal::sf(t),
        method: VarianceMethod::PermutationVariance,
    })
}

/// p = (1 + #{draws ≥ observed}) / (B + 1); never exactly zero.
pub fn empirical_pvalue(observed: f64, null_draws: &[f64]) -> f64 {
    let ge = null_draws.iter().filter(|d| **d >= observed).count();
    (1 + ge) as f64 / (null_draws.len() + 1) as f64
}
