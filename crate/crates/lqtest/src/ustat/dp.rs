//! Dynamic programs for the U-statistics.
//!
//! All of them build on the same counting identity: let D_c(m) be the sum
//! of c-fold kernel products over strictly increasing index tuples drawn
//! from the first m observations. Then D_0 ≡ 1 and D_c(m) extends
//! D_c(m−1) by every term whose last kernel block ends at observation m,
//! which factors through D_{c−1} evaluated just below the block. Running
//! c = 1..q left to right yields every level in one sweep.
//!
//! The order-2 kernels get a blocked layout: components are processed in
//! chunks whose DP state fits in cache, with the per-observation sign (or
//! residual-difference) rows shared across the chunk.

use crate::data::{SampleMatrix, TwoSampleData};
use crate::error::{Error, Result};
use crate::kernels::{component_set, eval_kernel, sgn, ComponentIndex, KernelSpec};

use super::{
    binomial, falling_factorial, prepare_one_sample, prepare_two_sample, LqStatistic, Variant,
};

/// Monotone-index U-statistics U^M for every q in `qs` in one DP sweep.
pub fn dp_monotone_multi(
    data: &SampleMatrix,
    spec: &KernelSpec,
    qs: &[usize],
) -> Result<Vec<LqStatistic>> {
    let qmax = prepare_one_sample(data, spec, qs)?;
    let sums = monotone_level_sums(data, spec, qmax)?;
    let n = data.n();
    let r = spec.order();
    Ok(qs
        .iter()
        .map(|&q| {
            let normalizer = binomial(n, q * r);
            LqStatistic {
                q,
                variant: Variant::MonotoneIndex,
                value: sums[q] / normalizer,
                normalizer,
                kernel: spec.clone(),
            }
        })
        .collect())
}

pub fn dp_monotone(data: &SampleMatrix, spec: &KernelSpec, q: usize) -> Result<LqStatistic> {
    Ok(dp_monotone_multi(data, spec, &[q])?.pop().unwrap())
}

/// Exact full symmetric U-statistics for order-1 kernels, every q in `qs`.
pub fn dp_order1_full_multi(
    data: &SampleMatrix,
    spec: &KernelSpec,
    qs: &[usize],
) -> Result<Vec<LqStatistic>> {
    if spec.order() != 1 {
        return Err(Error::NotOrderOne(spec.order()));
    }
    let qmax = prepare_one_sample(data, spec, qs)?;
    let sums = monotone_level_sums(data, spec, qmax)?;
    let n = data.n();
    Ok(qs
        .iter()
        .map(|&q| LqStatistic {
            q,
            variant: Variant::FullSymmetric,
            // ordered distinct tuples regroup into q! copies of each
            // increasing tuple, so the full statistic is D_q(n) / C(n, q)
            value: sums[q] / binomial(n, q),
            normalizer: falling_factorial(n, q),
            kernel: spec.clone(),
        })
        .collect())
}

pub fn dp_order1_full(data: &SampleMatrix, spec: &KernelSpec, q: usize) -> Result<LqStatistic> {
    Ok(dp_order1_full_multi(data, spec, &[q])?.pop().unwrap())
}

/// Two-sample monotone-index U-statistics for every q in `qs`.
pub fn two_sample_dp_multi(
    data: &TwoSampleData,
    spec: &KernelSpec,
    qs: &[usize],
) -> Result<Vec<LqStatistic>> {
    let qmax = prepare_two_sample(data, spec, qs)?;
    let sums = two_sample_level_sums(data, qmax)?;
    let n = data.first.n();
    let m = data.second.n();
    Ok(qs
        .iter()
        .map(|&q| {
            let normalizer = binomial(n, q) * binomial(m, q);
            LqStatistic {
                q,
                variant: Variant::MonotoneIndex,
                value: sums[q] / normalizer,
                normalizer,
                kernel: spec.clone(),
            }
        })
        .collect())
}

pub fn two_sample_dp(data: &TwoSampleData, spec: &KernelSpec, q: usize) -> Result<LqStatistic> {
    Ok(two_sample_dp_multi(data, spec, &[q])?.pop().unwrap())
}

/// Σ_l D_c(n) for c = 0..=qmax, dispatched by kernel order.
fn monotone_level_sums(data: &SampleMatrix, spec: &KernelSpec, qmax: usize) -> Result<Vec<f64>> {
    match spec {
        KernelSpec::Mean { .. } | KernelSpec::SpatialSign | KernelSpec::Covariance { .. } => {
            order1_sums(data, spec, qmax)
        }
        KernelSpec::KendallTau => {
            let comps = pair_components(spec, data.p())?;
            Ok(kendall_sums(&data.to_columns(), &comps, qmax))
        }
        KernelSpec::LinRegCoef { beta0 } => {
            let residuals = regression_residuals(data, beta0.as_deref());
            let p_cov = data.p() - 1;
            let cols: Vec<Vec<f64>> = (0..p_cov).map(|j| data.column(j)).collect();
            Ok(linreg_sums(&cols, &residuals, qmax))
        }
        KernelSpec::SpearmanRho => {
            let comps = component_set(spec, data.p())?;
            spearman_sums(data, spec, &comps, qmax)
        }
        KernelSpec::TwoSampleSpatialSign => Err(Error::InvalidParam(
            "two-sample problem requires two_sample_dp".into(),
        )),
    }
}

/// One-level recursion over a scalar sequence: D_c(m) = D_c(m−1) +
/// D_{c−1}(m−1) a_m. Returns D_c(n) for c = 0..=qmax.
pub(crate) fn sequence_levels(seq: &[f64], qmax: usize) -> Vec<f64> {
    let n = seq.len();
    let mut levels = vec![vec![0.0f64; n + 1]; qmax + 1];
    levels[0].iter_mut().for_each(|v| *v = 1.0);
    for c in 1..=qmax {
        let (prev, cur) = {
            let (a, b) = levels.split_at_mut(c);
            (&a[c - 1], &mut b[0])
        };
        for m in c..=n {
            cur[m] = cur[m - 1] + prev[m - 1] * seq[m - 1];
        }
    }
    levels.iter().map(|row| row[n]).collect()
}

fn order1_sums(data: &SampleMatrix, spec: &KernelSpec, qmax: usize) -> Result<Vec<f64>> {
    let comps = component_set(spec, data.p())?;
    let n = data.n();
    let mut sums = vec![0.0f64; qmax + 1];
    let mut seq = vec![0.0f64; n];
    let inv_norms = match spec {
        KernelSpec::SpatialSign => Some(crate::kernels::inverse_norms(data)?),
        _ => None,
    };
    for &l in &comps {
        crate::kernels::order1_sequence(data, spec, l, inv_norms.as_deref(), &mut seq);
        let levels = sequence_levels(&seq, qmax);
        for c in 0..=qmax {
            sums[c] += levels[c];
        }
    }
    sums[0] = 1.0; // empty product level, unused by callers
    Ok(sums)
}

fn regression_residuals(joint: &SampleMatrix, beta0: Option<&[f64]>) -> Vec<f64> {
    let p_cov = joint.p() - 1;
    (0..joint.n())
        .map(|i| {
            let row = joint.row(i);
            let mut e = row[p_cov];
            if let Some(b) = beta0 {
                for d in 0..p_cov {
                    e -= row[d] * b[d];
                }
            }
            e
        })
        .collect()
}

fn pair_components(spec: &KernelSpec, p: usize) -> Result<Vec<(usize, usize)>> {
    Ok(component_set(spec, p)?
        .into_iter()
        .map(|l| match l {
            ComponentIndex::Pair(a, b) => (a, b),
            ComponentIndex::Scalar(_) => unreachable!("pair-indexed problem"),
        })
        .collect())
}

// Picks a component-block length so a block's DP state stays near 1 MB.
fn block_len(n: usize, qmax: usize, ncomp: usize) -> usize {
    (131_072 / ((qmax + 1) * (n + 1))).clamp(1, ncomp.max(1))
}

/// Blocked DP for the rank-correlation kernel. For each observation m the
/// per-column comparison signs against the earlier rows are shared by the
/// whole component block, so the inner loop is a sign product feeding q
/// fused accumulator chains.
fn kendall_sums(cols: &[Vec<f64>], comps: &[(usize, usize)], qmax: usize) -> Vec<f64> {
    let p = cols.len();
    let n = cols[0].len();
    let stride = n + 1;
    let lstride = (qmax + 1) * stride;
    let bl = block_len(n, qmax, comps.len());
    let mut dp = vec![0.0f64; bl * lstride];
    let mut smat = vec![0.0f64; p * n];
    let mut tbuf = vec![0.0f64; n];
    let mut sums = vec![0.0f64; qmax + 1];
    sums[0] = 1.0; // empty product level, unused by callers

    for block in comps.chunks(bl) {
        reset_block(&mut dp, block.len(), stride, lstride);
        for m in 1..=n {
            let kmax = m - 1;
            for (d, col) in cols.iter().enumerate() {
                let xm = col[kmax];
                let srow = &mut smat[d * n..d * n + kmax];
                for (u, s) in srow.iter_mut().enumerate() {
                    *s = sgn(col[u] - xm);
                }
            }
            for (li, &(d1, d2)) in block.iter().enumerate() {
                let s1 = &smat[d1 * n..d1 * n + kmax];
                let s2 = &smat[d2 * n..d2 * n + kmax];
                let base = li * lstride;
                accumulate_levels(&mut dp, base, stride, qmax, m, kmax, &mut tbuf, |u| {
                    s1[u] * s2[u]
                });
            }
        }
        harvest_block(&dp, block.len(), stride, lstride, qmax, n, &mut sums);
    }
    sums
}

/// Blocked DP for the regression-coefficient kernel; the residual
/// difference row is shared across components, the covariate difference
/// is formed in place.
fn linreg_sums(cov_cols: &[Vec<f64>], residuals: &[f64], qmax: usize) -> Vec<f64> {
    let n = residuals.len();
    let stride = n + 1;
    let lstride = (qmax + 1) * stride;
    let ncomp = cov_cols.len();
    let bl = block_len(n, qmax, ncomp);
    let mut dp = vec![0.0f64; bl * lstride];
    let mut de = vec![0.0f64; n];
    let mut tbuf = vec![0.0f64; n];
    let mut sums = vec![0.0f64; qmax + 1];
    sums[0] = 1.0; // empty product level, unused by callers

    let comp_ids: Vec<usize> = (0..ncomp).collect();
    for block in comp_ids.chunks(bl) {
        reset_block(&mut dp, block.len(), stride, lstride);
        for m in 1..=n {
            let kmax = m - 1;
            let em = residuals[kmax];
            for u in 0..kmax {
                de[u] = 0.5 * (residuals[u] - em);
            }
            for (li, &j) in block.iter().enumerate() {
                let col = &cov_cols[j];
                let xm = col[kmax];
                let base = li * lstride;
                accumulate_levels(&mut dp, base, stride, qmax, m, kmax, &mut tbuf, |u| {
                    (col[u] - xm) * de[u]
                });
            }
        }
        harvest_block(&dp, block.len(), stride, lstride, qmax, n, &mut sums);
    }
    sums
}

fn reset_block(dp: &mut [f64], nb: usize, stride: usize, lstride: usize) {
    for li in 0..nb {
        let base = li * lstride;
        dp[base..base + stride].iter_mut().for_each(|v| *v = 1.0);
        dp[base + stride..base + lstride]
            .iter_mut()
            .for_each(|v| *v = 0.0);
    }
}

fn harvest_block(
    dp: &[f64],
    nb: usize,
    stride: usize,
    lstride: usize,
    qmax: usize,
    n: usize,
    sums: &mut [f64],
) {
    for li in 0..nb {
        let base = li * lstride;
        for c in 1..=qmax {
            sums[c] += dp[base + c * stride + n];
        }
    }
}

/// Advances every DP level of one component by observation m. `term(u)`
/// is the kernel value pairing earlier row u with row m−1. The common
/// q are unrolled so each level is a straight fused multiply chain.
#[inline(always)]
fn accumulate_levels(
    dp: &mut [f64],
    base: usize,
    stride: usize,
    qmax: usize,
    m: usize,
    kmax: usize,
    tbuf: &mut [f64],
    term: impl Fn(usize) -> f64,
) {
    let mut acc = [0.0f64; 8];
    match qmax {
        2 => {
            let d1 = &dp[base + stride..base + stride + kmax];
            let (mut a1, mut a2) = (0.0f64, 0.0f64);
            for u in 0..kmax {
                let t = term(u);
                a1 += t;
                a2 += d1[u] * t;
            }
            acc[1] = a1;
            acc[2] = a2;
        }
        4 => {
            let d1 = &dp[base + stride..base + stride + kmax];
            let d2 = &dp[base + 2 * stride..base + 2 * stride + kmax];
            let d3 = &dp[base + 3 * stride..base + 3 * stride + kmax];
            let (mut a1, mut a2, mut a3, mut a4) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for u in 0..kmax {
                let t = term(u);
                a1 += t;
                a2 += d1[u] * t;
                a3 += d2[u] * t;
                a4 += d3[u] * t;
            }
            acc[1] = a1;
            acc[2] = a2;
            acc[3] = a3;
            acc[4] = a4;
        }
        6 => {
            let d1 = &dp[base + stride..base + stride + kmax];
            let d2 = &dp[base + 2 * stride..base + 2 * stride + kmax];
            let d3 = &dp[base + 3 * stride..base + 3 * stride + kmax];
            let d4 = &dp[base + 4 * stride..base + 4 * stride + kmax];
            let d5 = &dp[base + 5 * stride..base + 5 * stride + kmax];
            let (mut a1, mut a2, mut a3) = (0.0f64, 0.0f64, 0.0f64);
            let (mut a4, mut a5, mut a6) = (0.0f64, 0.0f64, 0.0f64);
            for u in 0..kmax {
                let t = term(u);
                a1 += t;
                a2 += d1[u] * t;
                a3 += d2[u] * t;
                a4 += d3[u] * t;
                a5 += d4[u] * t;
                a6 += d5[u] * t;
            }
            acc[1] = a1;
            acc[2] = a2;
            acc[3] = a3;
            acc[4] = a4;
            acc[5] = a5;
            acc[6] = a6;
        }
        _ => {
            let t = &mut tbuf[..kmax];
            let mut a1 = 0.0f64;
            for (u, slot) in t.iter_mut().enumerate() {
                let v = term(u);
                *slot = v;
                a1 += v;
            }
            acc[1] = a1;
            for c in 2..=qmax.min(acc.len() - 1) {
                let prev = &dp[base + (c - 1) * stride..base + (c - 1) * stride + kmax];
                acc[c] = dot(prev, t);
            }
            if qmax >= acc.len() {
                // rare large q: fall back to per-level dot products
                for c in acc.len()..=qmax {
                    let prev = &dp[base + (c - 1) * stride..base + (c - 1) * stride + kmax];
                    let v = dot(prev, t);
                    let row = base + c * stride;
                    dp[row + m] = dp[row + m - 1] + v;
                }
            }
        }
    }
    for c in 1..=qmax.min(7) {
        let row = base + c * stride;
        dp[row + m] = dp[row + m - 1] + acc[c];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let chunks = n / 4 * 4;
    let mut i = 0;
    while i < chunks {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut s = (s0 + s1) + (s2 + s3);
    while i < n {
        s += a[i] * b[i];
        i += 1;
    }
    s
}

/// Order-3 DP: the update at observation m sums D_{c−1}(i1−1) h(i1, i2, m)
/// over increasing pairs i1 < i2 < m.
fn spearman_sums(
    data: &SampleMatrix,
    spec: &KernelSpec,
    comps: &[ComponentIndex],
    qmax: usize,
) -> Result<Vec<f64>> {
    let n = data.n();
    let mut sums = vec![0.0f64; qmax + 1];
    sums[0] = 1.0; // empty product level, unused by callers
    let mut dp = vec![vec![0.0f64; n + 1]; qmax + 1];
    for &l in comps {
        dp[0].iter_mut().for_each(|v| *v = 1.0);
        for row in dp.iter_mut().skip(1) {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        for m in 1..=n {
            let xm = data.row(m - 1);
            let mut acc = vec![0.0f64; qmax + 1];
            for i2 in 2..m {
                let x2 = data.row(i2 - 1);
                for i1 in 1..i2 {
                    let h = eval_kernel(spec, l, &[data.row(i1 - 1), x2, xm])?;
                    for c in 1..=qmax {
                        acc[c] += dp[c - 1][i1 - 1] * h;
                    }
                }
            }
            for c in 1..=qmax {
                dp[c][m] = dp[c][m - 1] + acc[c];
            }
        }
        for c in 1..=qmax {
            sums[c] += dp[c][n];
        }
    }
    Ok(sums)
}

/// Two-sample DP via row-wise prefix sums: with t(i,j) the kernel at
/// (X_i, Y_j), D_c(i, ·) = D_c(i−1, ·) + cumsum_j D_{c−1}(i−1, j−1) t(i,j).
fn two_sample_level_sums(data: &TwoSampleData, qmax: usize) -> Result<Vec<f64>> {
    let n = data.first.n();
    let m = data.second.n();
    let p = data.first.p();
    // inverse distances, dense n×m
    let mut w = vec![0.0f64; n * m];
    for i in 0..n {
        let xi = data.first.row(i);
        let wrow = &mut w[i * m..(i + 1) * m];
        for (j, slot) in wrow.iter_mut().enumerate() {
            let yj = data.second.row(j);
            let mut sq = 0.0;
            for d in 0..p {
                let diff = xi[d] - yj[d];
                sq += diff * diff;
            }
            if sq == 0.0 {
                return Err(Error::ZeroNormRow { row: i });
            }
            *slot = 1.0 / sq.sqrt();
        }
    }

    let mut sums = vec![0.0f64; qmax + 1];
    sums[0] = 1.0; // empty product level, unused by callers
    let mut rows = vec![vec![0.0f64; m + 1]; qmax + 1];
    let mut t = vec![0.0f64; m];
    for l in 0..p {
        let xc = data.first.column(l);
        let yc = data.second.column(l);
        rows[0].iter_mut().for_each(|v| *v = 1.0);
        for row in rows.iter_mut().skip(1) {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        for i in 1..=n {
            let xv = xc[i - 1];
            let wrow = &w[(i - 1) * m..i * m];
            for j in 0..m {
                t[j] = (xv - yc[j]) * wrow[j];
            }
            for c in (1..=qmax).rev() {
                let (lo, hi) = rows.split_at_mut(c);
                let prev = &lo[c - 1];
                let cur = &mut hi[0];
                let mut running = 0.0;
                for j in 1..=m {
                    running += prev[j - 1] * t[j - 1];
                    cur[j] += running;
                }
            }
        }
        for c in 1..=qmax {
            sums[c] += rows[c][m];
        }
    }
    Ok(sums)
}
