//! Brute-force enumeration oracles.
//!
//! These walk every index tuple in the defining sums. They exist to check
//! the dynamic programs and to compute the full symmetric statistic for
//! higher-order kernels at small n, where no fast route exists.

use crate::data::{SampleMatrix, TwoSampleData};
use crate::error::Result;
use crate::kernels::{component_set, eval_kernel, eval_kernel_two_sample, KernelSpec};

use super::{
    binomial, ensure_even_q, falling_factorial, guard_tuples, prepare_one_sample,
    prepare_two_sample, LqStatistic, Variant,
};

/// Exact full symmetric U-statistic: the kernel product averaged over all
/// tuples of mutually distinct indices.
pub fn brute_force_u(data: &SampleMatrix, spec: &KernelSpec, q: usize) -> Result<LqStatistic> {
    ensure_even_q(q)?;
    prepare_one_sample(data, spec, &[q])?;
    let r = spec.order();
    let len = q * r;
    let n = data.n();
    let normalizer = falling_factorial(n, len);
    guard_tuples(normalizer)?;
    let comps = component_set(spec, spec.component_dim(data.p()))?;

    let mut total = 0.0;
    let mut rows: Vec<&[f64]> = Vec::with_capacity(r);
    for &l in &comps {
        let mut sum = 0.0;
        let mut err = None;
        for_each_distinct_tuple(n, len, &mut |tuple| {
            let mut prod = 1.0;
            for c in 0..q {
                rows.clear();
                rows.extend(tuple[c * r..(c + 1) * r].iter().map(|&i| data.row(i)));
                match eval_kernel(spec, l, &rows) {
                    Ok(h) => prod *= h,
                    Err(e) => {
                        if err.is_none() {
                            err = Some(e);
                        }
                        return;
                    }
                }
            }
            sum += prod;
        });
        if let Some(e) = err {
            return Err(e);
        }
        total += sum;
    }
    Ok(LqStatistic {
        q,
        variant: Variant::FullSymmetric,
        value: total / normalizer,
        normalizer,
        kernel: spec.clone(),
    })
}

/// Exact monotone-index U-statistic: the sum restricted to strictly
/// increasing tuples, normalized by C(n, qr).
pub fn brute_force_u_monotone(
    data: &SampleMatrix,
    spec: &KernelSpec,
    q: usize,
) -> Result<LqStatistic> {
    ensure_even_q(q)?;
    prepare_one_sample(data, spec, &[q])?;
    let r = spec.order();
    let len = q * r;
    let n = data.n();
    let normalizer = binomial(n, len);
    guard_tuples(normalizer)?;
    let comps = component_set(spec, spec.component_dim(data.p()))?;

    let mut total = 0.0;
    let mut rows: Vec<&[f64]> = Vec::with_capacity(r);
    for &l in &comps {
        let mut sum = 0.0;
        let mut err = None;
        for_each_increasing_tuple(n, len, &mut |tuple| {
            let mut prod = 1.0;
            for c in 0..q {
                rows.clear();
                rows.extend(tuple[c * r..(c + 1) * r].iter().map(|&i| data.row(i)));
                match eval_kernel(spec, l, &rows) {
                    Ok(h) => prod *= h,
                    Err(e) => {
                        if err.is_none() {
                            err = Some(e);
                        }
                        return;
                    }
                }
            }
            sum += prod;
        });
        if let Some(e) = err {
            return Err(e);
        }
        total += sum;
    }
    Ok(LqStatistic {
        q,
        variant: Variant::MonotoneIndex,
        value: total / normalizer,
        normalizer,
        kernel: spec.clone(),
    })
}

/// Exact two-sample U-statistic for an order-(1,1) kernel, in either the
/// full (ordered distinct tuples on each sample) or monotone variant.
pub fn two_sample_brute(
    data: &TwoSampleData,
    spec: &KernelSpec,
    q: usize,
    variant: Variant,
) -> Result<LqStatistic> {
    ensure_even_q(q)?;
    prepare_two_sample(data, spec, &[q])?;
    let n = data.first.n();
    let m = data.second.n();
    let normalizer = match variant {
        Variant::FullSymmetric => falling_factorial(n, q) * falling_factorial(m, q),
        Variant::MonotoneIndex => binomial(n, q) * binomial(m, q),
    };
    guard_tuples(normalizer)?;
    let comps = component_set(spec, data.first.p())?;

    let mut i_tuples: Vec<Vec<usize>> = Vec::new();
    let mut j_tuples: Vec<Vec<usize>> = Vec::new();
    match variant {
        Variant::FullSymmetric => {
            for_each_distinct_tuple(n, q, &mut |t| i_tuples.push(t.to_vec()));
            for_each_distinct_tuple(m, q, &mut |t| j_tuples.push(t.to_vec()));
        }
        Variant::MonotoneIndex => {
            for_each_increasing_tuple(n, q, &mut |t| i_tuples.push(t.to_vec()));
            for_each_increasing_tuple(m, q, &mut |t| j_tuples.push(t.to_vec()));
        }
    }

    let mut total = 0.0;
    for &l in &comps {
        let mut sum = 0.0;
        for it in &i_tuples {
            for jt in &j_tuples {
                let mut prod = 1.0;
                for c in 0..q {
                    prod *= eval_kernel_two_sample(
                        spec,
                        l,
                        data.first.row(it[c]),
                        data.second.row(jt[c]),
                    )?;
                }
                sum += prod;
            }
        }
        total += sum;
    }
    Ok(LqStatistic {
        q,
        variant,
        value: total / normalizer,
        normalizer,
        kernel: spec.clone(),
    })
}

/// Visits every tuple of `len` mutually distinct indices from 0..n in
/// lexicographic order.
fn for_each_distinct_tuple(n: usize, len: usize, f: &mut impl FnMut(&[usize])) {
    let mut tuple = vec![0usize; len];
    let mut used = vec![false; n];
    fn rec(
        n: usize,
        len: usize,
        depth: usize,
        tuple: &mut [usize],
        used: &mut [bool],
        f: &mut impl FnMut(&[usize]),
    ) {
        if depth == len {
            f(tuple);
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                tuple[depth] = i;
                rec(n, len, depth + 1, tuple, used, f);
                used[i] = false;
            }
        }
    }
    rec(n, len, 0, &mut tuple, &mut used, f);
}

/// Visits every strictly increasing tuple of `len` indices from 0..n.
fn for_each_increasing_tuple(n: usize, len: usize, f: &mut impl FnMut(&[usize])) {
    if len > n {
        return;
    }
    let mut tuple: Vec<usize> = (0..len).collect();
    loop {
        f(&tuple);
        // advance to the next combination
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if tuple[i] != i + n - len {
                break;
            }
            if i == 0 {
                return;
            }
        }
        tuple[i] += 1;
        for j in i + 1..len {
            tuple[j] = tuple[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SampleMatrix;

    fn matrix(rows: Vec<Vec<f64>>) -> SampleMatrix {
        SampleMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn tuple_enumeration_counts() {
        let mut count = 0usize;
        for_each_distinct_tuple(5, 2, &mut |_| count += 1);
        assert_eq!(count, 20); // P^5_2

        let mut count = 0usize;
        for_each_increasing_tuple(5, 3, &mut |_| count += 1);
        assert_eq!(count, 10); // C(5,3)

        let mut seen = Vec::new();
        for_each_increasing_tuple(3, 3, &mut |t| seen.push(t.to_vec()));
        assert_eq!(seen, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn mean_kernel_hand_example() {
        // values (1,2,3), q = 2: (P^3_2)^{-1} * 2*(1*2 + 1*3 + 2*3) = 22/6
        let data = matrix(vec![vec![1.0], vec![2.0], vec![3.0]]);
        let spec = KernelSpec::Mean { mu0: None };
        let u = brute_force_u(&data, &spec, 2).unwrap();
        assert!((u.value - 22.0 / 6.0).abs() < 1e-14);
        assert_eq!(u.normalizer, 6.0);
    }

    #[test]
    fn zero_data_gives_zero() {
        let data = matrix(vec![vec![0.0, 0.0]; 5]);
        let spec = KernelSpec::Mean { mu0: None };
        assert_eq!(brute_force_u(&data, &spec, 2).unwrap().value, 0.0);
        assert_eq!(brute_force_u_monotone(&data, &spec, 2).unwrap().value, 0.0);
    }

    #[test]
    fn order1_monotone_equals_full() {
        let data = matrix(vec![
            vec![0.4],
            vec![-1.2],
            vec![0.7],
            vec![2.1],
            vec![-0.3],
            vec![1.6],
        ]);
        let spec = KernelSpec::Mean { mu0: None };
        let full = brute_force_u(&data, &spec, 2).unwrap();
        let mono = brute_force_u_monotone(&data, &spec, 2).unwrap();
        assert!((full.value - mono.value).abs() <= 1e-12 * full.value.abs());
        assert_eq!(full.normalizer, 30.0);
        assert_eq!(mono.normalizer, 15.0);
    }

    #[test]
    fn sample_too_small_is_rejected() {
        let data = matrix(vec![vec![1.0], vec![2.0], vec![3.0]]);
        let spec = KernelSpec::KendallTau;
        // needs n >= q*r = 4
        assert!(brute_force_u_monotone(&data, &spec, 2).is_err());
    }

    #[test]
    fn two_sample_zero_difference_is_zero() {
        let rows = vec![vec![1.0, 2.0]; 4];
        let d = TwoSampleData::new(matrix(rows.clone()), matrix(rows)).unwrap();
        let spec = KernelSpec::TwoSampleSpatialSign;
        // identical constant samples make every difference zero, which the
        // spatial-sign kernel rejects as a zero-norm observation
        assert!(two_sample_brute(&d, &spec, 2, Variant::MonotoneIndex).is_err());
    }

    #[test]
    fn guard_rejects_large_enumerations() {
        let data = matrix((0..64).map(|i| vec![i as f64]).collect());
        let spec = KernelSpec::Mean { mu0: None };
        assert!(brute_force_u(&data, &spec, 8).is_err());
    }
}
