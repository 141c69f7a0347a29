//! Property tests for the statistic engines and plumbing.

use proptest::prelude::*;

use lqtest::data::{derive_stream, DataSet, SampleMatrix, SeedSpec};
use lqtest::kernels::KernelSpec;
use lqtest::ustat::{brute_force_u, dp_order1_full};
use lqtest::variance::{analytic_variance_r1, empirical_pvalue};

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

// matrices with entries bounded away from degenerate all-zero rows
fn small_matrix() -> impl Strategy<Value = SampleMatrix> {
    (2usize..=3, 5usize..=8)
        .prop_flat_map(|(p, n)| {
            proptest::collection::vec(0.1f64..2.0, n * p).prop_map(move |mut vals| {
                for (i, v) in vals.iter_mut().enumerate() {
                    if i % 3 == 0 {
                        *v = -*v;
                    }
                }
                SampleMatrix::new(vals, n, p).unwrap()
            })
        })
        .no_shrink()
}

fn permutation(n: usize, salt: u64) -> Vec<usize> {
    // deterministic pseudo-shuffle driven by the salt
    let mut idx: Vec<usize> = (0..n).collect();
    let mut state = salt.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    for i in (1..n).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let j = (state % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // the full symmetric statistic ignores the order of the observations
    #[test]
    fn full_statistic_is_row_permutation_invariant(
        data in small_matrix(),
        salt in 0u64..1000,
    ) {
        let perm = permutation(data.n(), salt);
        let shuffled = data.select_rows(&perm);
        for spec in [
            KernelSpec::Mean { mu0: None },
            KernelSpec::Covariance { sigma0: None, band: 0 },
        ] {
            for q in [2usize, 4] {
                let a = dp_order1_full(&data, &spec, q).unwrap().value;
                let b = dp_order1_full(&shuffled, &spec, q).unwrap().value;
                prop_assert!(rel_err(a, b) < 1e-10, "{a} vs {b}");
                let c = brute_force_u(&shuffled, &spec, q).unwrap().value;
                prop_assert!(rel_err(a, c) < 1e-10, "{a} vs brute {c}");
            }
        }
    }

    // so does the analytic variance estimator
    #[test]
    fn analytic_variance_is_row_permutation_invariant(
        data in small_matrix(),
        salt in 0u64..1000,
    ) {
        let perm = permutation(data.n(), salt);
        let shuffled = data.select_rows(&perm);
        let spec = KernelSpec::Mean { mu0: None };
        let a = analytic_variance_r1(&data, &spec, 2).unwrap();
        let b = analytic_variance_r1(&shuffled, &spec, 2).unwrap();
        prop_assert!(rel_err(a, b) < 1e-10);
    }

    #[test]
    fn empirical_pvalue_bounds_and_monotonicity(
        mut draws in proptest::collection::vec(-1.0f64..1.0, 3..50),
        observed in -2.0f64..2.0,
        step in 0.0f64..1.0,
    ) {
        draws.sort_by(f64::total_cmp);
        let b = draws.len() as f64;
        let p = empirical_pvalue(observed, &draws);
        prop_assert!(p >= 1.0 / (b + 1.0) && p <= 1.0);
        // moving the observed value up cannot increase the p-value
        let p2 = empirical_pvalue(observed + step, &draws);
        prop_assert!(p2 <= p);
    }

    // CSV writing uses shortest round-trip formatting
    #[test]
    fn csv_round_trip_is_bit_exact(
        vals in proptest::collection::vec(
            proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO,
            4,
        )
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roundtrip.csv");
        let m = SampleMatrix::new(vals, 2, 2).unwrap();
        m.save_csv(&path).unwrap();
        let back = lqtest::load_csv(&path, false).unwrap();
        for (a, b) in m.values().iter().zip(back.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn derive_stream_agrees_across_thread_counts() {
    use rayon::prelude::*;
    let seed = SeedSpec::new(314159);
    let serial: Vec<SeedSpec> = (0..64).map(|k| derive_stream(seed, k)).collect();
    let parallel: Vec<SeedSpec> = (0..64u64)
        .into_par_iter()
        .map(|k| derive_stream(seed, k))
        .collect();
    assert_eq!(serial, parallel);
}

#[test]
fn monotone_statistic_depends_on_row_order() {
    // the monotone-index variant is *not* permutation invariant; check
    // that some reordering actually changes the value so the invariance
    // tests above are not vacuous
    let data = SampleMatrix::from_rows(vec![
        vec![0.3, 1.2],
        vec![-0.7, 0.4],
        vec![1.5, -0.9],
        vec![0.1, 0.8],
        vec![-1.1, -0.2],
        vec![0.9, 1.6],
        vec![2.0, -1.4],
        vec![-0.4, 0.6],
    ])
    .unwrap();
    let spec = KernelSpec::KendallTau;
    let base = lqtest::ustat::dp_monotone(&data, &spec, 2).unwrap().value;
    let mut changed = false;
    for salt in 0..20 {
        let perm = permutation(data.n(), salt);
        let shuffled = data.select_rows(&perm);
        let v = lqtest::ustat::dp_monotone(&shuffled, &spec, 2).unwrap().value;
        if (v - base).abs() > 1e-12 {
            changed = true;
            break;
        }
    }
    assert!(changed, "every permutation left the monotone statistic fixed");
    let _ = DataSet::OneSample(data);
}
