//! Adaptive combination of single-q tests.
//!
//! The studentized statistics for distinct q are asymptotically
//! independent under the null, so the minimum p-value over a set I is
//! corrected exactly: p = 1 − (1 − p_min)^{|I|}. Rejecting when that
//! corrected value is at most α is the same as rejecting when some T_q
//! exceeds Φ⁻¹((1 − α)^{1/|I|}).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal;

#[derive(Debug, Clone, Serialize)]
pub struct AdaptiveResult {
    pub q_set: Vec<usize>,
    pub per_q_pvalues: BTreeMap<usize, f64>,
    /// min over the single-q p-values
    pub p_ada: f64,
    /// 1 − (1 − p_ada)^{|I|}
    pub combined_pvalue: f64,
    pub alpha: f64,
    pub reject: bool,
}

/// Combines single-q p-values into the adaptive decision at level `alpha`.
pub fn combine(pvalues: &BTreeMap<usize, f64>, alpha: f64) -> Result<AdaptiveResult> {
    if pvalues.is_empty() {
        return Err(Error::InvalidParam("empty q set".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParam(format!("alpha {alpha} not in [0,1]")));
    }
    for (&q, &p) in pvalues {
        if q < 2 || q % 2 != 0 {
            return Err(Error::InvalidQ(q));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParam(format!(
                "p-value {p} for q = {q} not in [0,1]"
            )));
        }
    }
    let p_ada = pvalues.values().cloned().fold(f64::INFINITY, f64::min);
    let k = pvalues.len() as i32;
    // a singleton set reduces to the single test exactly
    let combined = if k == 1 {
        p_ada
    } else {
        1.0 - (1.0 - p_ada).powi(k)
    };
    Ok(AdaptiveResult {
        q_set: pvalues.keys().cloned().collect(),
        per_q_pvalues: pvalues.clone(),
        p_ada,
        combined_pvalue: combined,
        alpha,
        reject: combined <= alpha,
    })
}

/// The per-statistic critical value Φ⁻¹((1 − α)^{1/|I|}) of the
/// equivalent max-form test.
pub fn single_test_threshold(alpha: f64, set_size: usize) -> f64 {
    normal::quantile((1.0 - alpha).powf(1.0 / set_size as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(pairs: &[(usize, f64)]) -> BTreeMap<usize, f64> {
        pairs.iter().cloned().collect()
    }

    #[test]
    fn worked_example() {
        // I = {2,6}, p2 = 0.03, p6 = 0.20, alpha = 0.05
        let r = combine(&pv(&[(2, 0.03), (6, 0.20)]), 0.05).unwrap();
        assert_eq!(r.p_ada, 0.03);
        assert!((r.combined_pvalue - (1.0 - 0.97f64.powi(2))).abs() < 1e-15);
        assert!((r.combined_pvalue - 0.0591).abs() < 1e-4);
        assert!(!r.reject);
    }

    #[test]
    fn singleton_reduces_to_the_single_test() {
        let r = combine(&pv(&[(2, 0.04)]), 0.05).unwrap();
        assert_eq!(r.combined_pvalue, 0.04);
        assert!(r.reject);
    }

    #[test]
    fn boundary_zero() {
        let r = combine(&pv(&[(2, 0.0), (4, 0.7)]), 0.05).unwrap();
        assert_eq!(r.combined_pvalue, 0.0);
        assert!(r.reject);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(combine(&BTreeMap::new(), 0.05).is_err());
        assert!(combine(&pv(&[(3, 0.5)]), 0.05).is_err());
        assert!(combine(&pv(&[(2, 1.5)]), 0.05).is_err());
        assert!(combine(&pv(&[(2, 0.5)]), 7.0).is_err());
    }

    proptest! {
        // raising any p-value never lowers the combined p-value
        #[test]
        fn monotone_in_each_pvalue(
            p2 in 0.0f64..1.0,
            p6 in 0.0f64..1.0,
            bump in 0.0f64..1.0,
        ) {
            let base = combine(&pv(&[(2, p2), (6, p6)]), 0.05).unwrap();
            let bumped = combine(&pv(&[(2, (p2 + bump).min(1.0)), (6, p6)]), 0.05).unwrap();
            prop_assert!(bumped.combined_pvalue >= base.combined_pvalue - 1e-15);
        }

        // p-value form and max-threshold form decide identically
        #[test]
        fn threshold_form_agrees(
            t2 in -4.0f64..6.0,
            t4 in -4.0f64..6.0,
            alpha in 0.001f64..0.5,
        ) {
            let p2 = crate::normal::sf(t2);
            let p4 = crate::normal::sf(t4);
            let r = combine(&pv(&[(2, p2), (4, p4)]), alpha).unwrap();
            let crit = single_test_threshold(alpha, 2);
            let max_form = t2 > crit || t4 > crit;
            // the two forms agree except exactly at the boundary
            let boundary = (r.combined_pvalue - alpha).abs() < 1e-12;
            prop_assert!(boundary || r.reject == max_form,
                "t2={t2} t4={t4} alpha={alpha} crit={crit} p={}", r.combined_pvalue);
        }
    }
}
