//! Power planning: signal level, required effect size, optimal q.
//!
//! Under a flat alternative with d nonzero components of height δ and a
//! variance profile Σ̃_s(q) ≍ a^q N, reaching power Φ(R − z_{1−α}) needs
//!
//!   δ(q) ≍ C(r,s) √a [(qs)!]^{1/2q} (√N R / d)^{1/q} n^{−s/2},
//!
//! so the best q minimizes f(q) = [(qs)!]^{1/2q} (√N R / d)^{1/q}: the
//! q-independent prefactor never moves the argmin. A dense signal
//! (d ≥ √N R) is always best served by q = 2; as √N R / d grows the
//! minimizer climbs. The exponent on n is the reciprocal of the n^{qs/2}
//! scaling of the studentized statistic, hence negative.

use crate::error::{Error, Result};

/// Inputs for effect-size planning.
#[derive(Debug, Clone, Copy)]
pub struct PowerPlanInput {
    /// Number of nonzero components in the alternative.
    pub d: u64,
    /// Variance scale N = N(L).
    pub big_n: f64,
    /// Target z-shift: planned power is Φ(R − z_{1−α}).
    pub r_shift: f64,
    /// Kernel order.
    pub r: usize,
    /// Degeneracy order.
    pub s: usize,
    /// Variance base in Σ̃_s(q) ≍ a^q N.
    pub a: f64,
    /// Sample size.
    pub n: usize,
    /// Largest even q to search.
    pub q_max: usize,
}

impl PowerPlanInput {
    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::InvalidParam("d must be >= 1".into()));
        }
        if !(self.big_n > 0.0) || !(self.r_shift > 0.0) || !(self.a > 0.0) {
            return Err(Error::InvalidParam(
                "N, R, and a must all be positive".into(),
            ));
        }
        if self.s < 1 || self.s > self.r {
            return Err(Error::InvalidParam(
                "degeneracy s must satisfy 1 <= s <= r".into(),
            ));
        }
        if self.n < 1 {
            return Err(Error::InvalidParam("n must be >= 1".into()));
        }
        if self.q_max < 2 || self.q_max % 2 != 0 {
            return Err(Error::InvalidQ(self.q_max));
        }
        Ok(())
    }

    /// √N·R / d, the sparsity-to-signal ratio driving the optimal q.
    pub fn sparsity_ratio(&self) -> f64 {
        self.big_n.sqrt() * self.r_shift / self.d as f64
    }
}

/// ln k!, summed directly; exact enough for any feasible k and immune to
/// the overflow of k! itself near k = 171.
pub(crate) fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Signal level γ_{n,q} = n^{qs/2} Σ̃_s^{−1/2}(q) ‖Θ‖_q^q.
pub fn signal_level(
    n: usize,
    q: usize,
    s: usize,
    theta_lq_norm_q: f64,
    sigma_tilde: f64,
) -> Result<f64> {
    if !(sigma_tilde > 0.0) {
        return Err(Error::DegenerateVariance(sigma_tilde));
    }
    let ln_rate = 0.5 * (q * s) as f64 * (n as f64).ln() - 0.5 * sigma_tilde.ln();
    Ok(theta_lq_norm_q * ln_rate.exp())
}

/// Required per-component effect δ(q), prefactor included.
pub fn delta_required(plan: &PowerPlanInput, q: usize) -> Result<f64> {
    plan.validate()?;
    if q < 2 || q % 2 != 0 || q > plan.q_max {
        return Err(Error::InvalidQ(q));
    }
    let qf = q as f64;
    let ln_f = ln_factorial(q * plan.s) / (2.0 * qf) + plan.sparsity_ratio().ln() / qf;
    let prefactor = binomial_f(plan.r, plan.s)
        * plan.a.sqrt()
        * (-(0.5 * plan.s as f64) * (plan.n as f64).ln()).exp();
    Ok(prefactor * ln_f.exp())
}

/// The even q in {2, 4, …, q_max} minimizing δ(q); ties break toward the
/// smaller q. When d ≥ √N·R the answer is 2.
pub fn optimal_q(plan: &PowerPlanInput) -> Result<usize> {
    plan.validate()?;
    let mut best_q = 2;
    let mut best = delta_required(plan, 2)?;
    let mut q = 4;
    while q <= plan.q_max {
        let v = delta_required(plan, q)?;
        if v < best {
            best = v;
            best_q = q;
        }
        q += 2;
    }
    Ok(best_q)
}

/// g(q) = (P^{(q+1)s}_s)^q / (qs)!, the threshold function whose first
/// crossing of D² locates the integer minimizer of f.
pub fn g_threshold(q: usize, s: usize) -> f64 {
    let ln_perm: f64 = (0..s).map(|i| (((q + 1) * s - i) as f64).ln()).sum();
    ((q as f64) * ln_perm - ln_factorial(q * s)).exp()
}

fn binomial_f(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 1..=k {
        c = c * ((n - k + i) as f64) / (i as f64);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(d: u64, big_n: f64, r_shift: f64) -> PowerPlanInput {
        PowerPlanInput {
            d,
            big_n,
            r_shift,
            r: 1,
            s: 1,
            a: 1.0,
            n: 100,
            q_max: 20,
        }
    }

    #[test]
    fn signal_level_arithmetic() {
        // n=100, q=2, s=1, |Θ|₂² = 0.5, Σ̃ = 25 → 100 · (1/5) · 0.5 = 10
        let g = signal_level(100, 2, 1, 0.5, 25.0).unwrap();
        assert!((g - 10.0).abs() < 1e-10);
        assert_eq!(signal_level(100, 2, 1, 0.0, 25.0).unwrap(), 0.0);
        assert!(signal_level(100, 2, 1, 0.5, 0.0).is_err());
    }

    #[test]
    fn signal_level_is_homogeneous_of_degree_q() {
        let base = signal_level(50, 4, 1, 1.0, 2.0).unwrap();
        // scaling Θ entries by c scales ‖Θ‖_q^q by c^q
        let scaled = signal_level(50, 4, 1, 3.0f64.powi(4), 2.0).unwrap();
        assert!((scaled / base - 81.0).abs() < 1e-9);
    }

    #[test]
    fn delta_matches_direct_formula() {
        let plan = PowerPlanInput {
            d: 3,
            big_n: 50.0,
            r_shift: 2.0,
            r: 2,
            s: 1,
            a: 1.5,
            n: 200,
            q_max: 8,
        };
        let ratio = 50.0f64.sqrt() * 2.0 / 3.0;
        for q in [2usize, 4, 6, 8] {
            let fact: f64 = (1..=q).map(|i| i as f64).product();
            let direct = 2.0
                * 1.5f64.sqrt()
                * fact.powf(1.0 / (2.0 * q as f64))
                * ratio.powf(1.0 / q as f64)
                / (200.0f64).sqrt();
            let got = delta_required(&plan, q).unwrap();
            assert!(
                (got - direct).abs() < 1e-12 * direct,
                "q={q}: {got} vs {direct}"
            );
        }
    }

    #[test]
    fn dense_signal_prefers_q2() {
        // d >= sqrt(N) R makes every factor of f increasing in q
        for (d, n, r_shift) in [(10u64, 100.0f64, 1.0), (50, 100.0, 5.0), (1, 1.0, 1.0)] {
            assert!(d as f64 >= n.sqrt() * r_shift);
            assert_eq!(optimal_q(&plan(d, n, r_shift)).unwrap(), 2);
        }
        // the f(q) = [(q)!]^{1/2q} factor alone is increasing
        let f = |q: usize| (ln_factorial(q) / (2.0 * q as f64)).exp();
        assert!(f(2) < f(4) && f(4) < f(6));
        assert!((f(2) - 2.0f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn optimal_q_is_monotone_in_sparsity_ratio() {
        let mut last = 2;
        let mut ratio = 0.1;
        while ratio <= 1e6 {
            let p = plan(1, (ratio as f64).powi(2), 1.0); // √N R/d = ratio
            let q = optimal_q(&p).unwrap();
            assert!(q >= last, "ratio {ratio}: q {q} fell below {last}");
            last = q;
            ratio *= 1.3;
        }
        assert!(last > 2, "selector never moved off q = 2");
    }

    #[test]
    fn argmin_ignores_prefactors() {
        for ratio in [0.5f64, 3.0, 40.0, 1000.0] {
            let base = plan(1, ratio * ratio, 1.0);
            let q0 = optimal_q(&base).unwrap();
            for (a, n) in [(0.01, 10usize), (100.0, 100_000)] {
                let p = PowerPlanInput { a, n, ..base };
                assert_eq!(optimal_q(&p).unwrap(), q0);
            }
            let p = PowerPlanInput { r: 3, ..base };
            assert_eq!(optimal_q(&p).unwrap(), q0);
        }
    }

    #[test]
    fn g_threshold_brackets_the_even_minimizer() {
        // the smallest integer q with g(q) >= D^2 and the even-grid argmin
        // agree within one even step across a log grid of D
        let s = 1;
        let mut d_ratio = 0.1f64;
        while d_ratio <= 1e6 {
            let mut p = plan(1, d_ratio * d_ratio, 1.0);
            p.q_max = 60; // keep the grid wider than any crossing on this D range
            let even_min = optimal_q(&p).unwrap();
            let d2 = d_ratio * d_ratio;
            let mut q0 = 1usize;
            while q0 < 60 && g_threshold(q0, s) < d2 {
                q0 += 1;
            }
            let dist = (even_min as f64 - q0 as f64).abs();
            assert!(
                dist <= 2.0,
                "D={d_ratio}: integer crossing {q0} vs even argmin {even_min}"
            );
            d_ratio *= 2.0;
        }
    }

    #[test]
    fn invalid_plans_are_rejected() {
        assert!(optimal_q(&plan(0, 1.0, 1.0)).is_err());
        let mut p = plan(1, 1.0, 1.0);
        p.q_max = 3;
        assert!(optimal_q(&p).is_err());
        let mut p = plan(1, 1.0, 1.0);
        p.s = 2; // s > r
        assert!(optimal_q(&p).is_err());
        assert!(delta_required(&plan(1, 1.0, 1.0), 22).is_err());
    }
}
