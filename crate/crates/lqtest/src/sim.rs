//! Data-generating processes and the Monte Carlo harness.
//!
//! Replication k always runs on `derive_stream(seed, k)`, and every
//! consumer of randomness inside a replication (the data draw, each
//! suite's permutation block) gets its own child stream, so reports are
//! pure functions of (dgp, suites, reps, seed) for any thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;

use crate::adaptive;
use crate::data::{derive_stream, DataSet, SampleMatrix, SeedSpec, TwoSampleData};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, SampleArity};
use crate::testing::run_per_q;
use crate::variance::VarianceMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpFamily {
    /// X = Z + μ with iid standard normal components.
    ShiftGaussian,
    /// X = Z + μ with iid t₃ components.
    ShiftT3,
    /// X ~ N(0, Σ), σ_ab = (1−δ)1{a=b} + δ1{a≤r, b≤r}.
    BandedCovGaussian,
    /// X = Σ^{1/2} Z with iid t₃ entries in Z and the banded Σ above.
    BandedCovT3,
    /// AR(1) covariates (corr ρ^{|a−b|}), Y = Xβ + ε, β = δ(1_r, 0_{p−r}).
    Ar1LinReg,
    /// First sample shifted by μ, both samples iid standard normal.
    TwoSampleGaussian,
    /// Same with iid t₃ components.
    TwoSampleT3,
}

impl DgpFamily {
    pub fn is_two_sample(self) -> bool {
        matches!(self, DgpFamily::TwoSampleGaussian | DgpFamily::TwoSampleT3)
    }

    fn heavy_tailed(self) -> bool {
        matches!(
            self,
            DgpFamily::ShiftT3 | DgpFamily::BandedCovT3 | DgpFamily::TwoSampleT3
        )
    }
}

impl fmt::Display for DgpFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            DgpFamily::ShiftGaussian => "shift-gaussian",
            DgpFamily::ShiftT3 => "shift-t3",
            DgpFamily::BandedCovGaussian => "banded-cov-gaussian",
            DgpFamily::BandedCovT3 => "banded-cov-t3",
            DgpFamily::Ar1LinReg => "ar1-linreg",
            DgpFamily::TwoSampleGaussian => "two-sample-gaussian",
            DgpFamily::TwoSampleT3 => "two-sample-t3",
        };
        f.write_str(name)
    }
}

/// A simulation scenario. `sparsity` is the number of affected leading
/// components (the μ support, the banded block size, or the β support);
/// t-distributed families always use 3 degrees of freedom.
#[derive(Debug, Clone, Copy)]
pub struct DgpSpec {
    pub family: DgpFamily,
    pub n: usize,
    pub m: Option<usize>,
    pub p: usize,
    pub delta: f64,
    pub sparsity: usize,
    pub rho: Option<f64>,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.p < 1 {
            return Err(Error::InvalidDimension("n and p must be >= 1".into()));
        }
        if self.sparsity > self.p {
            return Err(Error::InvalidParam(format!(
                "sparsity {} exceeds p = {}",
                self.sparsity, self.p
            )));
        }
        match self.family {
            DgpFamily::BandedCovGaussian | DgpFamily::BandedCovT3 => {
                if !(0.0..1.0).contains(&self.delta) {
                    return Err(Error::InvalidParam(
                        "banded covariance needs delta in [0, 1)".into(),
                    ));
                }
            }
            DgpFamily::Ar1LinReg => {
                let rho = self.rho.unwrap_or(0.0);
                if rho.abs() >= 1.0 {
                    return Err(Error::InvalidParam("|rho| must be < 1".into()));
                }
            }
            DgpFamily::TwoSampleGaussian | DgpFamily::TwoSampleT3 => {
                if self.m.unwrap_or(0) < 1 {
                    return Err(Error::InvalidParam(
                        "two-sample families need m >= 1".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for DgpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} n={} p={} delta={} sparsity={}",
            self.family, self.n, self.p, self.delta, self.sparsity
        )?;
        if let Some(m) = self.m {
            write!(f, " m={m}")?;
        }
        if let Some(rho) = self.rho {
            write!(f, " rho={rho}")?;
        }
        Ok(())
    }
}

fn draw_scalar(rng: &mut ChaCha8Rng, heavy: bool, t3: &StudentT<f64>) -> f64 {
    if heavy {
        t3.sample(rng)
    } else {
        StandardNormal.sample(rng)
    }
}

/// One draw from the scenario.
pub fn sample(dgp: &DgpSpec, seed: SeedSpec) -> Result<DataSet> {
    dgp.validate()?;
    let mut rng = seed.rng();
    let t3 = StudentT::new(3.0).expect("df = 3");
    let heavy = dgp.family.heavy_tailed();
    let (n, p, r) = (dgp.n, dgp.p, dgp.sparsity);

    match dgp.family {
        DgpFamily::ShiftGaussian | DgpFamily::ShiftT3 => {
            let mut values = Vec::with_capacity(n * p);
            for _ in 0..n {
                for j in 0..p {
                    let shift = if j < r { dgp.delta } else { 0.0 };
                    values.push(draw_scalar(&mut rng, heavy, &t3) + shift);
                }
            }
            Ok(DataSet::OneSample(SampleMatrix::new(values, n, p)?))
        }
        DgpFamily::BandedCovGaussian | DgpFamily::BandedCovT3 => {
            let delta = dgp.delta;
            let root_off = (1.0 - delta).sqrt();
            // closed-form square root of the block (1−δ)I + δJ
            let coef = if r > 0 {
                ((1.0 - delta + delta * r as f64).sqrt() - root_off) / r as f64
            } else {
                0.0
            };
            let mut values = Vec::with_capacity(n * p);
            let mut z = vec![0.0f64; p];
            for _ in 0..n {
                for slot in z.iter_mut() {
                    *slot = draw_scalar(&mut rng, heavy, &t3);
                }
                let block_sum: f64 = z[..r].iter().sum();
                for (j, &zj) in z.iter().enumerate() {
                    let extra = if j < r { coef * block_sum } else { 0.0 };
                    values.push(root_off * zj + extra);
                }
            }
            Ok(DataSet::OneSample(SampleMatrix::new(values, n, p)?))
        }
        DgpFamily::Ar1LinReg => {
            let rho = dgp.rho.unwrap_or(0.0);
            let innov = (1.0 - rho * rho).sqrt();
            let mut values = Vec::with_capacity(n * (p + 1));
            let mut x = vec![0.0f64; p];
            for _ in 0..n {
                // stationary AR(1) row: x_1 = z_1, x_j = ρ x_{j−1} + √(1−ρ²) z_j
                x[0] = StandardNormal.sample(&mut rng);
                for j in 1..p {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x[j] = rho * x[j - 1] + innov * z;
                }
                let eps: f64 = StandardNormal.sample(&mut rng);
                let signal: f64 = x[..r].iter().sum::<f64>() * dgp.delta;
                values.extend_from_slice(&x);
                values.push(signal + eps);
            }
            Ok(DataSet::OneSample(SampleMatrix::new(values, n, p + 1)?))
        }
        DgpFamily::TwoSampleGaussian | DgpFamily::TwoSampleT3 => {
            let m = dgp.m.unwrap();
            let mut first = Vec::with_capacity(n * p);
            for _ in 0..n {
                for j in 0..p {
                    let shift = if j < r { dgp.delta } else { 0.0 };
                    first.push(draw_scalar(&mut rng, heavy, &t3) + shift);
                }
            }
            let mut second = Vec::with_capacity(m * p);
            for _ in 0..m {
                for _ in 0..p {
                    second.push(draw_scalar(&mut rng, heavy, &t3));
                }
            }
            Ok(DataSet::TwoSample(TwoSampleData::new(
                SampleMatrix::new(first, n, p)?,
                SampleMatrix::new(second, m, p)?,
            )?))
        }
    }
}

/// The tests evaluated on each replication: every q in `q_list` singly,
/// plus each adaptive subset.
#[derive(Debug, Clone)]
pub struct McSuite {
    pub spec: KernelSpec,
    pub variance: VarianceMethod,
    pub permutations: usize,
    pub alpha: f64,
    pub q_list: Vec<usize>,
    pub adaptive_sets: Vec<Vec<usize>>,
}

impl McSuite {
    fn validate(&self) -> Result<()> {
        crate::ustat::ensure_q_list(&self.q_list)?;
        for set in &self.adaptive_sets {
            if set.is_empty() || set.iter().any(|q| !self.q_list.contains(q)) {
                return Err(Error::InvalidParam(
                    "adaptive sets must be nonempty subsets of q_list".into(),
                ));
            }
        }
        Ok(())
    }

    fn labels(&self) -> Vec<String> {
        let problem = self.spec.problem().cli_name();
        let mut labels: Vec<String> = self
            .q_list
            .iter()
            .map(|q| format!("{problem} q={q}"))
            .collect();
        for set in &self.adaptive_sets {
            let qs: Vec<String> = set.iter().map(|q| q.to_string()).collect();
            labels.push(format!("{problem} adaptive q={}", qs.join(",")));
        }
        labels
    }

    fn rejections(&self, data: &DataSet, seed: SeedSpec) -> Result<Vec<bool>> {
        let outcomes = run_per_q(
            data,
            &self.spec,
            &self.q_list,
            self.variance,
            self.permutations,
            seed,
        )?;
        let pmap: BTreeMap<usize, f64> = outcomes
            .iter()
            .map(|o| (o.stat.q, o.result.p_value))
            .collect();
        let mut flags: Vec<bool> = self
            .q_list
            .iter()
            .map(|q| pmap[q] <= self.alpha)
            .collect();
        for set in &self.adaptive_sets {
            let sub: BTreeMap<usize, f64> = set.iter().map(|q| (*q, pmap[q])).collect();
            flags.push(adaptive::combine(&sub, self.alpha)?.reject);
        }
        Ok(flags)
    }
}

#[derive(Debug, Clone)]
pub struct McRow {
    pub label: String,
    pub rejections: usize,
    pub reps: usize,
    pub rate: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub scenario: String,
    pub reps: usize,
    pub seed: SeedSpec,
    pub rows: Vec<McRow>,
}

impl MonteCarloReport {
    pub fn row(&self, label: &str) -> Option<&McRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,reps,rejections,rate,mc_se\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.label, r.reps, r.rejections, r.rate, r.mc_se
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!("scenario: {} ({} reps)\n", self.scenario, self.reps);
        let _ = writeln!(out, "{:width$}  {:>8}  {:>8}", "test", "rate%", "se%");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:width$}  {:>8.1}  {:>8.2}",
                r.label,
                100.0 * r.rate,
                100.0 * r.mc_se
            );
        }
        out
    }
}

fn summarize(
    scenario: String,
    labels: Vec<String>,
    flags_per_rep: Vec<Vec<bool>>,
    reps: usize,
    seed: SeedSpec,
) -> MonteCarloReport {
    let mut counts = vec![0usize; labels.len()];
    for flags in &flags_per_rep {
        for (c, &f) in counts.iter_mut().zip(flags) {
            *c += f as usize;
        }
    }
    let rows = labels
        .into_iter()
        .zip(counts)
        .map(|(label, rejections)| {
            let rate = rejections as f64 / reps as f64;
            McRow {
                label,
                rejections,
                reps,
                rate,
                mc_se: (rate * (1.0 - rate) / reps as f64).sqrt(),
            }
        })
        .collect();
    MonteCarloReport {
        scenario,
        reps,
        seed,
        rows,
    }
}

/// Runs `reps` replications of every suite on shared draws from `dgp`.
pub fn run_mc(
    dgp: &DgpSpec,
    suites: &[McSuite],
    reps: usize,
    seed: SeedSpec,
) -> Result<MonteCarloReport> {
    dgp.validate()?;
    if reps < 1 {
        return Err(Error::InvalidParam("reps must be >= 1".into()));
    }
    for suite in suites {
        suite.validate()?;
    }
    let flags_per_rep: Vec<Vec<bool>> = (0..reps)
        .into_par_iter()
        .map(|k| {
            let rep = |e: Error| Error::Replication {
                index: k,
                source: Box::new(e),
            };
            let rep_seed = derive_stream(seed, k as u64);
            let data = sample(dgp, derive_stream(rep_seed, 0)).map_err(rep)?;
            let mut flags = Vec::new();
            for (si, suite) in suites.iter().enumerate() {
                let test_seed = derive_stream(rep_seed, 1 + si as u64);
                flags.extend(suite.rejections(&data, test_seed).map_err(rep)?);
            }
            Ok(flags)
        })
        .collect::<Result<Vec<_>>>()?;

    let labels: Vec<String> = suites.iter().flat_map(|s| s.labels()).collect();
    Ok(summarize(
        dgp.to_string(),
        labels,
        flags_per_rep,
        reps,
        seed,
    ))
}

/// Subsampling study on a fixed two-sample dataset: per replication the
/// size rows test two disjoint subsamples of the first group against each
/// other, and the power rows test one subsample from each group.
pub fn subsample_experiment(
    data: &TwoSampleData,
    subsample_n: usize,
    reps: usize,
    suite: &McSuite,
    seed: SeedSpec,
) -> Result<MonteCarloReport> {
    suite.validate()?;
    if suite.spec.sample_arity() != SampleArity::TwoSample {
        return Err(Error::InvalidParam(
            "subsampling study needs a two-sample problem".into(),
        ));
    }
    let n1 = data.first.n();
    let n2 = data.second.n();
    if n1 < 2 * subsample_n || n2 < subsample_n {
        return Err(Error::InvalidParam(format!(
            "subsample size {subsample_n} too large for groups of {n1} and {n2}"
        )));
    }

    let flags_per_rep: Vec<Vec<bool>> = (0..reps)
        .into_par_iter()
        .map(|k| {
            let rep = |e: Error| Error::Replication {
                index: k,
                source: Box::new(e),
            };
            let rep_seed = derive_stream(seed, k as u64);
            let mut rng = derive_stream(rep_seed, 0).rng();

            let mut idx1: Vec<usize> = (0..n1).collect();
            idx1.shuffle(&mut rng);
            let size_data = DataSet::TwoSample(
                TwoSampleData::new(
                    data.first.select_rows(&idx1[..subsample_n]),
                    data.first.select_rows(&idx1[subsample_n..2 * subsample_n]),
                )
                .map_err(rep)?,
            );
            let mut idx2: Vec<usize> = (0..n2).collect();
            idx2.shuffle(&mut rng);
            idx1.shuffle(&mut rng);
            let power_data = DataSet::TwoSample(
                TwoSampleData::new(
                    data.first.select_rows(&idx1[..subsample_n]),
                    data.second.select_rows(&idx2[..subsample_n]),
                )
                .map_err(rep)?,
            );

            let mut flags = suite
                .rejections(&size_data, derive_stream(rep_seed, 1))
                .map_err(rep)?;
            flags.extend(
                suite
                    .rejections(&power_data, derive_stream(rep_seed, 2))
                    .map_err(rep)?,
            );
            Ok(flags)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut labels: Vec<String> = suite
        .labels()
        .into_iter()
        .map(|l| format!("size {l}"))
        .collect();
    labels.extend(suite.labels().into_iter().map(|l| format!("power {l}")));
    Ok(summarize(
        format!("subsample n={subsample_n} from fixed two-sample data"),
        labels,
        flags_per_rep,
        reps,
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx).powi(2);
            syy += (y - my).powi(2);
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn banded_root_squares_to_sigma() {
        for &(delta, r, p) in &[(0.0, 1usize, 4usize), (0.5, 3, 8), (0.25, 6, 10), (0.9, 2, 5)] {
            let root_off = (1.0f64 - delta).sqrt();
            let coef = ((1.0 - delta + delta * r as f64).sqrt() - root_off) / r as f64;
            // materialize S and check S·S against σ_ab entrywise
            let s = |a: usize, b: usize| {
                let mut v = if a == b { root_off } else { 0.0 };
                if a < r && b < r {
                    v += coef;
                }
                v
            };
            for a in 0..p {
                for b in 0..p {
                    let ss: f64 = (0..p).map(|k| s(a, k) * s(k, b)).sum();
                    let sigma = if a == b { 1.0 - delta } else { 0.0 }
                        + if a < r && b < r { delta } else { 0.0 };
                    assert!(
                        (ss - sigma).abs() < 1e-12,
                        "delta={delta} r={r} ({a},{b}): {ss} vs {sigma}"
                    );
                }
            }
        }
    }

    #[test]
    fn banded_draws_have_the_right_correlations() {
        let dgp = DgpSpec {
            family: DgpFamily::BandedCovGaussian,
            n: 40_000,
            m: None,
            p: 5,
            delta: 0.5,
            sparsity: 3,
            rho: None,
        };
        let data = sample(&dgp, SeedSpec::new(5)).unwrap();
        let m = data.as_one_sample().unwrap();
        let c01 = corr(&m.column(0), &m.column(1));
        let c03 = corr(&m.column(0), &m.column(3));
        assert!((c01 - 0.5).abs() < 0.02, "corr(x1,x2) = {c01}");
        assert!(c03.abs() < 0.02, "corr(x1,x4) = {c03}");
    }

    #[test]
    fn ar1_covariates_decay_geometrically() {
        let dgp = DgpSpec {
            family: DgpFamily::Ar1LinReg,
            n: 40_000,
            m: None,
            p: 4,
            delta: 0.0,
            sparsity: 0,
            rho: Some(0.5),
        };
        let data = sample(&dgp, SeedSpec::new(6)).unwrap();
        let m = data.as_one_sample().unwrap();
        assert_eq!(m.p(), 5); // response appended
        let c12 = corr(&m.column(0), &m.column(1));
        let c13 = corr(&m.column(0), &m.column(2));
        assert!((c12 - 0.5).abs() < 0.02, "lag-1 corr {c12}");
        assert!((c13 - 0.25).abs() < 0.02, "lag-2 corr {c13}");
    }

    #[test]
    fn zero_shift_columns_are_centered() {
        let dgp = DgpSpec {
            family: DgpFamily::ShiftGaussian,
            n: 50_000,
            m: None,
            p: 3,
            delta: 0.0,
            sparsity: 0,
            rho: None,
        };
        let data = sample(&dgp, SeedSpec::new(7)).unwrap();
        let m = data.as_one_sample().unwrap();
        for j in 0..3 {
            let mean = m.column(j).iter().sum::<f64>() / m.n() as f64;
            // 4 standard errors of a mean of 50k standard normals
            assert!(mean.abs() < 4.0 / (m.n() as f64).sqrt(), "col {j}: {mean}");
        }
    }

    #[test]
    fn run_mc_is_deterministic() {
        let dgp = DgpSpec {
            family: DgpFamily::BandedCovGaussian,
            n: 20,
            m: None,
            p: 4,
            delta: 0.0,
            sparsity: 0,
            rho: None,
        };
        let suite = McSuite {
            spec: KernelSpec::KendallTau,
            variance: VarianceMethod::PermutationVariance,
            permutations: 8,
            alpha: 0.05,
            q_list: vec![2, 4],
            adaptive_sets: vec![vec![2, 4]],
        };
        let a = run_mc(&dgp, &[suite.clone()], 12, SeedSpec::new(42)).unwrap();
        let b = run_mc(&dgp, &[suite], 12, SeedSpec::new(42)).unwrap();
        assert_eq!(a.rows.len(), 3);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.rejections, rb.rejections);
        }
        assert!((a.rows[0].mc_se - (a.rows[0].rate * (1.0 - a.rows[0].rate) / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn failed_replication_reports_its_index() {
        // constant data: the Kendall permutation variance degenerates
        let dgp = DgpSpec {
            family: DgpFamily::BandedCovGaussian,
            n: 10,
            m: None,
            p: 3,
            delta: 0.0,
            sparsity: 0,
            rho: None,
        };
        // q too large for n triggers a per-replication error
        let suite = McSuite {
            spec: KernelSpec::KendallTau,
            variance: VarianceMethod::PermutationVariance,
            permutations: 4,
            alpha: 0.05,
            q_list: vec![6],
            adaptive_sets: vec![],
        };
        let err = run_mc(&dgp, &[suite], 3, SeedSpec::new(1)).unwrap_err();
        assert!(matches!(err, Error::Replication { .. }));
    }

    #[test]
    fn subsample_study_shapes_and_determinism() {
        let dgp = DgpSpec {
            family: DgpFamily::TwoSampleGaussian,
            n: 30,
            m: Some(25),
            p: 4,
            delta: 0.0,
            sparsity: 0,
            rho: None,
        };
        let source = match sample(&dgp, SeedSpec::new(8)).unwrap() {
            DataSet::TwoSample(d) => d,
            _ => unreachable!(),
        };
        let suite = McSuite {
            spec: KernelSpec::TwoSampleSpatialSign,
            variance: VarianceMethod::PermutationVariance,
            permutations: 6,
            alpha: 0.05,
            q_list: vec![2],
            adaptive_sets: vec![],
        };
        let a = subsample_experiment(&source, 10, 8, &suite, SeedSpec::new(9)).unwrap();
        let b = subsample_experiment(&source, 10, 8, &suite, SeedSpec::new(9)).unwrap();
        assert_eq!(a.rows.len(), 2);
        assert!(a.rows[0].label.starts_with("size"));
        assert!(a.rows[1].label.starts_with("power"));
        assert_eq!(a.rows[0].rejections, b.rows[0].rejections);
        // subsample too large
        assert!(subsample_experiment(&source, 16, 2, &suite, SeedSpec::new(1)).is_err());
    }
}
