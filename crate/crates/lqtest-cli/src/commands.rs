//! Implementations of the CLI subcommands.

use std::error::Error;
use std::path::Path;
use std::process::ExitCode;

use lqtest::data::DataSet;
use lqtest::kernels::{KernelSpec, Problem, SampleArity};
use lqtest::power::{delta_required, optimal_q, PowerPlanInput};
use lqtest::sim::{run_mc, sample, DgpFamily, DgpSpec, McSuite};
use lqtest::testing::{run_test as run_pipeline, TestConfig, TestReport};
use lqtest::ustat::{
    brute_force_u, brute_force_u_monotone, dp_monotone, dp_order1_full, two_sample_brute,
    two_sample_dp, Variant,
};
use lqtest::variance::VarianceMethod;
use lqtest::{derive_stream, load_csv, PairedSample, SeedSpec};

use crate::{Dist, OracleArgs, PlanArgs, Scenario, SimulateArgs, TestArgs, VarianceArg};

type CmdResult = Result<ExitCode, Box<dyn Error>>;

fn load_vector(path: &Path) -> Result<Vec<f64>, Box<dyn Error>> {
    let m = load_csv(path, false)?;
    if m.n() == 1 {
        Ok(m.row(0).to_vec())
    } else if m.p() == 1 {
        Ok(m.column(0))
    } else {
        Err(format!(
            "{} must hold a vector (one row or one column), got {}x{}",
            path.display(),
            m.n(),
            m.p()
        )
        .into())
    }
}

pub fn run_test(args: TestArgs) -> CmdResult {
    let problem: Problem = args.problem.parse()?;
    let matrix = load_csv(&args.input, args.has_header)?;

    if args.input2.is_some() && problem.sample_arity() == SampleArity::OneSample {
        return Err(format!("--input2 is not valid for one-sample problem {problem}").into());
    }
    if args.response_col.is_some() && problem != Problem::LinRegCoef {
        return Err("--response-col only applies to --problem linreg".into());
    }

    let (spec, data) = match problem {
        Problem::Mean => {
            let mu0 = args.mu0.as_deref().map(load_vector).transpose()?;
            (KernelSpec::Mean { mu0 }, DataSet::OneSample(matrix))
        }
        Problem::SpatialSign => (KernelSpec::SpatialSign, DataSet::OneSample(matrix)),
        Problem::Covariance => {
            let sigma0 = args
                .sigma0
                .as_deref()
                .map(|p| load_csv(p, false))
                .transpose()?;
            (
                KernelSpec::Covariance {
                    sigma0,
                    band: args.band,
                },
                DataSet::OneSample(matrix),
            )
        }
        Problem::KendallTau => (KernelSpec::KendallTau, DataSet::OneSample(matrix)),
        Problem::SpearmanRho => (KernelSpec::SpearmanRho, DataSet::OneSample(matrix)),
        Problem::LinRegCoef => {
            let col = args
                .response_col
                .ok_or("--problem linreg requires --response-col")?;
            if col < 1 || col > matrix.p() {
                return Err(format!(
                    "--response-col {col} out of range for {} columns",
                    matrix.p()
                )
                .into());
            }
            let response = matrix.column(col - 1);
            let covariates: Vec<Vec<f64>> = (0..matrix.n())
                .map(|i| {
                    matrix
                        .row(i)
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != col - 1)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect();
            let pair = PairedSample::new(
                lqtest::SampleMatrix::from_rows(covariates)?,
                response,
            )?;
            let beta0 = args.beta0.as_deref().map(load_vector).transpose()?;
            (
                KernelSpec::LinRegCoef { beta0 },
                DataSet::OneSample(pair.to_joint()),
            )
        }
        Problem::TwoSampleSpatialSign => {
            let path2 = args
                .input2
                .as_deref()
                .ok_or("two-sample problem requires --input2")?;
            let second = load_csv(path2, args.has_header)?;
            (
                KernelSpec::TwoSampleSpatialSign,
                DataSet::TwoSample(lqtest::TwoSampleData::new(matrix, second)?),
            )
        }
    };

    let variance = match args.variance {
        VarianceArg::Auto => {
            if spec.order() == 1 && problem.sample_arity() == SampleArity::OneSample {
                VarianceMethod::AnalyticR1
            } else {
                VarianceMethod::PermutationVariance
            }
        }
        VarianceArg::Analytic => VarianceMethod::AnalyticR1,
        VarianceArg::Perm => VarianceMethod::PermutationVariance,
        VarianceArg::PermEmpirical => VarianceMethod::PermutationEmpirical,
    };

    let mut q_list = args.q.clone();
    q_list.sort_unstable();
    q_list.dedup();

    let cfg = TestConfig {
        spec,
        q_list,
        adaptive: args.adaptive,
        variance,
        permutations: args.permutations,
        alpha: args.alpha,
        seed: SeedSpec::new(args.seed),
    };
    let report = run_pipeline(&data, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if args.verbose {
        eprint!("{}", render_report(&report));
    }
    Ok(ExitCode::SUCCESS)
}

fn render_report(report: &TestReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "problem: {} (alpha = {}, variance = {:?})",
        report.problem, report.alpha, report.variance_method
    );
    let _ = writeln!(
        out,
        "{:>4}  {:>14}  {:>14}  {:>10}  {:>10}  reject",
        "q", "U", "variance", "T", "p-value"
    );
    for r in &report.q_results {
        let _ = writeln!(
            out,
            "{:>4}  {:>14.6e}  {:>14.6e}  {:>10.4}  {:>10.6}  {}",
            r.q, r.u_value, r.variance_estimate, r.statistic, r.p_value, r.reject
        );
    }
    if let Some(a) = &report.adaptive {
        let _ = writeln!(
            out,
            "adaptive p = {:.6} (min p = {:.6} over {:?}) -> {}",
            a.combined_pvalue,
            a.p_ada,
            a.q_set,
            if a.reject { "reject" } else { "accept" }
        );
    }
    if let Some(d) = &report.decision {
        let _ = writeln!(out, "decision: {d}");
    }
    out
}

pub fn run_simulate(args: SimulateArgs) -> CmdResult {
    let heavy = args.dist == Dist::T3;
    let mut q_list = args.q.clone();
    q_list.sort_unstable();
    q_list.dedup();
    // mirror the reported tables: pair q = 2 with every larger q
    let adaptive_sets: Vec<Vec<usize>> = if q_list.contains(&2) {
        q_list.iter().filter(|q| **q > 2).map(|q| vec![2, *q]).collect()
    } else {
        Vec::new()
    };

    let (dgp, suites) = match args.scenario {
        Scenario::SpatialSign => {
            let dgp = DgpSpec {
                family: if heavy {
                    DgpFamily::ShiftT3
                } else {
                    DgpFamily::ShiftGaussian
                },
                n: args.n.unwrap_or(100),
                m: None,
                p: args.p.unwrap_or(100),
                delta: args.delta,
                sparsity: args.sparsity.unwrap_or(2),
                rho: None,
            };
            let mk = |spec: KernelSpec| McSuite {
                spec,
                variance: VarianceMethod::AnalyticR1,
                permutations: args.permutations,
                alpha: args.alpha,
                q_list: q_list.clone(),
                adaptive_sets: adaptive_sets.clone(),
            };
            (
                dgp,
                vec![mk(KernelSpec::Mean { mu0: None }), mk(KernelSpec::SpatialSign)],
            )
        }
        Scenario::Kendall => {
            let dgp = DgpSpec {
                family: if heavy {
                    DgpFamily::BandedCovT3
                } else {
                    DgpFamily::BandedCovGaussian
                },
                n: args.n.unwrap_or(100),
                m: None,
                p: args.p.unwrap_or(50),
                delta: args.delta,
                sparsity: args.sparsity.unwrap_or(3),
                rho: None,
            };
            let suite = McSuite {
                spec: KernelSpec::KendallTau,
                variance: VarianceMethod::PermutationVariance,
                permutations: args.permutations,
                alpha: args.alpha,
                q_list: q_list.clone(),
                adaptive_sets: adaptive_sets.clone(),
            };
            (dgp, vec![suite])
        }
        Scenario::Linreg => {
            if heavy {
                return Err("the linreg scenario only supports --dist normal".into());
            }
            let dgp = DgpSpec {
                family: DgpFamily::Ar1LinReg,
                n: args.n.unwrap_or(100),
                m: None,
                p: args.p.unwrap_or(50),
                delta: args.delta,
                sparsity: args.sparsity.unwrap_or(2),
                rho: Some(args.rho.unwrap_or(0.0)),
            };
            let suite = McSuite {
                spec: KernelSpec::LinRegCoef { beta0: None },
                variance: VarianceMethod::PermutationVariance,
                permutations: args.permutations,
                alpha: args.alpha,
                q_list: q_list.clone(),
                adaptive_sets: adaptive_sets.clone(),
            };
            (dgp, vec![suite])
        }
        Scenario::TwoSample => {
            let dgp = DgpSpec {
                family: if heavy {
                    DgpFamily::TwoSampleT3
                } else {
                    DgpFamily::TwoSampleGaussian
                },
                n: args.n.unwrap_or(50),
                m: Some(args.m.unwrap_or(50)),
                p: args.p.unwrap_or(100),
                delta: args.delta,
                sparsity: args.sparsity.unwrap_or(2),
                rho: None,
            };
            let suite = McSuite {
                spec: KernelSpec::TwoSampleSpatialSign,
                variance: VarianceMethod::PermutationVariance,
                permutations: args.permutations,
                alpha: args.alpha,
                q_list: q_list.clone(),
                adaptive_sets: adaptive_sets.clone(),
            };
            (dgp, vec![suite])
        }
    };

    let report = run_mc(&dgp, &suites, args.reps, SeedSpec::new(args.seed))?;
    print!("{}", report.to_table());
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_csv())?;
        eprintln!("wrote {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn run_plan(args: PlanArgs) -> CmdResult {
    let plan = PowerPlanInput {
        d: args.d,
        big_n: args.big_n,
        r_shift: args.r_shift,
        r: args.r,
        s: args.s,
        a: args.a,
        n: args.n,
        q_max: args.qmax,
    };
    let best = optimal_q(&plan)?;
    println!("{:>4}  {:>14}", "q", "delta(q)");
    let mut q = 2;
    while q <= plan.q_max {
        let d = delta_required(&plan, q)?;
        let marker = if q == best { "  <- optimal" } else { "" };
        println!("{q:>4}  {d:>14.6e}{marker}");
        q += 2;
    }
    println!("optimal q: {best}");
    Ok(ExitCode::SUCCESS)
}

pub fn run_oracle_check(args: OracleArgs) -> CmdResult {
    let problem: Problem = args.problem.parse()?;
    let q = args.q;
    let default_n = match problem {
        Problem::SpearmanRho => (3 * q).max(9),
        Problem::KendallTau | Problem::LinRegCoef => (2 * q).max(8),
        Problem::TwoSampleSpatialSign => q.max(6),
        _ => q.max(8),
    };
    let n = args.n.unwrap_or(default_n);
    let seed = SeedSpec::new(args.seed);

    let mut max_rel: f64 = 0.0;
    for trial in 0..args.trials {
        let trial_seed = derive_stream(seed, trial as u64);
        let (a, b) = match problem {
            Problem::Mean | Problem::SpatialSign | Problem::Covariance => {
                let spec = match problem {
                    Problem::Mean => KernelSpec::Mean { mu0: None },
                    Problem::SpatialSign => KernelSpec::SpatialSign,
                    _ => KernelSpec::Covariance {
                        sigma0: None,
                        band: 0,
                    },
                };
                let data = gaussian_matrix(n, args.p, trial_seed)?;
                (
                    dp_order1_full(&data, &spec, q)?.value,
                    brute_force_u(&data, &spec, q)?.value,
                )
            }
            Problem::KendallTau | Problem::SpearmanRho => {
                let spec = if problem == Problem::KendallTau {
                    KernelSpec::KendallTau
                } else {
                    KernelSpec::SpearmanRho
                };
                let data = gaussian_matrix(n, args.p, trial_seed)?;
                (
                    dp_monotone(&data, &spec, q)?.value,
                    brute_force_u_monotone(&data, &spec, q)?.value,
                )
            }
            Problem::LinRegCoef => {
                let spec = KernelSpec::LinRegCoef { beta0: None };
                let dgp = DgpSpec {
                    family: DgpFamily::Ar1LinReg,
                    n,
                    m: None,
                    p: args.p,
                    delta: 0.0,
                    sparsity: 0,
                    rho: Some(0.0),
                };
                let data = match sample(&dgp, trial_seed)? {
                    DataSet::OneSample(m) => m,
                    _ => unreachable!(),
                };
                (
                    dp_monotone(&data, &spec, q)?.value,
                    brute_force_u_monotone(&data, &spec, q)?.value,
                )
            }
            Problem::TwoSampleSpatialSign => {
                let spec = KernelSpec::TwoSampleSpatialSign;
                let dgp = DgpSpec {
                    family: DgpFamily::TwoSampleGaussian,
                    n,
                    m: Some(n),
                    p: args.p,
                    delta: 0.0,
                    sparsity: 0,
                    rho: None,
                };
                let data = match sample(&dgp, trial_seed)? {
                    DataSet::TwoSample(d) => d,
                    _ => unreachable!(),
                };
                (
                    two_sample_dp(&data, &spec, q)?.value,
                    two_sample_brute(&data, &spec, q, Variant::MonotoneIndex)?.value,
                )
            }
        };
        let scale = a.abs().max(b.abs());
        let rel = if scale == 0.0 {
            0.0
        } else {
            (a - b).abs() / scale
        };
        max_rel = max_rel.max(rel);
    }

    println!(
        "oracle check: problem={problem} n={n} p={} q={q} trials={}",
        args.p, args.trials
    );
    println!("max relative discrepancy: {max_rel:.3e}");
    if max_rel <= 1e-10 {
        println!("PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL (tolerance 1e-10)");
        Err("oracle check failed".into())
    }
}

fn gaussian_matrix(
    n: usize,
    p: usize,
    seed: SeedSpec,
) -> Result<lqtest::SampleMatrix, Box<dyn Error>> {
    let dgp = DgpSpec {
        family: DgpFamily::ShiftGaussian,
        n,
        m: None,
        p,
        delta: 0.0,
        sparsity: 0,
        rho: None,
    };
    match sample(&dgp, seed)? {
        DataSet::OneSample(m) => Ok(m),
        _ => unreachable!(),
    }
}
