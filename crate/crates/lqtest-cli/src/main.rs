//! Command-line interface: hypothesis tests on CSV data, the Monte Carlo
//! simulation harness, power planning, and the DP-versus-brute-force
//! oracle check.
//!
//! Exit codes: 0 on success, 2 on usage or data errors.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "lqtest",
    about = "Adaptive L_q-norm U-statistic tests for high-dimensional data",
    version
)]
struct Cli {
    /// Worker threads for simulation and permutation loops
    /// (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a hypothesis test on CSV data and print a JSON report.
    Test(TestArgs),
    /// Estimate size/power of the tests over a simulated scenario.
    Simulate(SimulateArgs),
    /// Tabulate the required effect size δ(q) and the optimal q.
    Plan(PlanArgs),
    /// Check the dynamic programs against brute-force enumeration.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV (observations in rows).
    #[arg(long)]
    input: std::path::PathBuf,
    /// Second sample CSV for two-sample problems.
    #[arg(long)]
    input2: Option<std::path::PathBuf>,
    /// 1-based column of the response variable (linreg only); the
    /// remaining columns are the covariates.
    #[arg(long)]
    response_col: Option<usize>,
    /// Input files carry a header row.
    #[arg(long)]
    has_header: bool,
    #[arg(long)]
    problem: String,
    /// Comma-separated even q values.
    #[arg(long, default_value = "2,6", value_delimiter = ',')]
    q: Vec<usize>,
    /// Combine the q values into the adaptive test.
    #[arg(long)]
    adaptive: bool,
    #[arg(long, value_enum, default_value_t = VarianceArg::Auto)]
    variance: VarianceArg,
    /// Permutation count B.
    #[arg(long, default_value_t = 100)]
    permutations: usize,
    #[arg(long, env = "LQTEST_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// CSV with the null mean vector (mean test).
    #[arg(long)]
    mu0: Option<std::path::PathBuf>,
    /// CSV with the null coefficient vector (linreg).
    #[arg(long)]
    beta0: Option<std::path::PathBuf>,
    /// CSV with the null covariance matrix (covariance test).
    #[arg(long)]
    sigma0: Option<std::path::PathBuf>,
    /// Band offset d for the banded covariance test (0 = full upper
    /// triangle including the diagonal).
    #[arg(long, default_value_t = 0)]
    band: usize,
    /// Also print a human-readable table to stderr.
    #[arg(long)]
    verbose: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VarianceArg {
    /// Analytic estimator for order-1 kernels, permutations otherwise.
    Auto,
    Analytic,
    Perm,
    PermEmpirical,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scenario: Scenario,
    /// Component distribution of the data-generating process.
    #[arg(long, value_enum, default_value_t = Dist::Normal)]
    dist: Dist,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Number of affected leading components.
    #[arg(long)]
    sparsity: Option<usize>,
    /// AR(1) parameter (linreg scenario).
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value = "2,4,6", value_delimiter = ',')]
    q: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    permutations: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, env = "LQTEST_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the report as CSV here.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scenario {
    SpatialSign,
    Kendall,
    Linreg,
    TwoSample,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dist {
    Normal,
    T3,
}

#[derive(Args)]
struct PlanArgs {
    /// Number of nonzero components in the alternative.
    #[arg(long)]
    d: u64,
    /// Variance scale N.
    #[arg(long = "N")]
    big_n: f64,
    /// Target z-shift R (power Φ(R − z_{1−α})).
    #[arg(long = "R")]
    r_shift: f64,
    /// Degeneracy order s.
    #[arg(long, default_value_t = 1)]
    s: usize,
    /// Kernel order r.
    #[arg(long, default_value_t = 1)]
    r: usize,
    /// Variance base a.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    qmax: usize,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    problem: String,
    /// Rows per dataset (defaults depend on the problem).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 3)]
    p: usize,
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, env = "LQTEST_SEED", default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Test(args) => commands::run_test(args),
        Command::Simulate(args) => commands::run_simulate(args),
        Command::Plan(args) => commands::run_plan(args),
        Command::OracleCheck(args) => commands::run_oracle_check(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
