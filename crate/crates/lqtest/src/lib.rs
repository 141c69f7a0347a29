//! Adaptive L_q-norm U-statistic tests for high-dimensional data.
//!
//! The crate estimates ‖Θ‖_q^q = Σ_l θ_l^q for a family of testing
//! problems (mean, spatial sign, covariance, rank correlations,
//! regression coefficients, two-sample spatial sign) with unbiased
//! U-statistics, studentizes them into asymptotically standard normal
//! test statistics, and combines several q values into an adaptive test
//! whose minimum p-value is corrected as 1 − (1 − p)^{|I|}.
//!
//! Modules:
//! * [`data`] — matrices, CSV ingestion, splittable random streams
//! * [`kernels`] — the kernel h_l for each test problem
//! * [`ustat`] — brute-force oracles and dynamic-programming engines
//! * [`variance`] — analytic and permutation variance, studentization
//! * [`adaptive`] — p-value combination
//! * [`power`] — required effect sizes and the optimal q selector
//! * [`sim`] — data-generating processes and the Monte Carlo harness
//! * [`testing`] — the end-to-end single-test pipeline and its report

pub mod adaptive;
pub mod data;
pub mod error;
pub mod kernels;
pub mod normal;
pub mod power;
pub mod sim;
pub mod testing;
pub mod ustat;
pub mod variance;

pub use data::{
    derive_stream, load_csv, DataSet, PairedSample, SampleMatrix, SeedSpec, TwoSampleData,
};
pub use error::{Error, Result};
pub use kernels::{component_set, eval_kernel, ComponentIndex, KernelSpec, Problem};
pub use ustat::{LqStatistic, Variant};
