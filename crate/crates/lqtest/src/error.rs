//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("cannot parse {value:?} as a number at line {line}, column {column}")]
    CsvParse {
        line: usize,
        column: usize,
        value: String,
    },

    #[error("ragged row at line {line}: expected {expected} fields, found {found}")]
    CsvRagged {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("empty input")]
    EmptyInput,

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("kernel arity mismatch: expected {expected} observations, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("observation {row} has zero Euclidean norm; spatial-sign kernel undefined")]
    ZeroNormRow { row: usize },

    #[error("component index out of range for p = {p}")]
    ComponentOutOfRange { p: usize },

    #[error("p = {p} too small for pair-indexed component set")]
    PairComponentsUnavailable { p: usize },

    #[error("sample too small: need n >= {needed}, got n = {n}")]
    SampleTooSmall { needed: usize, n: usize },

    #[error("q must be an even integer >= 2, got {0}")]
    InvalidQ(usize),

    #[error("brute-force tuple guard exceeded: {tuples:.3e} tuples (limit {limit:.1e})")]
    TupleGuard { tuples: f64, limit: f64 },

    #[error("operation requires an order-1 kernel, got order {0}")]
    NotOrderOne(usize),

    #[error(
        "variance estimate is not positive ({0:.3e}); the data are too degenerate to \
         studentize (for kernels with a valid permutation scheme, retry with the \
         permutation variance estimator)"
    )]
    DegenerateVariance(f64),

    #[error("permutation scheme {scheme} is incompatible with problem {problem}")]
    IncompatibleScheme {
        scheme: &'static str,
        problem: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("replication {index} failed: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}
