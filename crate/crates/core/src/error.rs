use thiserror::Error;

/// Everything that can go wrong while building or running a solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{a}, {b}]: need a < b")]
    InvalidInterval { a: f64, b: f64 },

    #[error("polynomial operands live on different intervals")]
    IntervalMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Robin system for degree {k} is singular (|det| = {det:e})")]
    SingularBoundarySystem { k: usize, det: f64 },

    #[error("derivative expansion of phi_{n} is numerically singular (condition {cond:e})")]
    BasisDependence { n: usize, cond: f64 },

    #[error("collocation matrix is ill-conditioned (condition {cond:e} > {limit:e})")]
    IllConditionedCollocation { cond: f64, limit: f64 },

    #[error("matrix has a zero eigenvalue")]
    ZeroEigenvalue,

    #[error("eigen-solver failed: {0}")]
    EigenSolver(String),

    #[error("first graded step underflows (h1 = {h1:e}); reduce v")]
    GradedUnderflow { h1: f64 },

    #[error("memory term for step {step} needs coefficients that have not been computed")]
    MissingHistory { step: usize },

    #[error("{method} iteration did not converge on step {step} (last update {residual:e})")]
    NoConvergence {
        step: usize,
        method: &'static str,
        residual: f64,
    },

    #[error("singular iteration matrix on step {step}")]
    SingularIterationMatrix { step: usize },

    #[error("time {t} outside [0, {t_final}]")]
    OutOfRange { t: f64, t_final: f64 },

    #[error("Mittag-Leffler E({sigma}, {beta}) at z = {z}: no expansion reaches tolerance (gap between |z| = {taylor_limit} and {asymptotic_limit})")]
    UnsupportedRegime {
        sigma: f64,
        beta: f64,
        z: f64,
        taylor_limit: f64,
        asymptotic_limit: f64,
    },

    #[error("unknown problem `{0}` (expected example1, example2 or example3)")]
    UnknownProblem(String),

    #[error("problem has no exact solution to compare against")]
    MissingExactSolution,

    #[error("malformed input at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
