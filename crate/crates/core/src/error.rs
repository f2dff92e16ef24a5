use alloc::string::String;

/// Errors raised by the numerical kernel and the transform methods.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} must be a non-empty square matrix, got {rows}x{cols}")]
    Shape {
        what: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("{what} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what} contains a non-finite entry")]
    NonFinite { what: &'static str },
    #[error("{what} is not symmetric (residual {residual:e})")]
    NotSymmetric { what: &'static str, residual: f64 },
    #[error("matrix exponential overflows (1-norm {norm:e})")]
    Overflow { norm: f64 },
    #[error("{what} is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite {
        what: &'static str,
        min_eigenvalue: f64,
    },
    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: &'static str },
    #[error("{what} is singular{}", fmt_time(*.t))]
    Singular { what: &'static str, t: Option<f64> },
    #[error("eigenvector matrix is ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("no admissible Q: A*M != M^T*A (residual {residual:e})")]
    CommutationUnsatisfiable { residual: f64 },
    #[error("commutation condition violated (residual {residual:e})")]
    CommutationViolated { residual: f64 },
    #[error("Gindikin condition violated: {reason}")]
    Gindikin { reason: String },
    #[error("precondition failed: {reason}")]
    PreconditionFailed { reason: String },
    #[error("no stabilizing solution of the algebraic Riccati equation: {reason}")]
    NoStabilizingSolution { reason: &'static str },
    #[error("numerical breakdown in {stage}{}", fmt_step(*.step))]
    NumericalBreakdown {
        stage: &'static str,
        step: Option<usize>,
    },
    #[error("damping factor {damping} is invalid: {reason}")]
    DampingInvalid { damping: f64, reason: String },
    #[error("branch discontinuity at omega = {omega}: phase jump {jump}")]
    BranchDiscontinuity { omega: f64, jump: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

fn fmt_time(t: Option<f64>) -> String {
    match t {
        Some(t) => alloc::format!(" at t = {t}"),
        None => String::new(),
    }
}

fn fmt_step(step: Option<usize>) -> String {
    match step {
        Some(s) => alloc::format!(" at step {s}"),
        None => String::new(),
    }
}

pub type Result<T> = core::result::Result<T, Error>;
