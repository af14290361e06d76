use thiserror::Error;

/// Failure while evaluating a formula at a point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by a zero-valued quantity")]
    DivisionByZero,
    #[error("logarithm of non-positive value {0}")]
    LogDomain(f64),
    #[error("non-integer power of non-positive base {0}")]
    PowDomain(f64),
    #[error("derivative unavailable: {0}")]
    DerivativeUnavailable(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular Jacobian")]
    SingularJacobian,
    #[error("non-finite value produced")]
    NonFinite,
}

pub type EvalResult<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("singular matrix")]
    SingularMatrix,
    #[error("integrator exhausted {steps} steps at t = {t_reached}")]
    StepLimit { steps: usize, t_reached: f64 },
    #[error("trajectory left the safe region near t = {t_exit}")]
    LeftSafeRegion { t_exit: f64 },
    #[error("guard violation at step {step}")]
    GuardViolation { step: usize },
    #[error("map has no inverse; negative iteration unavailable")]
    MissingInverse,
    #[error("sampling rejected {rejections} candidates for {requested} points; region misconfigured")]
    SamplingExhausted { rejections: usize, requested: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown catalog entry `{0}`")]
    UnknownMap(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("map is not monotone on the circle (derivative {derivative} at x = {at})")]
    NonMonotone { at: f64, derivative: f64 },
    #[error("phase space dimension {0} is odd")]
    OddDimension(usize),
    #[error("flow branch `{branch}` failed: {source}")]
    FlowBranch {
        branch: &'static str,
        source: Box<Error>,
    },
    #[error("no convergence after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
