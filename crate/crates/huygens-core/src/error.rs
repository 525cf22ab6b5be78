use alloc::string::String;
use core::fmt;

/// Every failure the core library can report.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates its documented domain.
    InvalidParameter(String),
    /// A state or matrix had the wrong length.
    Shape { expected: usize, got: usize },
    /// A non-finite number appeared in an input.
    NonFinite(&'static str),
    /// The step size underflowed or the solution blew up.
    IntegrationFailure { t_last: f64, reason: &'static str },
    /// Two eigenvalues coalesce and the matrix is (near) defective.
    Degeneracy { first: usize, second: usize },
    /// A critical eigenvalue sits too close to a (half-)integer multiple
    /// of the base frequency to be classified reliably.
    Resonance { index: usize, ratio: f64 },
    /// The secondary special group is non-empty; its stability check is not implemented.
    SecondaryGroup { indices: usize },
    /// The model has no amplitude equations (e.g. a frame-only layout).
    UnsupportedModel(&'static str),
    /// The amplitude solver did not converge.
    NoSolution { iterations: usize, residual: f64 },
    /// The amplitude solver converged to r <= 0.
    TrivialSolution,
    /// A solution was found but a reference amplitude vanishes.
    DegenerateSolution,
    /// Too few zero crossings to estimate a period.
    InsufficientData { crossings: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Shape { expected, got } => {
                write!(f, "shape mismatch: expected length {expected}, got {got}")
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::IntegrationFailure { t_last, reason } => {
                write!(f, "integration failed at t = {t_last}: {reason}")
            }
            Error::Degeneracy { first, second } => {
                write!(f, "eigenvalues {first} and {second} coalesce; matrix is defective or near-defective")
            }
            Error::Resonance { index, ratio } => {
                write!(f, "eigenvalue {index} is near-resonant (lambda / i omega = {ratio})")
            }
            Error::SecondaryGroup { indices } => {
                write!(f, "secondary special group has {indices} members; its stability condition is not supported")
            }
            Error::UnsupportedModel(name) => write!(f, "model {name} is not supported here"),
            Error::NoSolution { iterations, residual } => {
                write!(f, "amplitude equations did not converge after {iterations} iterations (residual {residual:e})")
            }
            Error::TrivialSolution => write!(f, "amplitude solver converged to the trivial solution"),
            Error::DegenerateSolution => write!(f, "reference amplitude alpha_k vanishes"),
            Error::InsufficientData { crossings } => {
                write!(f, "only {crossings} zero crossings in window (need 10)")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: &str) -> Error {
    Error::InvalidParameter(String::from(msg))
}
