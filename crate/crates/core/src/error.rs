use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point:?} lies outside the domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("domains do not intersect")]
    DisjointDomains,

    #[error("empty sample set")]
    EmptySamples,

    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("density vanishes on an interior interval near x = {0}")]
    VanishingDensity(f64),

    #[error("measure mass kinds do not match: {0}")]
    MassMismatch(String),

    #[error("map is not invertible to tolerance: jacobian {0:e} near zero")]
    NotInvertible(f64),

    #[error("row {0} of the coupling carries no mass")]
    EmptyRow(usize),

    #[error("box misses a mass of {deficit:e} (allowed {allowed:e})")]
    MassDeficit { deficit: f64, allowed: f64 },

    #[error("semigroup value underflowed at x = {0:?}")]
    Underflow(Vec<f64>),

    #[error("family not supported here: {0}")]
    Unsupported(String),

    #[error("spec file line {line}: {message}")]
    Spec { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
