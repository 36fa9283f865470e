use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("fixed-point iteration did not converge at z = {re} + {im}i (residual {residual:e})")]
    NoConvergence { re: f64, im: f64, residual: f64 },
    #[error("Stieltjes branch violated at z = {re} + {im}i")]
    BranchViolation { re: f64, im: f64 },
    #[error("assumption violated: inf of int dnu/(v-x)^2 is {inf:.6} <= lambda^2 = {lambda2:.6}")]
    AssumptionViolated { inf: f64, lambda2: f64 },
    #[error("root bracketing failed: {0}")]
    Bracket(String),
    #[error("too few grid points near the edge: found {found}, need {needed}")]
    InsufficientEdgePoints { found: usize, needed: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("eigenvalue iteration failed to converge")]
    EigenNoConvergence,
    #[error("singular matrix encountered at pivot {0}")]
    Singular(usize),
    #[error("index collision: {0}")]
    IndexCollision(String),
    #[error("spectral parameter too close to the real axis: eta = {eta:e} < {min:e}")]
    EtaTooSmall { eta: f64, min: f64 },
    #[error("density has more than one component on the support")]
    MultiCut,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
