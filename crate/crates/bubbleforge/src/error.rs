use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are grouped by how a caller is expected to react: precondition
/// failures mean the input was unsuitable, solver failures mean the input was
/// fine but the numerics could not meet the requested accuracy.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {z} lies outside the analyticity band |Im z| < {band}")]
    Domain { z: Complex64, band: f64 },

    #[error("not a diffeomorphism: derivative {min_derivative} at x = {at}")]
    NotDiffeomorphism { min_derivative: f64, at: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite integrand value at node {index} (z = {z})")]
    Evaluation { index: usize, z: Complex64 },

    #[error("no isolated fixed points")]
    NoIsolatedFixedPoints,

    #[error("not hyperbolic: {0}")]
    NotHyperbolic(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("contour error: {0}")]
    Contour(String),

    #[error("pole: {0}")]
    Pole(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("undecided: {0}")]
    Undecided(String),

    #[error("iteration budget exhausted; best bracket [{lo}, {hi}]")]
    Budget { lo: f64, hi: f64 },

    #[error("accuracy: residual {residual:e} above tolerance {tol:e}")]
    Accuracy { residual: f64, tol: f64 },

    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    #[error("divergence: extrapolants not Cauchy {sequence:?}")]
    Divergence { sequence: Vec<Complex64> },

    #[error("convergence error: {0}")]
    Convergence(String),
}

impl Error {
    /// True when the failure is attributable to the input rather than the solver.
    pub fn is_precondition(&self) -> bool {
        !matches!(
            self,
            Error::Accuracy { .. }
                | Error::InvalidSolution(_)
                | Error::Divergence { .. }
                | Error::Convergence(_)
                | Error::Budget { .. }
                | Error::Undecided(_)
                | Error::Evaluation { .. }
                | Error::Consistency(_)
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::NotDiffeomorphism { .. } => "not_diffeomorphism",
            Error::Contract(_) => "contract",
            Error::Evaluation { .. } => "evaluation",
            Error::NoIsolatedFixedPoints => "no_isolated_fixed_points",
            Error::NotHyperbolic(_) => "not_hyperbolic",
            Error::NotFound(_) => "not_found",
            Error::Geometry(_) => "geometry",
            Error::Contour(_) => "contour",
            Error::Pole(_) => "pole",
            Error::Consistency(_) => "consistency",
            Error::Coverage(_) => "coverage",
            Error::Parse { .. } => "parse",
            Error::Undecided(_) => "undecided",
            Error::Budget { .. } => "budget",
            Error::Accuracy { .. } => "accuracy",
            Error::InvalidSolution(_) => "invalid_solution",
            Error::Divergence { .. } => "divergence",
            Error::Convergence(_) => "convergence",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
