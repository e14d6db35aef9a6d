use thiserror::Error;

use crate::expr::ExprError;
use crate::scalar::ScalarError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Scalar(#[from] ScalarError),

    #[error(transparent)]
    Expr(#[from] ExprError),

    /// An expression-backed field failed to evaluate.
    #[error("field `{field}` failed to evaluate: {source}")]
    FieldEval {
        field: String,
        #[source]
        source: ExprError,
    },

    #[error("singular metric (condition estimate {condition:.3e})")]
    SingularMetric { condition: f64 },

    #[error("h is not symmetric: |h[{i}][{j}] - h[{j}][{i}]| = {diff:.3e}")]
    AsymmetricMetric { i: usize, j: usize, diff: f64 },

    #[error("point has {found} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("initial du/dsigma must be positive, got {0}")]
    NonPositiveUdot(f64),

    #[error("du/dsigma is zero")]
    ZeroUdot,

    #[error("step limit of {max_steps} exceeded at t = {t}")]
    StepLimitExceeded { max_steps: usize, t: f64 },

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("state norm exceeded 1e12 at t = {t}")]
    BlowUp { t: f64 },

    #[error("u is not increasing along the geodesic (du/dsigma = {udot:.3e} at sigma = {sigma})")]
    MonotonicityViolation { sigma: f64, udot: f64 },

    #[error("u = {u} lies outside the trajectory range [{from}, {to}]")]
    OutOfRange { u: f64, from: f64, to: f64 },

    #[error("transformation is singular at the probed state (det = {det:.3e})")]
    SingularJacobian { det: f64 },

    #[error("closed form only covers the underdamped regime, got gamma = {0}")]
    OverdampedUnsupported(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
