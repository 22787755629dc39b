use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented range.
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// A function was evaluated outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("comb covers only {covered:.4e} rad/s, below the cutoff {omega_c:.4e} rad/s")]
    Coverage { covered: f64, omega_c: f64 },

    #[error("time {t:.6e} s lies outside [0, {total:.6e}] s")]
    OutOfRange { t: f64, total: f64 },

    #[error("quadrature did not converge: estimate {estimate:.6e}, error {error:.3e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("infeasible delays: {pulses} pulses need {needed:.6e} s but only {total:.6e} s available")]
    Infeasible { pulses: usize, needed: f64, total: f64 },

    #[error("trace value {value:.3e} at index {index} is not positive")]
    NonPositive { index: usize, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("closed form unavailable: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// Process exit status used by the command line front-end.
    ///
    /// 1 for configuration problems, 2 for numerical failures, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::Coverage { .. }
            | Error::Infeasible { .. }
            | Error::Parse(_)
            | Error::Json(_) => 1,
            Error::Domain(_)
            | Error::OutOfRange { .. }
            | Error::Quadrature { .. }
            | Error::NonPositive { .. }
            | Error::GridMismatch(_)
            | Error::Unsupported(_) => 2,
            Error::Io(_) => 3,
        }
    }
}
