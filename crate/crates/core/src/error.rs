use thiserror::Error;

/// Errors raised by the flow library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("mesh too coarse for regularization depth {requested}; maximum admissible depth is {max_admissible}")]
    MeshTooCoarse { requested: u32, max_admissible: u32 },

    #[error("discrete complex Hessian is not positive at {location} (value {value:e}); regularization insufficient")]
    NonPositiveHessian { location: String, value: f64 },

    #[error("Newton iteration did not converge at t = {t} (dt = {dt:e}, residual {residual:e})")]
    NewtonDivergence { t: f64, dt: f64, residual: f64 },

    #[error("no damped Newton step stays in the admissible cone at t = {t}")]
    ConeViolation { t: f64 },

    #[error("run aborted at t = {t} on rung {rung}: {source}")]
    RunFailed {
        t: f64,
        rung: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("scenario error in `{field}`: {reason}")]
    Scenario { field: String, reason: String },

    #[error("unknown series `{0}`")]
    UnknownSeries(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn scenario(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Scenario {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
