use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum PlateauError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degree error: {samples} samples cannot resolve degree {degree} (need at least {needed})")]
    Degree {
        samples: usize,
        degree: usize,
        needed: usize,
    },

    #[error("point ({u}, {v}) is outside the open unit disc")]
    Domain { u: f64, v: f64 },

    #[error("degenerate contour: {0}")]
    DegenerateContour(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("reports describe different contours: {0}")]
    MismatchedContour(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("map is not univalent at {} test point(s)", offending.len())]
    UnivalencyFailure { offending: Vec<[f64; 2]> },

    #[error("best modulus {rho} lies at the end of the bracket [{lo}, {hi}]")]
    ModulusAtBracketEnd { rho: f64, lo: f64, hi: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PlateauError>;

impl From<serde_json::Error> for PlateauError {
    fn from(e: serde_json::Error) -> Self {
        PlateauError::Parse(e.to_string())
    }
}
