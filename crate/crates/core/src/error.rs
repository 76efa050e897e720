use thiserror::Error;

/// Errors raised by the phase-space, arrival-time and CLI layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("integration did not converge: value {value:e}, error estimate {error_estimate:e} after {subdivisions} subdivisions")]
    NotConverged {
        value: f64,
        error_estimate: f64,
        subdivisions: usize,
    },

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("sampling grid does not cover the support: missing mass {missing_mass:e} exceeds {tolerance:e}")]
    InsufficientSupport { missing_mass: f64, tolerance: f64 },

    #[error("state outside the convergence domain: {0}")]
    DomainViolation(String),

    #[error("ratio denominator {0:e} is below the density floor")]
    DivisionDegenerate(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error{}: {message}", location(.line, .key))]
    Config {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn location(line: &Option<usize>, key: &Option<String>) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!(" at line {l}, key `{k}`"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(k)) => format!(" for key `{k}`"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn config(line: Option<usize>, key: Option<&str>, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            key: key.map(str::to_owned),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
