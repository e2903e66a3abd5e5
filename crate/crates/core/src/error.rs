use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {message}")]
    Parameter { name: &'static str, message: String },
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("shape mismatch: expected {expected} cells, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("too many truncated samples: {0}")]
    Truncation(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Name of the offending parameter, if this is a parameter error.
    pub fn parameter(&self) -> Option<&'static str> {
        match self {
            Error::Parameter { name, .. } => Some(name),
            _ => None,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter { .. } => "parameter",
            Error::Resolution(_) => "resolution",
            Error::OutOfDomain(_) => "out_of_domain",
            Error::Shape { .. } => "shape",
            Error::Precondition(_) => "precondition",
            Error::Degenerate(_) => "degenerate",
            Error::Topology(_) => "topology",
            Error::Truncation(_) => "truncation",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 2.0 {
        Ok(())
    } else {
        Err(Error::Parameter { name: "gamma", message: format!("gamma = {gamma} must lie in (0, 2)") })
    }
}
