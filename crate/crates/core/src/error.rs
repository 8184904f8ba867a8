use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum MtpError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("solver did not converge after {iterations} iterations (best bounds [{lower}, {upper}])")]
    Convergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl MtpError {
    /// Stable machine-readable tag used by the CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            MtpError::Domain(_) => "domain",
            MtpError::Precondition(_) => "precondition",
            MtpError::Resource(_) => "resource",
            MtpError::Convergence { .. } => "convergence",
            MtpError::Construction(_) => "construction",
            MtpError::Estimation(_) => "estimation",
            MtpError::Invalid(_) => "precondition",
        }
    }
}

pub type Result<T> = std::result::Result<T, MtpError>;
