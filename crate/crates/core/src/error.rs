use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A kernel pair or problem that cannot be built as requested.
    #[error("construction error: {0}")]
    Construction(String),
    /// A quadrature or iteration that failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A rejection sampler whose envelope is evidently wrong.
    #[error("sampler health: {0}")]
    SamplerHealth(String),
    /// Input data that violates the admissibility contract at a tree node.
    #[error("data error at node {path} (draw {draw}): {msg}")]
    Data { path: String, draw: u64, msg: String },
    /// A configuration that violates a hypothesis of the existence theorems.
    #[error("invalid config: {0}")]
    Config(String),
    /// Picard sweeps that grow instead of contracting.
    #[error("contraction violated: {0}")]
    Contraction(String),
    /// Unreadable input or unwritable output.
    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn construction(msg: impl Into<String>) -> Self {
        Error::Construction(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

impl From<crate::vecgeom::ZeroVectorError> for Error {
    fn from(e: crate::vecgeom::ZeroVectorError) -> Self {
        Error::Domain(e.to_string())
    }
}
