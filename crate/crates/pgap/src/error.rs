use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input: malformed config, out-of-range parameter, unknown key.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A precondition of an operation does not hold.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("evaluation outside profile domain at |x'| = {radius}")]
    OutsideDomain { radius: f64 },

    #[error("point is not in the neck domain: {0}")]
    NotInDomain(String),

    #[error("non-finite value in cell {cell}: {what}")]
    NonFinite { cell: usize, what: String },

    #[error("Newton failed to converge at stage {stage} (p = {p}, eta = {eta}): {reason}")]
    NoConvergence { stage: usize, p: f64, eta: f64, reason: String },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("fit needs at least {need} points, got {got}")]
    TooFewPoints { got: usize, need: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Invariant(_) | Error::Io { .. } | Error::Serde(_) => 1,
            Error::TooFewPoints { .. } => 1,
            _ => 2,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
