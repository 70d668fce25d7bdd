use thiserror::Error;

/// Errors raised by the solver and its workflows.
///
/// The variants map onto the exit-code contract of the command line tool:
/// configuration problems exit with 1, numerical failures with 2.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, model or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Arguments outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A state or spec was passed to an operation that does not accept it.
    #[error("usage error: {0}")]
    Usage(String),

    /// An iterative method failed or produced non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The charge of an iterate dropped below the floor during free descent.
    #[error("charge collapse at iteration {iteration}: |C| = {charge:e} below floor {floor:e}; the regularizer delta is likely too large")]
    ChargeCollapse { iteration: usize, charge: f64, floor: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status associated with this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Domain(_) => 1,
            Error::Io(_) | Error::Json(_) => 1,
            Error::Numerical(_) | Error::ChargeCollapse { .. } => 2,
        }
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::Usage(_) => "usage",
            Error::Numerical(_) => "numerical",
            Error::ChargeCollapse { .. } => "charge-collapse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
