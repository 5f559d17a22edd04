use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spectral coefficients are not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("derivative multiplier overflows: max |xi|^{order} = {value:.3e}")]
    DerivativeOverflow { order: usize, value: f64 },

    #[error("field is under-resolved: {0}")]
    Resolution(String),

    #[error("drift calibration failed: {0}")]
    Calibration(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("Picard iteration is not contracting: {0}")]
    NonContraction(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("engine aborted: {0}")]
    EngineAbort(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidGrid(_) | Error::InvalidArgument(_) => 2,
            Error::EngineAbort(_) | Error::NonContraction(_) | Error::Resolution(_) => 3,
            Error::Calibration(_)
            | Error::Quadrature(_)
            | Error::DegenerateFit(_)
            | Error::NotHermitian { .. }
            | Error::DerivativeOverflow { .. } => 4,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 4,
        }
    }
}
