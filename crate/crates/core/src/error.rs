use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Species label used in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Plus,
    Minus,
}

impl std::fmt::Display for Species {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Species::Plus => f.write_str("rho_plus"),
            Species::Minus => f.write_str("rho_minus"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frame mismatch: {0}")]
    FrameMismatch(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("density escaped [0,1] at t={time}, cell {cell} ({species} = {value})")]
    DensityEscape {
        time: f64,
        cell: usize,
        species: Species,
        value: f64,
    },

    #[error("non-finite value at t={time}, cell {cell} ({species})")]
    NonFinite {
        time: f64,
        cell: usize,
        species: Species,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::DensityEscape { .. } | Error::NonFinite { .. })
    }

    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}
