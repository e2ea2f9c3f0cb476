use crate::face::Face;

/// Errors raised by the core library.
///
/// Variants split into validation failures (bad input or parameters) and
/// numerical failures (a computation produced something it must not).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("face {0} is not in the complex")]
    NotAFace(Face),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("locality exceeded: need {needed}, have {available}")]
    Locality { needed: usize, available: usize },
    #[error("conditioning event has probability {prob:e} below p_min {p_min:e}")]
    RareEvent { prob: f64, p_min: f64 },
    #[error("zero-probability conditioning for source face {0}")]
    ZeroProbabilityRow(Face),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Empty(_) => "empty",
            Error::Invalid(_) => "invalid",
            Error::Parameter(_) => "parameter",
            Error::NotAFace(_) => "not_a_face",
            Error::Dimension(_) => "dimension",
            Error::TooLarge(_) => "too_large",
            Error::Locality { .. } => "locality",
            Error::RareEvent { .. } => "rare_event",
            Error::ZeroProbabilityRow(_) => "zero_probability_row",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
