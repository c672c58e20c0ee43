use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "grid overflow at kick {kick}: edge mass {edge_mass:.3e} exceeds threshold on N={grid_n}"
    )]
    GridOverflow {
        kick: usize,
        edge_mass: f64,
        grid_n: usize,
    },

    #[error("realization {index} failed: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("resonant site: tangent argument {argument} is within {tolerance:e} of a pole")]
    ResonantSite { argument: f64, tolerance: f64 },

    #[error("mapping singular for these parameters: K(1+eps)/(2 hbar) = {value} reaches pi/2")]
    SingularMapping { value: f64 },

    #[error("not localized in window [{m_min}, {m_max}]: fitted slope {slope} is not negative")]
    NotLocalized { m_min: i64, m_max: i64, slope: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("diagonalization failed: {0}")]
    Diagonalization(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag, used for error JSON on the command line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::GridOverflow { .. } => "grid_overflow",
            Error::Realization { .. } => "realization_failed",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::ResonantSite { .. } => "resonant_site",
            Error::SingularMapping { .. } => "singular_mapping",
            Error::NotLocalized { .. } => "not_localized",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Diagonalization(_) => "diagonalization",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Kind of the innermost error, looking through realization wrappers.
    pub fn root_kind(&self) -> &'static str {
        match self {
            Error::Realization { source, .. } => source.root_kind(),
            e => e.kind(),
        }
    }

    /// True when this error (possibly wrapped in a realization error) is a grid overflow.
    pub fn is_grid_overflow(&self) -> bool {
        match self {
            Error::GridOverflow { .. } => true,
            Error::Realization { source, .. } => source.is_grid_overflow(),
            _ => false,
        }
    }
}
