use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("Fourier grid size must be even and positive, got {0}")]
    OddFourierGrid(usize),

    #[error("pulse atom {index} has negligible energy")]
    DegenerateAtom { index: usize },

    #[error("pulse centre frequency cannot match band [{f_low}, {f_high}] Hz within tolerance (worst endpoint error {worst_error:.3})")]
    InfeasibleBand { f_low: f64, f_high: f64, worst_error: f64 },

    #[error("entry {index} is not a valid sign bit: {value}")]
    NotASign { index: usize, value: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{0} has zero norm")]
    ZeroNorm(&'static str),

    #[error("power update ill-posed for atom {index}: zero weight with nonzero coefficient")]
    IllPosedPower { index: usize },

    #[error("all powers are zero")]
    AllZeroPower,

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("threshold levels are all zero, scale is unidentifiable")]
    ZeroThreshold,

    #[error("ingest failed for {path}: {reason}")]
    Ingest { path: PathBuf, reason: String },

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn mismatch(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }
}
