use thiserror::Error;

use crate::hilbert::Basis;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} is not available in basis {basis}")]
    UnsupportedBasis { what: &'static str, basis: Basis },

    #[error("site {site} out of range for a chain of {spins} spins")]
    SiteOutOfRange { site: usize, spins: usize },

    #[error("matrix is not Hermitian: max |H - H^dagger| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("target selection failed: {0}")]
    DegenerateTarget(String),

    #[error(
        "level tracking is ambiguous for level {level} between grid points {index} and {} \
         (overlap {overlap:.3}); use a finer B grid",
        index + 1
    )]
    TrackingAmbiguous { level: usize, index: usize, overlap: f64 },

    #[error("gap {gap:.3e} below 1e-12 at grid point {index} (B = {field:.6e})")]
    GapTooSmall { index: usize, field: f64, gap: f64 },

    #[error("no level couples to the ground state above threshold {0:e}")]
    NoCoupledLevel(f64),

    #[error("ramp integrand vanishes identically")]
    ZeroIntegrand,

    #[error("level {level} is not tracked by the scan (tracked: 1..={tracked})")]
    LevelNotTracked { level: usize, tracked: usize },

    #[error("norm drift {drift:.3e} exceeds 1e-6; reduce the time step")]
    NormDrift { drift: f64 },

    #[error("trace drift {drift:.3e} exceeds 1e-6; reduce the time step")]
    TraceDrift { drift: f64 },

    #[error("density matrix lost positivity (min eigenvalue {min_eigenvalue:.3e})")]
    NegativeEigenvalue { min_eigenvalue: f64 },

    #[error("basis mismatch: {left} vs {right}")]
    BasisMismatch { left: Basis, right: Basis },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("property checks failed: {0}")]
    PropertyFailed(String),

    #[error("manifest: {0}")]
    Manifest(#[from] ManifestError),

    #[error("schedule csv line {line}: {msg}")]
    ScheduleCsv { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category, printed by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::UnsupportedBasis { .. }
            | Error::SiteOutOfRange { .. }
            | Error::InvalidModel(_)
            | Error::BasisMismatch { .. } => "model",
            Error::NotHermitian { .. } | Error::DegenerateTarget(_) => "spectrum",
            Error::TrackingAmbiguous { .. }
            | Error::GapTooSmall { .. }
            | Error::NoCoupledLevel(_)
            | Error::ZeroIntegrand
            | Error::LevelNotTracked { .. }
            | Error::InvalidSchedule(_) => "schedule",
            Error::NormDrift { .. } | Error::TraceDrift { .. } | Error::NegativeEigenvalue { .. } => {
                "integration"
            }
            Error::InvalidConfig(_) | Error::Manifest(_) => "config",
            Error::PropertyFailed(_) => "validation",
            Error::ScheduleCsv { .. } | Error::Io(_) | Error::Json(_) => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("duplicate key `{0}`")]
    DuplicateKey(String),

    #[error("missing required field `{0}`")]
    MissingField(String),

    #[error("key `{key}` has the wrong unit suffix; expected one of {expected}")]
    UnitMismatch { key: String, expected: String },

    #[error("key `{key}`: {msg}")]
    BadValue { key: String, msg: String },
}
