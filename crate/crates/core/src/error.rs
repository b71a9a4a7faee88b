//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The family matrix does not have full numerical column rank, so it
    /// cannot serve as a basis at this truncation.
    #[error("family is numerically rank deficient: rank {rank} < count {count}")]
    RankDeficient { rank: usize, count: usize },

    /// Inputs that must share a coordinate dimension or vector count do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The orthonormal special case was requested for a basis that is not
    /// orthonormal at the flag threshold.
    #[error("basis is not orthonormal: max |E^T E - I| = {defect:.3e} exceeds {tol:.3e}")]
    NotOrthonormal { defect: f64, tol: f64 },

    /// An index range [lo+1, hi] does not satisfy 0 <= lo < hi <= count.
    #[error("bad index range: lo = {lo}, hi = {hi}, count = {count}")]
    BadRange { lo: usize, hi: usize, count: usize },

    /// A truncation level outside 1..=count.
    #[error("bad truncation level {level}: must lie in 1..={count}")]
    BadLevel { level: usize, count: usize },

    /// The operator is numerically singular at the invertibility threshold;
    /// dual systems and expansions are not defined.
    #[error("operator numerically singular: sigma_min = {sigma_min:.3e} <= {threshold:.3e} * sigma_max")]
    SingularOperator { sigma_min: f64, threshold: f64 },

    /// A corpus spec that cannot be realized.
    #[error("bad corpus spec: {0}")]
    BadSpec(String),

    /// Structurally invalid input (zero dimension, non-finite entries,
    /// malformed file payloads, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// JSON (or binary header) parsing failure, located by byte offset.
    #[error("{}: parse error at byte {offset} (line {line}, column {column}): {message}", path.display())]
    Parse {
        path: PathBuf,
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
