use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("io error on {path}: {source}")]
    IoPath {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed mesh file {path}: {reason}")]
    MalformedMesh { path: PathBuf, reason: String },

    #[error("mesh has no triangle with positive area")]
    ZeroAreaMesh,

    #[error("mesh vertices are all coincident")]
    ZeroRadius,

    #[error("cube edge {0} is smaller than the unit sphere diameter")]
    CubeTooSmall(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    VersionMismatch(u32),

    #[error("truncated stream: {0}")]
    Truncated(String),

    #[error("nonzero padding bits in record {0}")]
    NonzeroPadding(u64),

    #[error("corrupt data: {0}")]
    Corrupt(String),

    #[error("codec failure: {0}")]
    Codec(String),

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("tree configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("dataset too small: need {needed} meshes, have {available}")]
    DatasetTooSmall { needed: usize, available: usize },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
