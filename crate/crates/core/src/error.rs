use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("non-finite input")]
    NonFinite,
    #[error("pixel ({u}, {v}) out of range for resolution {m}")]
    PixelOutOfRange { u: usize, v: usize, m: usize },
    #[error("partition count must be at least 1")]
    ZeroPartitions,
    #[error("more partitions than points ({k} > {n})")]
    TooManyPartitions { k: usize, n: usize },
    #[error("cloud too small for partition count ({n} points, {k} partitions)")]
    CloudTooSmall { n: usize, k: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u32, classes: usize },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("malformed EFM data at byte offset {offset}: {msg}")]
    Format { offset: usize, msg: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyCloud => "empty_cloud",
            Error::NonFinite => "non_finite",
            Error::PixelOutOfRange { .. } => "pixel_out_of_range",
            Error::ZeroPartitions => "zero_partitions",
            Error::TooManyPartitions { .. } => "too_many_partitions",
            Error::CloudTooSmall { .. } => "cloud_too_small",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Shape(_) => "shape",
            Error::Config(_) => "config",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::Parse { .. } => "parse",
            Error::Format { .. } => "format",
            Error::Manifest(_) => "manifest",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
