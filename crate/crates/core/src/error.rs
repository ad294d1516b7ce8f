use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid dimensions {0:?}: every extent must be positive")]
    InvalidDims([usize; 3]),

    #[error("invalid spacing {0:?}: every component must be finite and positive")]
    InvalidSpacing([f64; 3]),

    #[error("data length {actual} does not match dims product {expected}")]
    DataLength { expected: usize, actual: usize },

    #[error("non-finite intensity at voxel {index}")]
    NonFinite { index: usize },

    #[error("label code {value} at voxel {index} is not one of 0, 1, 2")]
    InvalidLabel { index: usize, value: u8 },

    #[error("voxel {index} holds Uncertainty; a binary mask may only hold Background or Lesion")]
    NotBinary { index: usize },

    #[error("slice stack is empty")]
    EmptyStack,

    #[error("slice stack holds {actual} slices, expected {expected}")]
    SliceCount { expected: usize, actual: usize },

    #[error("slice {index} is {actual:?}, expected {expected:?}")]
    SliceShape {
        index: usize,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("bad magic bytes: not an .lvol or NIfTI-1 single-file volume")]
    BadMagic,

    #[error("truncated payload: need {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("unsupported data type code {0}")]
    UnsupportedDataType(i32),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
