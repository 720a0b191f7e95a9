use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the reduction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no slice images found in {0}")]
    EmptyScan(PathBuf),

    #[error("slice {path} is {found_width}x{found_height}, expected {width}x{height}")]
    MixedDimensions {
        path: PathBuf,
        width: u32,
        height: u32,
        found_width: u32,
        found_height: u32,
    },

    #[error("slice {path} has max intensity {found}, expected {expected}")]
    MixedDepth {
        path: PathBuf,
        expected: u16,
        found: u16,
    },

    #[error("file name {0} does not end in a slice number")]
    UnparsableIndex(PathBuf),

    #[error("slice number {index} appears more than once in {dir}")]
    DuplicateIndex { dir: PathBuf, index: u64 },

    #[error("could not decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("invalid slice image: {0}")]
    InvalidImage(String),

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("invalid synthetic scan spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("segmentation mask has no foreground pixel")]
    EmptyMask,

    #[error("no slice of the scan has a foreground pixel")]
    AllSlicesEmpty,

    #[error("crop box {box_:?} does not fit a {width}x{height} slice")]
    BoxOutOfBounds {
        box_: crate::spatial::CropBox,
        width: usize,
        height: usize,
    },

    #[error("area profile is empty")]
    EmptyProfile,

    #[error("no positions to estimate a density from")]
    NoData,

    #[error("all density weights are zero")]
    AllZeroWeights,

    #[error("invalid density weight {0}")]
    InvalidWeight(f64),

    #[error("density span [{0}, {1}] is empty")]
    EmptySpan(f64, f64),

    #[error("invalid bandwidth {0}")]
    InvalidBandwidth(f64),

    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("selection window is empty or out of range")]
    EmptyWindow,

    #[error("no classes to average over")]
    NoClasses,

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("no scan directories found in {0}")]
    NoScans(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
