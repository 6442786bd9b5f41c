use std::path::PathBuf;

use thiserror::Error;

use crate::primitive::Mode;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("scene is {scene} but the camera is {camera}")]
    ModeMismatch { scene: Mode, camera: Mode },
    #[error("render cache was produced for {cached} primitives, scene has {actual}")]
    CacheMismatch { cached: usize, actual: usize },
    #[error("upstream gradient has {actual} values, expected {expected}")]
    UpstreamShape { expected: usize, actual: usize },
}

#[derive(Debug, Error)]
pub enum LossError {
    #[error("image shapes differ: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },
}

#[derive(Debug, Error)]
pub enum AdcError {
    #[error("{what} has length {actual}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic {found:?}, expected \"SPLT\"")]
    BadMagic { path: PathBuf, found: [u8; 4] },
    #[error("{path}: unsupported snapshot version {found} (supported: {supported})")]
    BadVersion {
        path: PathBuf,
        found: u32,
        supported: u32,
    },
    #[error("{path}: unknown mode flag {found}")]
    BadMode { path: PathBuf, found: u32 },
    #[error("{path}: truncated snapshot, expected {expected} bytes but file has {actual}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("{path}: expected {expected} bytes but file has {actual}")]
    TrailingBytes {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: expected an 8-bit RGB image, found {found}")]
    ImageFormat { path: PathBuf, found: String },
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at iteration {iteration} (loss {loss}, or parameters became non-finite)")]
    NonFinite {
        iteration: usize,
        loss: f64,
        /// Scene state right before the failing step.
        snapshot: Box<crate::primitive::Scene>,
    },
    #[error("invalid training setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Adc(#[from] AdcError),
}
