use thiserror::Error;

/// Errors produced by the processing kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("point lies behind the target camera (z = {0})")]
    BehindCamera(f64),
    #[error("rotation angle {0} rad is too close to pi for a unique square root")]
    DegenerateRotation(f64),
    #[error("matrix is not a rotation: {0}")]
    InvalidRotation(String),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("stereo baseline is degenerate (|t| = {0})")]
    DegenerateBaseline(f64),
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid range [{min}, {max}]")]
    InvalidRange { min: f64, max: f64 },
    #[error("mosaic dimensions must be even, got {0}x{1}")]
    OddDimensions(usize, usize),
    #[error("total internal reflection: sin(theta_t) = {0} > 1")]
    TotalInternalReflection(f64),
    #[error("reflectance vanishes; degree of polarization undefined")]
    ZeroReflectance,
    #[error("field angle {0} rad outside the lens field of view")]
    ThetaOutOfFov(f64),
    #[error("pixel ({0}, {1}) lies outside the annulus")]
    OutsideAnnulus(f64, f64),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("coordinate ({0}, {1}) outside image bounds")]
    OutOfBounds(f64, f64),
    #[error("scene has no patches")]
    EmptyScene,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
