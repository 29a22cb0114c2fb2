use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty object region")]
    EmptyObject,
    #[error("zero denominator in relative variation")]
    ZeroDenominator,
    #[error("radius below mesh size: {0}")]
    RadiusBelowMesh(f64),
    #[error("gaussian kernel size must be odd and at least 3, got {0}")]
    InvalidKernelSize(usize),
    #[error("kernel stencil {kernel}x{kernel} does not fit in a {width}x{height} field")]
    KernelTooLarge {
        kernel: usize,
        width: usize,
        height: usize,
    },
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("constraint requires radial kernel")]
    NotRadial,
    #[error("pixel ({0}, {1}) is not on the object boundary")]
    NotOnBoundary(usize, usize),
    #[error("no object labels")]
    NoObjectLabels,
    #[error("insufficient samples for K components: {samples} samples for K = {components}")]
    InsufficientSamples { samples: usize, components: usize },
    #[error("background sample region is empty for margin s = {0}; use a smaller s")]
    EmptyBackground(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape does not fit on the canvas: {0}")]
    ShapeTooLarge(String),
}
