use alloc::string::String;

/// Errors raised by the extrapolation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimensions(String),
    #[error("rectangle {0} lies outside the window")]
    RectOutOfBounds(String),
    #[error("missing and outside rectangles overlap")]
    OverlappingRects,
    #[error("no support samples")]
    NoSupport,
    #[error("rho_hat must lie in (0, 1), got {0}")]
    RhoHat(f64),
    #[error("gamma must lie in (0, 1], got {0}")]
    Gamma(f64),
    #[error("iteration count must be at least 1")]
    Iterations,
    #[error("non-finite sample at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("signal of {rows}x{cols} does not fit a {size}x{size} transform")]
    TooLarge { rows: usize, cols: usize, size: usize },
    #[error("no samples carry the evaluated label")]
    EmptyEvaluation,
    #[error("basis function vanishes on support")]
    VanishingBasis,
    #[error("degenerate basis function on support")]
    DegenerateGram,
    #[error("conjugate symmetry violated (imaginary residue {0:e})")]
    ConjugateSymmetry(f64),
    #[error("full compensation needs the squared-weight spectrum")]
    FullNotPrepared,
    #[error("spectral engine requires the DFT basis")]
    NotDft,
    #[error("basis index ({0}, {1}) outside the transform grid")]
    IndexOutOfRange(usize, usize),
}

pub type Result<T> = core::result::Result<T, Error>;
