use core::fmt;

/// Errors shared across the pipeline stages.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two grids that must share a size do not.
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// An operation needs at least one mask-valid pixel and found none.
    EmptyMask,
    /// A pyramid level would have zero width or height.
    PyramidTooDeep { levels: usize },
    /// Intrinsics violate their invariants (f > 0, c inside the image).
    InvalidIntrinsics,
    /// A vector expected to be unit length is not.
    NonUnitNormal { norm: f64 },
    /// A linear system produced non-finite entries.
    NonFiniteSystem { context: &'static str },
    /// The renderer produced no surface hits.
    EmptySilhouette,
    /// A parameter is outside its documented range.
    InvalidParameter { what: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => write!(
                f,
                "dimension mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::EmptyMask => write!(f, "no mask-valid pixels"),
            Error::PyramidTooDeep { levels } => {
                write!(f, "pyramid with {levels} levels reaches zero size")
            }
            Error::InvalidIntrinsics => write!(f, "invalid camera intrinsics"),
            Error::NonUnitNormal { norm } => {
                write!(f, "expected unit vector, got norm {norm}")
            }
            Error::NonFiniteSystem { context } => {
                write!(f, "non-finite entries in linear system ({context})")
            }
            Error::EmptySilhouette => write!(f, "rendered scene has an empty silhouette"),
            Error::InvalidParameter { what } => write!(f, "invalid parameter: {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
