use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for {len} time directions")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("finite-difference step {0:e} is below the cancellation guard")]
    StepTooSmall(f64),

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("gauge is not unitary (defect {defect:e} at t = {at:?})")]
    NotUnitary { defect: f64, at: Vec<f64> },

    #[error("gauge derivative inconsistent with finite differences (axis {axis}, mismatch {mismatch:e})")]
    InconsistentDerivative { axis: usize, mismatch: f64 },

    #[error("invalid multi-index: {0}")]
    InvalidMultiIndex(String),

    #[error("lattice too large for enumeration: {0}")]
    TooLarge(String),

    #[error("negative duration {0} (only monotone paths are supported)")]
    NegativeDuration(f64),

    #[error("caustic: |sin(omega T)| = {sin_abs:e} for omega = {omega}, T = {duration}{}", segment_suffix(*.segment))]
    Caustic {
        omega: f64,
        duration: f64,
        sin_abs: f64,
        segment: Option<usize>,
    },

    #[error("degenerate composition: |a1 + c2| = {magnitude:e}{}", segment_suffix(*.segment))]
    DegenerateComposition {
        magnitude: f64,
        segment: Option<usize>,
    },

    #[error("zero-length path yields the identity (delta) kernel")]
    IdentityKernel,

    #[error("caustic determinant: |d2S/dx'dx''| = {0:e}")]
    CausticDeterminant(f64),

    #[error("path parse error: {0}")]
    PathParse(String),
}

fn segment_suffix(segment: Option<usize>) -> String {
    match segment {
        Some(i) => format!(" (segment {i})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
