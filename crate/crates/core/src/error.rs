//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the toolkit.
///
/// Variants split into input-validation failures (bad arguments, malformed
/// files) and numerical failures (an estimator that detected it cannot
/// produce a meaningful answer). [`Error::is_validation`] encodes the split,
/// which the CLI maps onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Generic precondition violation on an operation's inputs.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// CTF ring fit score below the detection floor.
    #[error("CTF fit failed: best score {score:.3} below threshold {threshold:.3}")]
    FitFailed { score: f64, threshold: f64 },

    /// Dart-throwing placement could not reach the requested density.
    #[error("particle placement stalled after {attempts} attempts ({placed} placed)")]
    PlacementFailed { attempts: usize, placed: usize },

    /// Patch-motion polynomial fit has fewer observations than unknowns.
    #[error("motion fit degenerate: {observations} observations for {terms} polynomial terms")]
    FitDegenerate { observations: usize, terms: usize },

    /// Angular reconstitution rejected a (near-)coplanar triplet.
    #[error("degenerate common-line triplet: {0}")]
    DegenerateTriplet(String),

    /// Synchronization matrix has no usable spectral gap.
    #[error("synchronization spectrally degenerate: gap {gap:.4} < {min_gap:.4}")]
    SpectralDegenerate { gap: f64, min_gap: f64 },

    /// A Fourier coefficient magnitude required for phase recovery vanished.
    #[error("vanishing Fourier magnitude at frequency {index}: |X| = {magnitude:.3e}")]
    VanishingFrequency { index: usize, magnitude: f64 },

    /// Signal power is zero where a positive value is required.
    #[error("zero signal: {0}")]
    ZeroSignal(String),

    /// File does not carry the MRC magic bytes.
    #[error("bad MRC magic in {path}")]
    BadMagic { path: String },

    /// MRC mode other than 2 (32-bit float).
    #[error("unsupported MRC mode {mode} in {path} (only mode 2 supported)")]
    UnsupportedMode { mode: i32, path: String },

    /// MRC data section shorter than the header promises.
    #[error("truncated MRC data in {path}: expected {expected} bytes, found {found}")]
    TruncatedData {
        path: String,
        expected: usize,
        found: usize,
    },

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed JSON metadata or configuration.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid inputs or malformed files, false
    /// for numerical failures detected mid-computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::BadMagic { .. }
                | Error::UnsupportedMode { .. }
                | Error::TruncatedData { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
