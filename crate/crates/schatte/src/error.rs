//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration is structurally invalid (bad sizes, bad ranges, ...).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The wrapped law has a Fourier coefficient of modulus (numerically) one,
    /// so the walk modulo one does not equidistribute and no spectral gap exists.
    #[error("non-mixing configuration: |coefficient| = {modulus} at k = {k} (must stay below 1)")]
    NonMixing { k: i64, modulus: f64 },

    /// Eigenvalue clipping would distort the covariance matrix beyond the
    /// allowed tolerance.
    #[error("covariance matrix is too far from positive semidefinite: clipped mass {clipped} exceeds tolerance {tolerance}")]
    NotPositiveSemidefinite { clipped: f64, tolerance: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
