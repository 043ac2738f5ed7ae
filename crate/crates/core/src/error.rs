use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular generator: entries {0} and {1} of J coincide")]
    SingularGenerator(usize, usize),

    #[error("ill-conditioned matrix: |det| = {det:e}")]
    Conditioning { det: f64 },

    #[error("spectral flow leaves its domain at t = {t}; critical time is {critical_time}")]
    BlowUp { t: f64, critical_time: f64 },

    #[error("rk4 step rejected at t = {t}: {reason}")]
    Stiffness { t: f64, reason: String },

    #[error("potential does not decay: edge magnitude {edge:e} exceeds threshold {threshold:e}")]
    Decay { edge: f64, threshold: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("stencil error: {0}")]
    Stencil(String),

    #[error(
        "degenerate dressing: lambda = {lambda} is within {distance:e} of eigenvalue {eigenvalue}"
    )]
    DegenerateDressing {
        lambda: Complex64,
        eigenvalue: Complex64,
        distance: f64,
    },

    #[error("nonlocal term truncation: u(x_min)^2 = {value:e} is not negligible")]
    Truncation { value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
