use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix handed to the eigensolver was not Hermitian.
    #[error("matrix is not Hermitian: max |H - H^dag| = {max_asymmetry:.3e} exceeds {tolerance:.3e}")]
    NonHermitian { max_asymmetry: f64, tolerance: f64 },

    /// Perturbative formulas were requested outside their validity range.
    #[error("perturbative regime violated: (g mu_B / h) B_perp / D = {ratio:.4} >= {limit}")]
    PerturbativeGuard { ratio: f64, limit: f64 },

    /// A frequency grid does not cover the requested span.
    #[error("frequency grid [{have_lo:.6e}, {have_hi:.6e}] Hz does not cover required span [{need_lo:.6e}, {need_hi:.6e}] Hz")]
    GridCoverage {
        have_lo: f64,
        have_hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    /// Invalid parameter or configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numerical procedure failed (no zero crossing, degenerate fit, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
