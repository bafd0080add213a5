use thiserror::Error;

/// Error type shared by every module of the toolkit.
#[derive(Debug, Clone, Error)]
pub enum CoreError {
    /// A construction-time invariant was violated.
    #[error("validation error: {0}")]
    Validation(String),

    /// Inputs left the mathematical domain of an operation
    /// (blowup region, non-finite values, backward flow past blowup).
    #[error("domain error: {0}")]
    Domain(String),

    /// The request exceeds a configured capability (order > K_MAX, ...).
    #[error("capability error: {0}")]
    Capability(String),

    /// A lemma hypothesis or side-condition failed.
    #[error("hypothesis error: {0}")]
    Hypothesis(String),

    /// Adaptive integration could not reach the requested tolerance.
    #[error("integration error at t = {last_t}: {message}")]
    Integration { last_t: f64, message: String },

    /// A fixed-point iteration failed to converge.
    #[error("convergence error after {iterations} iterations, residual {residual:e}: {message}")]
    Convergence {
        iterations: usize,
        residual: f64,
        message: String,
    },

    /// An improper-integral pushforward grows instead of decaying.
    #[error("divergence error: pushforward grows at fitted rate {rate}")]
    Divergence { rate: f64 },

    /// A perturbation failed a certification class (ratio diverges).
    #[error("classification failure for {class}: ratio diverges near witness {witness:?}")]
    Classification { class: String, witness: Vec<f64> },

    /// Numerical sub-procedure (quadrature, regression) failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The operation was called with structurally unusable inputs.
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
