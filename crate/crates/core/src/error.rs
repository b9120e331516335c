use thiserror::Error;

/// Errors produced by protocol synthesis and verification.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("constants are not quantum-consistent: D = {diffusion}, hbar/(2m) = {expected}")]
    InconsistentConstants { diffusion: f64, expected: f64 },

    #[error("infeasible protocol at s = {s}: {reason}")]
    Infeasible { s: f64, reason: String },

    #[error("Euler-Lagrange right-hand side is singular at s = {s} (D*gamma = s*kbar)")]
    Singular { s: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("boundary value solver did not converge after {iterations} iterations (last update {last:.3e})", last = history.last().copied().unwrap_or(f64::NAN))]
    NoConvergence {
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("damping underflow after {iterations} iterations: iterate trapped against the singular manifold near s = {s}")]
    SingularityTrap { iterations: usize, s: f64 },

    #[error("invalid option: {0}")]
    InvalidOption(String),
}

pub type Result<T> = std::result::Result<T, Error>;
