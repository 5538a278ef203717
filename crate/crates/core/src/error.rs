//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QptError {
    /// κ diverges when a mode sits on the quasi-energy π boundary.
    #[error("singular mode: eta = {eta:.3e} is within {eps:.1e} of -1 (quasi-energy at pi)")]
    Singularity { eta: f64, eps: f64 },

    #[error("Ising parameter map is singular: theta + chi = {sum} is a nonzero multiple of pi")]
    SingularMap { sum: f64 },

    #[error("{n} qubits exceeds the dense ceiling of {max}; use the momentum solver for larger chains")]
    Capacity { n: usize, max: usize },

    #[error(
        "aliasing bound violated: max(|theta|, |chi|) = {max_coupling} must be < k_int/N = {bound} \
         (N = {n}, k_int = {k_int}); use couplings below {bound}"
    )]
    Aliasing { max_coupling: f64, bound: f64, n: usize, k_int: f64 },

    #[error("eigensolver did not converge: {0}")]
    Eigen(String),

    #[error("optimizer failed: {reason} (residual norm {residual_norm:.3e} after {iterations} iterations)")]
    NonConvergence { reason: String, residual_norm: f64, iterations: usize },

    #[error("rank-deficient fit with {levels} levels: {detail}; try fewer levels")]
    RankDeficient { levels: usize, detail: String },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, QptError>;
