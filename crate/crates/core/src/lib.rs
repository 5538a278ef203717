//! Numerical laboratory for the kicked transverse-field Ising map
//! `U(χ, θ) = exp(−iχ Σ σ_z σ_z) · exp(−iθ Σ σ_x)`.
//!
//! * [`momentum`]: closed-form free-fermion mode solver.
//! * [`dense`]: exact 2^N unitary, eigenphases, ground states and concurrence.
//! * [`spectroscopy`]: simulated return-probability and trace signals and level reconstruction.
//! * [`numopt`]: Levenberg–Marquardt least squares.
//! * [`cli`]: sweep runner behind the `qpt` binary.

pub mod cli;
pub mod dense;
pub mod error;
pub mod linalg;
pub mod momentum;
pub mod numopt;
pub mod scaling;
pub mod spectroscopy;

pub use error::{QptError, Result};
