//! Transverse-field Ising comparison model.

use std::f64::consts::PI;

use super::{Couplings, MomentumGrid};
use crate::error::{QptError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingParams {
    pub j: f64,
    pub b: f64,
}

/// `J = −(θ+χ) sinχ / sin(θ+χ)` and `B = θ + χ − J`.
pub fn ising_map(c: Couplings) -> Result<IsingParams> {
    let s = c.theta + c.chi;
    let n = (s / PI).round();
    if n != 0.0 && (s - n * PI).abs() < 1e-10 {
        return Err(QptError::SingularMap { sum: s });
    }
    // s/sin(s) = 1 + s²/6 + 7s⁴/360 near zero.
    let ratio = if s.abs() < 1e-4 { 1.0 + s * s / 6.0 + 7.0 * s.powi(4) / 360.0 } else { s / s.sin() };
    let j = -ratio * c.chi.sin();
    Ok(IsingParams { j, b: s - j })
}

/// `2√((B + J cos k)² + J² sin² k)`.
pub fn ising_quasi_energy(b: f64, j: f64, k: f64) -> f64 {
    2.0 * (b + j * k.cos()).hypot(j * k.sin())
}

/// Ground phase `−½ Σ_k ε_k`, normalized so that the pure-field limit agrees with the map.
pub fn ising_ground_phase(p: IsingParams, grid: &MomentumGrid) -> f64 {
    -0.5 * grid.k_values.iter().map(|&k| ising_quasi_energy(p.b, p.j, k)).sum::<f64>()
}
