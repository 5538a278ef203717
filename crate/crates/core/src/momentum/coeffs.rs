//! Cosine-series coefficients of κ_k and the real-space term weights they imply.

use std::f64::consts::PI;

use super::{mode_eta, mode_kappa, Couplings};
use crate::error::{QptError, Result};

/// `κ_k = Σ_l a_l cos(lk)` truncated at `l_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoeffs {
    pub couplings: Couplings,
    pub a: Vec<f64>,
    pub n_quadrature: usize,
}

impl FourierCoeffs {
    pub fn l_max(&self) -> usize {
        self.a.len() - 1
    }

    /// Partial sum of the series at k.
    pub fn evaluate(&self, k: f64) -> f64 {
        self.a.iter().enumerate().map(|(l, a)| a * (l as f64 * k).cos()).sum()
    }

    /// `(a_1/s)·s^l` with `s = sinθ sinχ`.
    pub fn decay_bound(&self, l: usize) -> f64 {
        let s = self.couplings.theta.sin() * self.couplings.chi.sin();
        if self.a.len() < 2 || s == 0.0 {
            return if l == 0 { f64::INFINITY } else { 0.0 };
        }
        self.a[1] / s * s.powi(l as i32)
    }
}

/// Trapezoid cosine coefficients of κ on `n_quadrature` intervals of [0, π].
pub fn fourier_coeffs(c: Couplings, l_max: usize, n_quadrature: usize) -> Result<FourierCoeffs> {
    if n_quadrature < 8 * l_max.max(1) {
        return Err(QptError::InvalidInput(format!("n_quadrature = {n_quadrature} must be at least 8*l_max = {}", 8 * l_max.max(1))));
    }
    let n = n_quadrature;
    let mut kappa = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let k = PI * j as f64 / n as f64;
        kappa.push(mode_kappa(mode_eta(c, k))?);
    }
    let a = (0..=l_max)
        .map(|l| {
            let mut s = 0.0;
            for (j, kj) in kappa.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                s += w * kj * ((l * j) as f64 * PI / n as f64).cos();
            }
            let norm = if l == 0 { 1.0 } else { 2.0 };
            norm * s / n as f64
        })
        .collect();
    Ok(FourierCoeffs { couplings: c, a, n_quadrature })
}

/// Real-space weights of the effective Hamiltonian for bond range `range`.
///
/// `pairing_x` and `pairing_y` multiply `c†_n c†_{n+l} ∓ c_n c_{n+l}` from the ν₁ and ν₂
/// channels, `hopping` multiplies the range-l hopping from the ν₃ channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermWeight {
    pub range: usize,
    pub pairing_x: f64,
    pub pairing_y: f64,
    pub hopping: f64,
}

/// Weights for ranges 1..l_max−1.
///
/// The ν₁ and ν₂ channels carry `κ_k sin k`, whose sine coefficients are
/// `a_0 − a_2/2` at range 1 and `(a_{l−1} − a_{l+1})/2` beyond. The ν₃ channel carries
/// `κ_k (sinθ cosχ + cosθ sinχ cos k)`.
pub fn hbar_term_weights(coeffs: &FourierCoeffs) -> Vec<TermWeight> {
    let a = &coeffs.a;
    let (st, ct) = coeffs.couplings.theta.sin_cos();
    let (sx, cx) = coeffs.couplings.chi.sin_cos();
    (1..a.len().saturating_sub(1))
        .map(|l| {
            let (sine, cosine) =
                if l == 1 { (a[0] - 0.5 * a[2], a[0] + 0.5 * a[2]) } else { (0.5 * (a[l - 1] - a[l + 1]), 0.5 * (a[l - 1] + a[l + 1])) };
            TermWeight { range: l, pairing_x: ct * sx * sine, pairing_y: -st * sx * sine, hopping: st * cx * a[l] + ct * sx * cosine }
        })
        .collect()
}
