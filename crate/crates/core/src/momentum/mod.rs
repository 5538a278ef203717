//! Closed-form free-fermion solver for the kicked Ising map.
//!
//! Every momentum mode k carries `η_k = cosθ cosχ − cos k sinθ sinχ`, a quasi-energy
//! `E_k = arccos η_k` and an effective-Hamiltonian vector `κ_k γ_k`. Everything in
//! this module is a pure function of its arguments.

mod block;
mod coeffs;
mod ising;

pub use block::{
    a_hat, assembled_sector_phases, b_hat, mode_block, mode_block_oracle, pair_block_phases, vacuum_phase, ModeBlockPair, Parity,
};
pub use coeffs::{fourier_coeffs, hbar_term_weights, FourierCoeffs, TermWeight};
pub use ising::{ising_ground_phase, ising_map, ising_quasi_energy, IsingParams};

use std::f64::consts::PI;

use crate::error::{QptError, Result};

/// Default distance from η = −1 at which κ is declared singular.
pub const EPS_SING: f64 = 1e-9;
/// Below `1 − KAPPA_SERIES_WINDOW` κ is evaluated directly, above it by series.
pub const KAPPA_SERIES_WINDOW: f64 = 1e-6;
/// Default finite-difference step in φ.
pub const DEFAULT_PHI_STEP: f64 = 1e-3;

/// Field strength θ and exchange strength χ, both in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    pub theta: f64,
    pub chi: f64,
}

impl Couplings {
    pub fn new(theta: f64, chi: f64) -> Self {
        Self { theta, chi }
    }

    /// Polar form with `θ = r cos φ` and `χ = r sin φ`, so that φ = 0 is the pure-field axis.
    pub fn from_polar(r: f64, phi: f64) -> Self {
        Self { theta: r * phi.cos(), chi: r * phi.sin() }
    }

    pub fn r(&self) -> f64 {
        self.theta.hypot(self.chi)
    }

    pub fn phi(&self) -> f64 {
        self.chi.atan2(self.theta)
    }

    pub fn swapped(&self) -> Self {
        Self { theta: self.chi, chi: self.theta }
    }

    pub fn negated(&self) -> Self {
        Self { theta: -self.theta, chi: -self.chi }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { theta: s * self.theta, chi: s * self.chi }
    }
}

/// Boundary condition of the fermion modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sector {
    /// `k = 2πm/N`.
    Periodic,
    /// `k = π(2m+1)/N`, the even fermion-parity sector of a closed chain.
    Antiperiodic,
}

impl Sector {
    pub fn name(&self) -> &'static str {
        match self {
            Sector::Periodic => "periodic",
            Sector::Antiperiodic => "antiperiodic",
        }
    }
}

impl std::str::FromStr for Sector {
    type Err = QptError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Sector::Periodic),
            "antiperiodic" => Ok(Sector::Antiperiodic),
            other => Err(QptError::Config(format!("unknown grid sector '{other}' (periodic|antiperiodic)"))),
        }
    }
}

/// Momentum values in [−π, π), ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    pub n_sites: usize,
    pub sector: Sector,
    pub k_values: Vec<f64>,
}

impl MomentumGrid {
    pub fn new(n_sites: usize, sector: Sector) -> Result<Self> {
        if n_sites == 0 {
            return Err(QptError::InvalidInput("momentum grid needs at least one site".into()));
        }
        let n = n_sites as i64;
        let k_values = match sector {
            Sector::Periodic => {
                let m0 = -(n / 2);
                (0..n).map(|j| PI * ((2 * (m0 + j)) as f64 / n as f64)).collect()
            }
            Sector::Antiperiodic => {
                let m0 = -((n + 1) / 2);
                (0..n).map(|j| PI * ((2 * (m0 + j) + 1) as f64 / n as f64)).collect()
            }
        };
        Ok(Self { n_sites, sector, k_values })
    }

    pub fn periodic(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, Sector::Periodic)
    }

    pub fn antiperiodic(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, Sector::Antiperiodic)
    }
}

/// Per-mode analytic data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeData {
    pub k: f64,
    pub eta: f64,
    pub kappa: f64,
    pub gamma: [f64; 3],
    pub energy: f64,
}

/// `η_k = cosθ cosχ − cos k sinθ sinχ`, clamped to [−1, 1] against rounding.
pub fn mode_eta(c: Couplings, k: f64) -> f64 {
    let eta = c.theta.cos() * c.chi.cos() - k.cos() * c.theta.sin() * c.chi.sin();
    eta.clamp(-1.0, 1.0)
}

/// `κ = arccos η / √(1−η²)` with the default singularity margin.
pub fn mode_kappa(eta: f64) -> Result<f64> {
    mode_kappa_with(eta, EPS_SING)
}

pub fn mode_kappa_with(eta: f64, eps_sing: f64) -> Result<f64> {
    if !eta.is_finite() || eta > 1.0 + 1e-12 {
        return Err(QptError::InvalidInput(format!("eta = {eta} outside [-1, 1]")));
    }
    if eta <= -1.0 + eps_sing {
        return Err(QptError::Singularity { eta, eps: eps_sing });
    }
    if eta > 1.0 - KAPPA_SERIES_WINDOW {
        // arccos(1−x)/√(2x−x²) = 1 + x/3 + 2x²/15 + 2x³/35 + O(x⁴)
        let x = 1.0 - eta;
        return Ok(1.0 + x * (1.0 / 3.0 + x * (2.0 / 15.0 + x * (2.0 / 35.0))));
    }
    Ok(eta.acos() / ((1.0 - eta) * (1.0 + eta)).sqrt())
}

/// `γ_k = (sin k cosθ sinχ, −sin k sinθ sinχ, sinθ cosχ + cos k cosθ sinχ)`.
pub fn mode_gamma(c: Couplings, k: f64) -> [f64; 3] {
    let (st, ct) = c.theta.sin_cos();
    let (sx, cx) = c.chi.sin_cos();
    let (sk, ck) = k.sin_cos();
    [sk * ct * sx, -sk * st * sx, st * cx + ck * ct * sx]
}

/// `E_k = arccos η_k` in [0, π].
pub fn quasi_energy(c: Couplings, k: f64) -> f64 {
    mode_eta(c, k).acos()
}

pub fn mode_data(c: Couplings, k: f64) -> Result<ModeData> {
    let eta = mode_eta(c, k);
    Ok(ModeData { k, eta, kappa: mode_kappa(eta)?, gamma: mode_gamma(c, k), energy: eta.acos() })
}

/// Mode data for every k of the grid.
pub fn mode_spectrum(c: Couplings, grid: &MomentumGrid) -> Result<Vec<ModeData>> {
    grid.k_values.iter().map(|&k| mode_data(c, k)).collect()
}

/// `Ω = −Σ_k E_k` over the grid.
pub fn ground_phase(c: Couplings, grid: &MomentumGrid) -> f64 {
    -grid.k_values.iter().map(|&k| quasi_energy(c, k)).sum::<f64>()
}

/// Central first difference of Ω in φ at fixed r.
pub fn d_ground_phase(r: f64, phi: f64, grid: &MomentumGrid, h: f64) -> f64 {
    let f = |p: f64| ground_phase(Couplings::from_polar(r, p), grid);
    (f(phi + h) - f(phi - h)) / (2.0 * h)
}

/// Central second difference of Ω in φ at fixed r.
pub fn d2_ground_phase(r: f64, phi: f64, grid: &MomentumGrid, h: f64) -> f64 {
    let f = |p: f64| ground_phase(Couplings::from_polar(r, p), grid);
    (f(phi + h) - 2.0 * f(phi) + f(phi - h)) / (h * h)
}

/// Smallest single-mode quasi-energy on the grid.
pub fn spectral_gap(c: Couplings, grid: &MomentumGrid) -> f64 {
    grid.k_values.iter().map(|&k| quasi_energy(c, k)).fold(f64::INFINITY, f64::min)
}
