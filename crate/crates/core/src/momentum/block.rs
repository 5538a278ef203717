//! Two-mode (k, −k) blocks and many-body phases assembled from them.
//!
//! Basis order inside a block: |0⟩, C_k†|0⟩, C_{−k}†|0⟩, C_k†C_{−k}†|0⟩.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use super::{mode_eta, mode_gamma, mode_kappa, quasi_energy, Couplings, MomentumGrid, Sector};
use crate::error::{QptError, Result};
use crate::linalg::{expm_hermitian, unitary_eigen, wrap_phase, CMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Pair-creation matrix C_k†C_{−k}† and its partner C_kC_{−k}.
fn pair_ops() -> (CMatrix, CMatrix) {
    let mut create = CMatrix::zeros(4, 4);
    create[(3, 0)] = ONE;
    let mut annihilate = CMatrix::zeros(4, 4);
    annihilate[(0, 3)] = -ONE;
    (create, annihilate)
}

/// The three pair-space generators ν₁, ν₂, ν₃.
pub(crate) fn nu_matrices() -> [CMatrix; 3] {
    let (p, a) = pair_ops();
    let nu1 = (&p + &a) * (-I);
    let nu2 = &a - &p;
    let nu3 = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-ONE, ZERO, ZERO, ONE]));
    [nu1, nu2, nu3]
}

fn number_sum() -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ZERO, ONE, ONE, Complex64::new(2.0, 0.0)]))
}

/// Generator of the exchange step, `Â = χ(cos k (n_k + n_{−k}) + sin k ν₁)`.
pub fn a_hat(chi: f64, k: f64) -> CMatrix {
    let [nu1, _, _] = nu_matrices();
    (number_sum() * Complex64::new(k.cos(), 0.0) + nu1 * Complex64::new(k.sin(), 0.0)) * Complex64::new(chi, 0.0)
}

/// Generator of the field step, `B̂ = θ ν₃`.
pub fn b_hat(theta: f64) -> CMatrix {
    let [_, _, nu3] = nu_matrices();
    nu3 * Complex64::new(theta, 0.0)
}

/// Composed block `e^{−iÂ} e^{−iB̂}`.
pub fn mode_block(c: Couplings, k: f64) -> Result<CMatrix> {
    Ok(expm_hermitian(&a_hat(c.chi, k), 1.0)? * expm_hermitian(&b_hat(c.theta), 1.0)?)
}

/// Output of [`mode_block_oracle`].
#[derive(Debug, Clone)]
pub struct ModeBlockPair {
    pub composed: CMatrix,
    pub closed_form: CMatrix,
}

impl ModeBlockPair {
    pub fn max_entry_difference(&self) -> f64 {
        crate::linalg::max_abs_diff(&self.composed, &self.closed_form)
    }
}

/// The composed block next to its closed form `e^{−iχ cos k} e^{−iκ γ·ν}`.
pub fn mode_block_oracle(c: Couplings, k: f64) -> ModeBlockPair {
    let composed = mode_block(c, k).expect("4x4 Hermitian eigensolve");
    let nu = nu_matrices();
    let g = mode_gamma(c, k);
    let gamma_nu = &nu[0] * Complex64::new(g[0], 0.0) + &nu[1] * Complex64::new(g[1], 0.0) + &nu[2] * Complex64::new(g[2], 0.0);
    let eta = mode_eta(c, k);
    let rotation = match mode_kappa(eta) {
        Ok(kappa) => expm_hermitian(&gamma_nu, kappa).expect("4x4 Hermitian eigensolve"),
        // At the quasi-energy π boundary κ diverges while |γ| → 0; the rotation tends to
        // −1 on the paired subspace for any direction of γ.
        Err(_) => CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-ONE, ONE, ONE, -ONE])),
    };
    let closed_form = rotation * Complex64::from_polar(1.0, -c.chi * k.cos());
    ModeBlockPair { composed, closed_form }
}

/// Phases of one (k, −k) pair of the full chain.
///
/// The chain map restricted to a pair is the composed block at doubled couplings,
/// because each of the two momenta contributes its own copy of the pair generator.
/// Returns `(paired_low, paired_high, unpaired)`: the two eigenphases on the
/// {|0⟩, |k,−k⟩} subspace and the shared phase of the two singly occupied states.
pub fn pair_block_phases(c: Couplings, k: f64) -> Result<(f64, f64, f64)> {
    let block = mode_block(c.scaled(2.0), k)?;
    let unpaired = -block[(1, 1)].arg();
    let sub = DMatrix::from_row_slice(2, 2, &[block[(0, 0)], block[(0, 3)], block[(3, 0)], block[(3, 3)]]);
    let (ph, _) = unitary_eigen(&sub)?;
    Ok((ph[0], ph[1], unpaired))
}

/// Fermion-parity sector of the spin-flip operator Π σ_x.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// All 2^{N−1} many-body phases of one parity sector, wrapped to (−π, π] and sorted.
///
/// Even parity uses the antiperiodic grid and an even number of singly occupied pairs.
/// Odd parity uses the periodic grid, whose k = 0 and k = π modes are unpaired, with an
/// odd total fermion number.
pub fn assembled_sector_phases(c: Couplings, n_sites: usize, parity: Parity) -> Result<Vec<f64>> {
    if n_sites < 2 || !n_sites.is_multiple_of(2) {
        return Err(QptError::InvalidInput(format!("sector assembly needs an even chain length, got {n_sites}")));
    }
    // Each option: (phase, fermion number).
    let mut factors: Vec<Vec<(f64, u32)>> = Vec::new();
    match parity {
        Parity::Even => {
            let grid = MomentumGrid::new(n_sites, Sector::Antiperiodic)?;
            for &k in grid.k_values.iter().filter(|&&k| k > 0.0) {
                factors.push(pair_options(c, k)?);
            }
        }
        Parity::Odd => {
            let grid = MomentumGrid::new(n_sites, Sector::Periodic)?;
            for &k in grid.k_values.iter().filter(|&&k| k > 0.0) {
                factors.push(pair_options(c, k)?);
            }
            for k in [0.0, PI] {
                // A lone mode: C†C picks up 2χ cos k from the exchange step and the field
                // step shifts empty and filled by ∓θ.
                factors.push(vec![(-c.theta, 0), (2.0 * c.chi * k.cos() + c.theta, 1)]);
            }
        }
    }
    let want_odd = parity == Parity::Odd;
    let mut states: Vec<(f64, u32)> = vec![(0.0, 0)];
    for f in &factors {
        let mut next = Vec::with_capacity(states.len() * f.len());
        for &(p, n) in &states {
            for &(q, m) in f {
                next.push((p + q, n + m));
            }
        }
        states = next;
    }
    let mut phases: Vec<f64> = states.into_iter().filter(|&(_, n)| (n % 2 == 1) == want_odd).map(|(p, _)| wrap_phase(p)).collect();
    phases.sort_by(f64::total_cmp);
    Ok(phases)
}

fn pair_options(c: Couplings, k: f64) -> Result<Vec<(f64, u32)>> {
    let (lo, hi, single) = pair_block_phases(c, k)?;
    Ok(vec![(lo, 0), (hi, 0), (single, 1), (single, 1)])
}

/// Phase of the fermion vacuum: every antiperiodic pair in its lower paired state.
///
/// Equals `−Σ_{pairs} arccos η(2θ, 2χ, k)`; the exchange shifts `2χ cos k` cancel across the grid.
pub fn vacuum_phase(c: Couplings, n_sites: usize) -> Result<f64> {
    if n_sites < 2 || !n_sites.is_multiple_of(2) {
        return Err(QptError::InvalidInput(format!("vacuum phase needs an even chain length, got {n_sites}")));
    }
    let grid = MomentumGrid::new(n_sites, Sector::Antiperiodic)?;
    let c2 = c.scaled(2.0);
    Ok(-grid.k_values.iter().filter(|&&k| k > 0.0).map(|&k| quasi_energy(c2, k)).sum::<f64>())
}
