//! φ sweeps of ground-state entanglement and trace moments.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{build_map, concurrence, eigendecompose, ground_state, reduced_density, vacuum_ground_state, EigenDecomp};
use super::{warn_if_aliased, DEFAULT_K_INT};
use crate::error::Result;
use crate::momentum::Couplings;

/// Which eigenvector stands in for the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundSelection {
    /// Even-parity level adiabatically connected to the fermion vacuum.
    Vacuum,
    /// Smallest phase in (−π, π].
    LowestPhase,
}

impl GroundSelection {
    pub fn name(&self) -> &'static str {
        match self {
            GroundSelection::Vacuum => "vacuum",
            GroundSelection::LowestPhase => "lowest-phase",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntanglementPoint {
    pub phi: f64,
    pub concurrence: f64,
    pub d_concurrence: f64,
    pub degenerate: bool,
}

/// Nearest-neighbour concurrence (sites 0, 1) of the selected ground state.
pub fn ground_concurrence(c: Couplings, n_qubits: usize, periodic: bool, selection: GroundSelection) -> Result<(f64, bool)> {
    let u = build_map(c, n_qubits, periodic)?;
    let g = match selection {
        GroundSelection::Vacuum => vacuum_ground_state(&u)?,
        GroundSelection::LowestPhase => ground_state(&eigendecompose(&u)?),
    };
    Ok((concurrence(&reduced_density(&g.state, 0)?), g.degenerate))
}

/// Concurrence along a φ grid at fixed r with its central-difference derivative.
///
/// Points are evaluated in parallel and returned in grid order; the ends use one-sided differences.
pub fn entanglement_sweep(
    r: f64,
    phi_grid: &[f64],
    n_qubits: usize,
    periodic: bool,
    selection: GroundSelection,
) -> Result<Vec<EntanglementPoint>> {
    let largest = phi_grid
        .iter()
        .map(|&p| Couplings::from_polar(r, p))
        .max_by(|a, b| a.theta.abs().max(a.chi.abs()).total_cmp(&b.theta.abs().max(b.chi.abs())));
    if let Some(c) = largest {
        warn_if_aliased(c, n_qubits, DEFAULT_K_INT);
    }
    let values: Vec<(f64, bool)> = phi_grid
        .par_iter()
        .map(|&phi| ground_concurrence(Couplings::from_polar(r, phi), n_qubits, periodic, selection))
        .collect::<Result<_>>()?;
    let c: Vec<f64> = values.iter().map(|v| v.0).collect();
    let d = grid_derivative(phi_grid, &c);
    Ok(phi_grid
        .iter()
        .zip(values)
        .zip(d)
        .map(|((&phi, (conc, degenerate)), d)| EntanglementPoint { phi, concurrence: conc, d_concurrence: d, degenerate })
        .collect())
}

/// Central differences inside the grid, one-sided at the ends.
pub fn grid_derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            (y[b] - y[a]) / (x[b] - x[a])
        })
        .collect()
}

/// `Tr(U^m) / 2^N = Σ_n e^{−imE_n} / 2^N`.
pub fn trace_moment(e: &EigenDecomp, m: u64) -> Complex64 {
    let dim = e.phases.len() as f64;
    e.phases.iter().map(|&p| Complex64::from_polar(1.0, -(m as f64) * p)).sum::<Complex64>() / dim
}
