//! Eigenphases, parity sectors and ground-state selection.

use num_complex::Complex64;

use super::{DenseUnitary, SpinState};
use crate::error::{QptError, Result};
use crate::linalg::{circular_multiset_distance, unitary_eigen, wrap_phase, CMatrix, CVector};
use crate::momentum::{vacuum_phase, Parity};

/// Phases ascending in (−π, π] with matching eigenvector columns, `U v_n = e^{−iE_n} v_n`.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub n_qubits: usize,
    pub phases: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenDecomp {
    /// Largest `‖U v − e^{−iE} v‖` over the columns.
    pub fn max_residual(&self, u: &DenseUnitary) -> f64 {
        let uv = &u.matrix * &self.vectors;
        (0..self.phases.len())
            .map(|c| {
                let lam = Complex64::from_polar(1.0, -self.phases[c]);
                (uv.column(c) - self.vectors.column(c) * lam).norm()
            })
            .fold(0.0, f64::max)
    }
}

pub fn eigendecompose(u: &DenseUnitary) -> Result<EigenDecomp> {
    let (phases, vectors) = unitary_eigen(&u.matrix).map_err(|e| match e {
        QptError::Eigen(msg) => QptError::Eigen(format!("{msg}; unitarity defect {:.3e}", u.unitarity_error())),
        other => other,
    })?;
    Ok(EigenDecomp { n_qubits: u.n_qubits, phases, vectors })
}

/// A selected ground state and its bookkeeping.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: SpinState,
    pub phase: f64,
    /// Another level lies within 1e−8 of the selected phase.
    pub degenerate: bool,
}

const DEGENERACY_TOL: f64 = 1e-8;

/// Eigenvector of the smallest phase in (−π, π]; ties go to the first column.
pub fn ground_state(e: &EigenDecomp) -> GroundState {
    let phase = e.phases[0];
    let degenerate = e.phases.len() > 1 && (e.phases[1] - phase).abs() < DEGENERACY_TOL;
    let state = SpinState { n_qubits: e.n_qubits, amplitudes: e.vectors.column(0).into_owned() };
    GroundState { state, phase, degenerate }
}

/// Orthonormal basis `(|b⟩ ± |b̄⟩)/√2` of one eigenspace of `Π σ_x`, as columns.
pub fn parity_basis(n_qubits: usize, parity: Parity) -> CMatrix {
    let dim = 1usize << n_qubits;
    let half = dim / 2;
    let all = dim - 1;
    let sign = if parity == Parity::Even { 1.0 } else { -1.0 };
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let mut q = CMatrix::zeros(dim, half);
    for b in 0..half {
        q[(b, b)] = Complex64::new(amp, 0.0);
        q[(all ^ b, b)] += Complex64::new(sign * amp, 0.0);
    }
    q
}

fn sector_block(u: &DenseUnitary, parity: Parity) -> (CMatrix, CMatrix) {
    let q = parity_basis(u.n_qubits, parity);
    // Q†UQ entry by entry: each basis vector touches only |b⟩ and its complement.
    let half = u.dim() / 2;
    let all = u.dim() - 1;
    let sign = if parity == Parity::Even { 1.0 } else { -1.0 };
    let m = &u.matrix;
    let block = CMatrix::from_fn(half, half, |a, b| {
        let (ac, bc) = (all ^ a, all ^ b);
        (m[(a, b)] + m[(a, bc)] * sign + m[(ac, b)] * sign + m[(ac, bc)]) * 0.5
    });
    (q, block)
}

/// Eigenphases of the map restricted to one spin-flip parity sector.
pub fn sector_phases(u: &DenseUnitary, parity: Parity) -> Result<Vec<f64>> {
    let (_, block) = sector_block(u, parity);
    Ok(unitary_eigen(&block)?.0)
}

/// The even-sector eigenvector continuously connected to the fermion vacuum.
///
/// Its phase is `−Σ_{pairs} arccos η(2θ, 2χ, k)` over the antiperiodic grid, which
/// stays well defined when the couplings push levels across the ±π branch cut.
pub fn vacuum_ground_state(u: &DenseUnitary) -> Result<GroundState> {
    let c = u.couplings.ok_or_else(|| QptError::InvalidInput("vacuum selection needs a map built from couplings".into()))?;
    if !u.periodic || !u.n_qubits.is_multiple_of(2) {
        return Err(QptError::InvalidInput("vacuum selection needs a periodic chain of even length".into()));
    }
    let target = wrap_phase(vacuum_phase(c, u.n_qubits)?);
    let (q, block) = sector_block(u, Parity::Even);
    let (phases, vecs) = unitary_eigen(&block)?;
    let dist = |p: f64| circular_multiset_distance(&[p], &[target]).unwrap_or(f64::INFINITY);
    let mut best = 0;
    for (i, &p) in phases.iter().enumerate() {
        if dist(p) < dist(phases[best]) {
            best = i;
        }
    }
    let degenerate =
        phases.iter().enumerate().any(|(i, &p)| i != best && circular_multiset_distance(&[p], &[phases[best]]).unwrap() < DEGENERACY_TOL);
    let amplitudes: CVector = &q * vecs.column(best);
    Ok(GroundState { state: SpinState { n_qubits: u.n_qubits, amplitudes }, phase: phases[best], degenerate })
}
