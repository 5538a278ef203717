//! Exact 2^N simulation of the kicked Ising map.
//!
//! Basis index bit `N−1−s` holds site s, so site 0 is the most significant bit.
//! Bit value 0 is spin up (σ_z = +1).

mod eigen;
mod state;
mod sweep;

pub use eigen::{eigendecompose, ground_state, parity_basis, sector_phases, vacuum_ground_state, EigenDecomp, GroundState};
pub use state::{concurrence, reduced_density, SpinState, TwoSiteDensity};
pub use sweep::{entanglement_sweep, grid_derivative, ground_concurrence, trace_moment, EntanglementPoint, GroundSelection};

use num_complex::Complex64;

use crate::error::{QptError, Result};
use crate::linalg::{unitarity_defect, CMatrix};
use crate::momentum::Couplings;

/// Largest chain handled densely (a 4096×4096 complex matrix).
pub const MAX_QUBITS: usize = 12;
/// Default aliasing constant in `max(|θ|, |χ|) < k_int / N`.
pub const DEFAULT_K_INT: f64 = 1.0;

/// A 2^N × 2^N unitary together with how it was built.
#[derive(Debug, Clone)]
pub struct DenseUnitary {
    pub n_qubits: usize,
    pub matrix: CMatrix,
    /// Source couplings when the matrix is a map instance.
    pub couplings: Option<Couplings>,
    pub periodic: bool,
}

impl DenseUnitary {
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        check_capacity(n_qubits, 1)?;
        Ok(Self { n_qubits, matrix: CMatrix::identity(1 << n_qubits, 1 << n_qubits), couplings: None, periodic: true })
    }

    /// `max |U†U − I|`, or for N > 8 the same measure on eight fixed columns.
    pub fn unitarity_error(&self) -> f64 {
        if self.n_qubits <= 8 {
            return unitarity_defect(&self.matrix);
        }
        let d = self.dim();
        let cols: Vec<usize> = (0..8).map(|j| (j * 2_654_435_761usize) % d).collect();
        let mut worst: f64 = 0.0;
        for &a in &cols {
            let ca = self.matrix.column(a);
            for &b in &cols {
                let z = ca.dotc(&self.matrix.column(b));
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((z - Complex64::new(want, 0.0)).norm());
            }
        }
        worst
    }
}

pub(crate) fn check_capacity(n_qubits: usize, min: usize) -> Result<()> {
    if n_qubits > MAX_QUBITS {
        return Err(QptError::Capacity { n: n_qubits, max: MAX_QUBITS });
    }
    if n_qubits < min {
        return Err(QptError::InvalidInput(format!("need at least {min} qubits, got {n_qubits}")));
    }
    Ok(())
}

/// `Σ_n s_n s_{n+1}` for one basis string.
pub fn bond_sum(index: usize, n_qubits: usize, periodic: bool) -> i32 {
    let spin = |s: usize| if (index >> (n_qubits - 1 - s)) & 1 == 0 { 1 } else { -1 };
    let bonds = if periodic { n_qubits } else { n_qubits - 1 };
    (0..bonds).map(|s| spin(s) * spin((s + 1) % n_qubits)).sum()
}

/// Diagonal of the exchange layer, `exp(−iχ Σ s_n s_{n+1})`.
///
/// With `periodic` the bond (N−1, 0) is included, so N = 2 counts its single bond twice.
pub fn zz_diagonal(chi: f64, n_qubits: usize, periodic: bool) -> Vec<Complex64> {
    (0..1usize << n_qubits).map(|i| Complex64::from_polar(1.0, -chi * bond_sum(i, n_qubits, periodic) as f64)).collect()
}

pub fn build_zz_layer(chi: f64, n_qubits: usize, periodic: bool) -> Result<DenseUnitary> {
    check_capacity(n_qubits, 2)?;
    let diag = nalgebra::DVector::from_vec(zz_diagonal(chi, n_qubits, periodic));
    Ok(DenseUnitary { n_qubits, matrix: CMatrix::from_diagonal(&diag), couplings: Some(Couplings::new(0.0, chi)), periodic })
}

/// N-fold tensor power of `exp(−iθσ_x)`.
pub fn build_x_layer(theta: f64, n_qubits: usize) -> Result<DenseUnitary> {
    check_capacity(n_qubits, 1)?;
    let (s, c) = theta.sin_cos();
    let single =
        CMatrix::from_row_slice(2, 2, &[Complex64::new(c, 0.0), Complex64::new(0.0, -s), Complex64::new(0.0, -s), Complex64::new(c, 0.0)]);
    let mut m = single.clone();
    for _ in 1..n_qubits {
        m = m.kronecker(&single);
    }
    Ok(DenseUnitary { n_qubits, matrix: m, couplings: Some(Couplings::new(theta, 0.0)), periodic: true })
}

/// `U = ZZ(χ) · X(θ)`: the field layer acts on the state first.
pub fn build_map(c: Couplings, n_qubits: usize, periodic: bool) -> Result<DenseUnitary> {
    check_capacity(n_qubits, 2)?;
    let mut m = build_x_layer(c.theta, n_qubits)?.matrix;
    for (r, z) in zz_diagonal(c.chi, n_qubits, periodic).into_iter().enumerate() {
        for v in m.row_mut(r).iter_mut() {
            *v *= z;
        }
    }
    Ok(DenseUnitary { n_qubits, matrix: m, couplings: Some(c), periodic })
}

/// Logs a warning when the couplings break `max(|θ|, |χ|) < k_int / N`.
pub fn warn_if_aliased(c: Couplings, n_qubits: usize, k_int: f64) -> bool {
    let m = c.theta.abs().max(c.chi.abs());
    let bound = k_int / n_qubits as f64;
    if m >= bound {
        log::warn!("aliasing bound exceeded: max(|theta|,|chi|) = {m:.4} >= k_int/N = {bound:.4}; quasi-energies may wrap");
        true
    } else {
        false
    }
}
