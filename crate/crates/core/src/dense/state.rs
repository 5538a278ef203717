//! Spin states, two-site marginals and concurrence.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::check_capacity;
use crate::error::{QptError, Result};
use crate::linalg::{hermitian_eigen, CMatrix, CVector};

#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    pub n_qubits: usize,
    pub amplitudes: CVector,
}

impl SpinState {
    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_capacity(n_qubits, 1)?;
        if amplitudes.len() != 1 << n_qubits {
            return Err(QptError::InvalidInput(format!("{} amplitudes given for {n_qubits} qubits", amplitudes.len())));
        }
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(QptError::InvalidInput(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { n_qubits, amplitudes: v })
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_capacity(n_qubits, 1)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(QptError::InvalidInput(format!("basis index {index} out of range for {n_qubits} qubits")));
        }
        let mut v = CVector::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes: v })
    }

    /// Equal-weight superposition of every basis string.
    pub fn uniform(n_qubits: usize) -> Result<Self> {
        check_capacity(n_qubits, 1)?;
        let dim = 1usize << n_qubits;
        let a = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(Self { n_qubits, amplitudes: CVector::from_element(dim, a) })
    }

    pub fn ghz(n_qubits: usize) -> Result<Self> {
        check_capacity(n_qubits, 1)?;
        let dim = 1usize << n_qubits;
        let mut v = CVector::zeros(dim);
        v[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        v[dim - 1] = v[0];
        Ok(Self { n_qubits, amplitudes: v })
    }

    /// Haar-like random state from complex Gaussian amplitudes.
    pub fn random(n_qubits: usize, seed: u64) -> Result<Self> {
        check_capacity(n_qubits, 1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 1usize << n_qubits;
        let v = CVector::from_fn(dim, |_, _| Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)));
        let n = v.norm();
        Ok(Self { n_qubits, amplitudes: v.unscale(n) })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }
}

/// Reduced density matrix of a nearest-neighbour pair, basis |s_a s_b⟩ with s_a most significant.
///
/// `factor` is an optional 4×m matrix B with ρ = B B†; concurrence uses it to avoid taking
/// square roots of rounding-level eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSiteDensity {
    pub matrix: CMatrix,
    pub factor: Option<CMatrix>,
}

impl TwoSiteDensity {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != 4 || matrix.ncols() != 4 {
            return Err(QptError::InvalidInput("two-site density must be 4x4".into()));
        }
        Ok(Self { matrix, factor: None })
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// A factor B with ρ = B B†, at most 4 columns.
    fn factorize(&self) -> CMatrix {
        if let Some(b) = &self.factor {
            return b.clone();
        }
        let herm = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        let Ok((vals, vecs)) = hermitian_eigen(&herm) else { return CMatrix::zeros(4, 1) };
        let top = vals.iter().cloned().fold(0.0, f64::max);
        let mut b = vecs;
        for (k, &v) in vals.iter().enumerate() {
            // Eigenvalues at rounding level are exact zeros of a rank-deficient state.
            let w = if v > 1e-13 * top.max(1e-300) { v.sqrt() } else { 0.0 };
            b.column_mut(k).scale_mut(w);
        }
        b
    }
}

/// Partial trace onto sites `site` and `site+1 mod N`.
pub fn reduced_density(s: &SpinState, site: usize) -> Result<TwoSiteDensity> {
    let n = s.n_qubits;
    if n < 2 || site >= n {
        return Err(QptError::InvalidInput(format!("site {site} invalid for {n} qubits")));
    }
    let bit_a = 1usize << (n - 1 - site);
    let bit_b = 1usize << (n - 1 - (site + 1) % n);
    let mask = bit_a | bit_b;
    let offsets = [0, bit_b, bit_a, bit_a | bit_b];
    let rests: Vec<usize> = (0..1usize << n).filter(|i| i & mask == 0).collect();
    let b = CMatrix::from_fn(4, rests.len(), |j, r| s.amplitudes[rests[r] | offsets[j]]);
    let matrix = &b * b.adjoint();
    // Compress the factor to 4 columns: B† = QR gives ρ = R†R.
    let factor = if b.ncols() > 4 { b.adjoint().qr().r().adjoint() } else { b };
    Ok(TwoSiteDensity { matrix, factor: Some(factor) })
}

/// Wootters concurrence `max(0, λ₁ − λ₂ − λ₃ − λ₄)`.
///
/// With ρ = B B† the λ are the singular values of the symmetric matrix `Bᵀ (σ_y⊗σ_y) B`,
/// which equal the square roots of the eigenvalues of `ρ (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)`.
pub fn concurrence(rho: &TwoSiteDensity) -> f64 {
    let b = rho.factorize();
    // σ_y ⊗ σ_y in the computational basis is the antidiagonal (−1, 1, 1, −1).
    let flip = CMatrix::from_fn(4, 4, |i, j| {
        if i + j == 3 {
            Complex64::new(if i == 0 || i == 3 { -1.0 } else { 1.0 }, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let tau = b.transpose() * flip * &b;
    let mut lam: Vec<f64> = tau.singular_values().iter().copied().collect();
    lam.resize(4.max(lam.len()), 0.0);
    lam.sort_by(|a, b| b.total_cmp(a));
    (lam[0] - lam[1] - lam[2] - lam[3]).clamp(0.0, 1.0)
}
