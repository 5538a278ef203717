//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{QptError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 0;

/// Wrap an angle into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = h.nrows();
    let eig = SymmetricEigen::try_new(h.clone(), EIG_EPS, EIG_MAX_ITER).ok_or_else(|| {
        QptError::Eigen(format!(
            "Hermitian eigensolver failed on a {n}x{n} matrix (max |entry| = {:.3e}, hermiticity defect = {:.3e})",
            h.iter().map(|z| z.norm()).fold(0.0, f64::max),
            (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max),
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// exp(−i t H) for Hermitian H.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let (vals, vecs) = hermitian_eigen(h)?;
    let n = h.nrows();
    let mut scaled = vecs.clone();
    for (c, &lam) in vals.iter().enumerate() {
        let f = Complex64::from_polar(1.0, -t * lam);
        for r in 0..n {
            scaled[(r, c)] *= f;
        }
    }
    Ok(scaled * vecs.adjoint())
}

/// Largest entry modulus of `U†U − I`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let p = u.adjoint() * u;
    max_abs_diff(&p, &CMatrix::identity(u.nrows(), u.ncols()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Eigenphases and eigenvectors of a unitary matrix with `U v = e^{−iE} v`.
///
/// The Hermitian part `(U+U†)/2` is diagonalized first. Clusters of nearly equal
/// cosines are split by diagonalizing `(U−U†)/(2i)` inside the cluster. Phases
/// are read from `v†Uv` and returned ascending in (−π, π].
pub fn unitary_eigen(u: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = u.nrows();
    let ud = u.adjoint();
    let hc = (u + &ud).scale(0.5);
    let hs = (u - &ud) * Complex64::new(0.0, -0.5);
    let (cvals, cvecs) = hermitian_eigen(&hc)?;

    const CLUSTER_TOL: f64 = 1e-6;
    let mut vectors = CMatrix::zeros(n, n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && cvals[end] - cvals[end - 1] < CLUSTER_TOL {
            end += 1;
        }
        let q = cvecs.columns(start, end - start).into_owned();
        if end - start == 1 {
            vectors.set_column(start, &q.column(0));
        } else {
            let hs_q = q.adjoint() * &hs * &q;
            let hs_q = (&hs_q + hs_q.adjoint()).scale(0.5);
            let (_, w) = hermitian_eigen(&hs_q)?;
            let block = q * w;
            for j in 0..(end - start) {
                vectors.set_column(start + j, &block.column(j));
            }
        }
        start = end;
    }

    let uv = u * &vectors;
    let mut phases = Vec::with_capacity(n);
    for c in 0..n {
        let z = vectors.column(c).dotc(&uv.column(c));
        phases.push(wrap_phase(-z.arg()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
    let sorted_phases = order.iter().map(|&i| phases[i]).collect();
    let sorted_vectors = CMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    Ok((sorted_phases, sorted_vectors))
}

/// Largest per-element distance between two multisets of angles, compared on the circle.
///
/// Both sets are cut at the midpoint of the widest empty arc of their union so that
/// no element sits next to the cut, then sorted and matched in order.
pub fn circular_multiset_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    if a.is_empty() {
        return Some(0.0);
    }
    let mut all: Vec<f64> = a.iter().chain(b).map(|&x| wrap_phase(x)).collect();
    all.sort_by(f64::total_cmp);
    let mut cut = all[0] - (all[0] + 2.0 * PI - all[all.len() - 1]) / 2.0;
    let mut widest = all[0] + 2.0 * PI - all[all.len() - 1];
    for w in all.windows(2) {
        if w[1] - w[0] > widest {
            widest = w[1] - w[0];
            cut = 0.5 * (w[0] + w[1]);
        }
    }
    let shift = |v: &[f64]| {
        let mut s: Vec<f64> = v.iter().map(|&x| (x - cut).rem_euclid(2.0 * PI)).collect();
        s.sort_by(f64::total_cmp);
        s
    };
    let (sa, sb) = (shift(a), shift(b));
    Some(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}
