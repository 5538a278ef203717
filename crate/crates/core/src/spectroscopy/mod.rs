//! Simulated spectroscopic signals and their Fourier analysis.
//!
//! Two signals are produced: return probabilities `|⟨i|U^m|ψ⟩|²`, whose spectrum holds
//! level differences, and trace moments `Tr(U^m)/2^N`, whose spectrum holds the levels.
//! Transforms use `X_j = Σ_m x_m e^{−iω_j m}`, so `e^{−imE}` peaks at ω = −E.

mod reconstruct;

pub use reconstruct::{
    gauge_aligned_rms, reconstruct_from_traces, reconstruct_levels, Gauge, LevelInit, ReconstructOptions, ReconstructedSpectrum,
    TraceOptions,
};

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::dense::{eigendecompose, DenseUnitary, EigenDecomp, SpinState, DEFAULT_K_INT};
use crate::error::{QptError, Result};
use crate::linalg::wrap_phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    ReturnProbability,
    TraceReal,
    TraceImag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMeta {
    pub n_qubits: usize,
    pub theta: f64,
    pub chi: f64,
    pub basis_index: Option<usize>,
    pub initial_state: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub kind: SeriesKind,
    pub samples: Vec<f64>,
    pub meta: SeriesMeta,
}

/// DFT of a series, bins in index order with frequencies mapped to (−π, π].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub frequencies: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    pub magnitudes: Vec<f64>,
}

impl PowerSpectrum {
    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    /// Bin spacing 2π/M.
    pub fn bin_width(&self) -> f64 {
        2.0 * PI / self.len() as f64
    }

    fn from_coefficients(coefficients: Vec<Complex64>) -> Self {
        let m = coefficients.len();
        let frequencies = (0..m).map(|j| bin_frequency(j, m)).collect();
        let magnitudes = coefficients.iter().map(|z| z.norm()).collect();
        Self { frequencies, coefficients, magnitudes }
    }
}

/// `2πj/M` mapped to (−π, π].
pub fn bin_frequency(j: usize, m: usize) -> f64 {
    wrap_phase(2.0 * PI * j as f64 / m as f64)
}

/// Spectral peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub frequency: f64,
    pub magnitude: f64,
    pub bin: usize,
}

/// Peaks in descending magnitude.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakList {
    pub peaks: Vec<Peak>,
}

/// Checks `max(|θ|, |χ|) < k_int / N`.
pub fn check_aliasing(theta: f64, chi: f64, n_qubits: usize, k_int: f64) -> Result<()> {
    let max_coupling = theta.abs().max(chi.abs());
    let bound = k_int / n_qubits as f64;
    if max_coupling >= bound {
        return Err(QptError::Aliasing { max_coupling, bound, n: n_qubits, k_int });
    }
    Ok(())
}

/// Complex amplitudes `⟨i|φ_n⟩⟨φ_n|ψ⟩` for every eigenvector.
pub fn overlap_products(e: &EigenDecomp, psi0: &SpinState, basis_index: usize) -> Vec<Complex64> {
    (0..e.phases.len())
        .map(|n| {
            let col = e.vectors.column(n);
            col[basis_index] * col.dotc(&psi0.amplitudes)
        })
        .collect()
}

/// Return probabilities `|⟨i|U^m|ψ₀⟩|²` for m = 0..M−1 from the eigen-expansion.
pub fn simulate_series(u: &DenseUnitary, psi0: &SpinState, basis_index: usize, m: usize, k_int: f64) -> Result<TimeSeries> {
    if let Some(c) = u.couplings {
        check_aliasing(c.theta, c.chi, u.n_qubits, k_int)?;
    }
    let e = eigendecompose(u)?;
    simulate_series_from(&e, u, psi0, basis_index, m)
}

/// As [`simulate_series`] with the default aliasing constant.
pub fn simulate_series_default(u: &DenseUnitary, psi0: &SpinState, basis_index: usize, m: usize) -> Result<TimeSeries> {
    simulate_series(u, psi0, basis_index, m, DEFAULT_K_INT)
}

/// Return probabilities from an existing decomposition of `u`.
pub fn simulate_series_from(e: &EigenDecomp, u: &DenseUnitary, psi0: &SpinState, basis_index: usize, m: usize) -> Result<TimeSeries> {
    if m < 2 {
        return Err(QptError::InvalidInput(format!("need at least 2 samples, got {m}")));
    }
    if basis_index >= u.dim() || psi0.n_qubits != u.n_qubits {
        return Err(QptError::InvalidInput(format!("basis index {basis_index} or state size does not fit {} qubits", u.n_qubits)));
    }
    let amps = overlap_products(e, psi0, basis_index);
    let samples = amplitude_series(&e.phases, &amps, m).iter().map(|z| z.norm_sqr().clamp(0.0, 1.0)).collect();
    let c = u.couplings.unwrap_or(crate::momentum::Couplings::new(f64::NAN, f64::NAN));
    Ok(TimeSeries {
        kind: SeriesKind::ReturnProbability,
        samples,
        meta: SeriesMeta {
            n_qubits: u.n_qubits,
            theta: c.theta,
            chi: c.chi,
            basis_index: Some(basis_index),
            initial_state: "custom".into(),
        },
    })
}

/// `s_m = Σ_n c_n e^{−imE_n}`.
pub(crate) fn amplitude_series(levels: &[f64], amps: &[Complex64], m: usize) -> Vec<Complex64> {
    let steps: Vec<Complex64> = levels.iter().map(|&e| Complex64::from_polar(1.0, -e)).collect();
    let mut current = amps.to_vec();
    let mut out = Vec::with_capacity(m);
    for step in 0..m {
        if step > 0 && step % 64 == 0 {
            // Re-anchor the recurrence to keep rounding from accumulating.
            for (cur, (&a, &e)) in current.iter_mut().zip(amps.iter().zip(levels)) {
                *cur = a * Complex64::from_polar(1.0, -(step as f64) * e);
            }
        }
        out.push(current.iter().sum());
        for (cur, s) in current.iter_mut().zip(&steps) {
            *cur *= s;
        }
    }
    out
}

fn fft_forward(mut buf: Vec<Complex64>) -> Vec<Complex64> {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Forward DFT of a real series.
pub fn dft(series: &TimeSeries) -> Result<PowerSpectrum> {
    dft_real(&series.samples)
}

pub fn dft_real(samples: &[f64]) -> Result<PowerSpectrum> {
    dft_complex(&samples.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>())
}

pub fn dft_complex(samples: &[Complex64]) -> Result<PowerSpectrum> {
    if samples.len() < 2 {
        return Err(QptError::InvalidInput(format!("need at least 2 samples, got {}", samples.len())));
    }
    Ok(PowerSpectrum::from_coefficients(fft_forward(samples.to_vec())))
}

/// Inverse of [`dft_complex`].
pub fn inverse_dft(spec: &PowerSpectrum) -> Vec<Complex64> {
    let m = spec.coefficients.len();
    let mut buf = spec.coefficients.clone();
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    buf.iter().map(|z| z / m as f64).collect()
}

/// Periodic Hann window `0.5 − 0.5 cos(2πm/M)`.
pub fn hann_window(m: usize) -> Vec<f64> {
    (0..m).map(|j| 0.5 - 0.5 * (2.0 * PI * j as f64 / m as f64).cos()).collect()
}

/// DFT of a Hann-windowed series zero-padded to `pad·M` points, normalized so a unit
/// tone of any frequency peaks at its amplitude.
pub fn dft_hann(samples: &[Complex64], pad: usize) -> Result<PowerSpectrum> {
    if samples.len() < 2 || pad == 0 {
        return Err(QptError::InvalidInput("windowed DFT needs at least 2 samples and pad >= 1".into()));
    }
    let w = hann_window(samples.len());
    let norm: f64 = w.iter().sum();
    let mut buf = vec![Complex64::new(0.0, 0.0); samples.len() * pad];
    for (j, (x, wj)) in samples.iter().zip(&w).enumerate() {
        buf[j] = x * (wj / norm);
    }
    Ok(PowerSpectrum::from_coefficients(fft_forward(buf)))
}

/// Local maxima above `threshold_rel · max`, taken greedily by magnitude with a
/// minimum circular separation.
pub fn detect_peaks(spec: &PowerSpectrum, threshold_rel: f64, min_separation: f64) -> Result<PeakList> {
    if !(threshold_rel > 0.0 && threshold_rel < 1.0) {
        return Err(QptError::InvalidInput(format!("threshold_rel = {threshold_rel} must lie in (0, 1)")));
    }
    let m = spec.len();
    if m == 0 {
        return Ok(PeakList::default());
    }
    let top = spec.magnitudes.iter().cloned().fold(0.0, f64::max);
    let floor = threshold_rel * top;
    let mut cands: Vec<Peak> = (0..m)
        .filter(|&j| {
            let v = spec.magnitudes[j];
            let l = spec.magnitudes[(j + m - 1) % m];
            let r = spec.magnitudes[(j + 1) % m];
            v >= floor && v > 0.0 && (m < 3 || (v >= l && v > r) || (v > l && v >= r))
        })
        .map(|j| Peak { frequency: spec.frequencies[j], magnitude: spec.magnitudes[j], bin: j })
        .collect();
    cands.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.bin.cmp(&b.bin)));
    let mut peaks: Vec<Peak> = Vec::new();
    for c in cands {
        if peaks.iter().all(|p| wrap_phase(p.frequency - c.frequency).abs() >= min_separation) {
            peaks.push(c);
        }
    }
    Ok(PeakList { peaks })
}

/// Forward model: DFT of `|Σ_n ⟨i|φ_n⟩⟨φ_n|ψ⟩ e^{−imE_n}|²` for m = 0..M−1.
pub fn predicted_spectrum(levels: &[f64], overlaps_i: &[Complex64], overlaps_psi: &[Complex64], m: usize) -> Result<PowerSpectrum> {
    if levels.len() != overlaps_i.len() || levels.len() != overlaps_psi.len() {
        return Err(QptError::InvalidInput("levels and overlap lists differ in length".into()));
    }
    let amps: Vec<Complex64> = overlaps_i.iter().zip(overlaps_psi).map(|(a, b)| a * b).collect();
    predicted_from_amplitudes(levels, &amps, m)
}

pub(crate) fn predicted_from_amplitudes(levels: &[f64], amps: &[Complex64], m: usize) -> Result<PowerSpectrum> {
    let x: Vec<f64> = amplitude_series(levels, amps, m).iter().map(|z| z.norm_sqr()).collect();
    dft_real(&x)
}

/// Real and imaginary channels of `Tr(U^m)/2^N`.
pub fn controlled_u_series(e: &EigenDecomp, m: usize, meta: SeriesMeta) -> Result<(TimeSeries, TimeSeries)> {
    if m < 2 {
        return Err(QptError::InvalidInput(format!("need at least 2 samples, got {m}")));
    }
    let t: Vec<Complex64> = (0..m as u64).map(|k| crate::dense::trace_moment(e, k)).collect();
    let meta = SeriesMeta { basis_index: None, ..meta };
    Ok((
        TimeSeries { kind: SeriesKind::TraceReal, samples: t.iter().map(|z| z.re).collect(), meta: meta.clone() },
        TimeSeries { kind: SeriesKind::TraceImag, samples: t.iter().map(|z| z.im).collect(), meta },
    ))
}

#[cfg(test)]
mod tests;
