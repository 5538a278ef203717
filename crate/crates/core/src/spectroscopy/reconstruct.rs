//! Level reconstruction from return-probability spectra and from trace moments.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::{detect_peaks, dft_hann, predicted_from_amplitudes, Peak, PowerSpectrum, TimeSeries};
use crate::error::{QptError, Result};
use crate::linalg::{hermitian_eigen, wrap_phase, CMatrix};
use crate::numopt::{lm_minimize, numeric_jacobian, FnProblem, LmSettings, LmStatus};
use nalgebra::{DMatrix, DVector};

/// How reconstructed levels are pinned down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// Lowest level shifted to 0; `sign_flipped` records whether the fit was mirrored so
    /// that the strongest transition out of the most populated level is positive.
    Relative { sign_flipped: bool },
    /// Levels read directly from trace moments, defined modulo 2π.
    Absolute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedSpectrum {
    /// Ascending, degenerate levels repeated.
    pub levels: Vec<f64>,
    pub weights: Vec<f64>,
    pub gauge: Gauge,
    pub residual_norm: Option<f64>,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// Starting levels for the fit.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelInit {
    /// Largest positive-frequency peaks read as gaps above the lowest level.
    Auto,
    /// Explicit levels; repeated values are fitted as one degenerate level.
    Levels(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ReconstructOptions {
    pub m_levels: usize,
    pub init: LevelInit,
    /// Known amplitudes `⟨i|φ_n⟩⟨φ_n|ψ⟩`, one per distinct level; fitted when absent.
    pub overlaps: Option<Vec<Complex64>>,
    /// Minimizer defaults, except for a budget of 1000 iterations.
    pub settings: LmSettings,
    /// Initial levels closer than this are merged into one degenerate level.
    pub merge_tol: f64,
}

impl ReconstructOptions {
    pub fn new(m_levels: usize) -> Self {
        Self {
            m_levels,
            init: LevelInit::Auto,
            overlaps: None,
            settings: LmSettings { max_iter: 1000, ..LmSettings::default() },
            merge_tol: 1e-9,
        }
    }
}

/// Distinct levels with multiplicities, ascending, and the group of each input level.
fn collapse(levels: &[f64], tol: f64) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
    let mut out: Vec<f64> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    let mut group = vec![0; levels.len()];
    for idx in order {
        let e = levels[idx];
        match out.last() {
            Some(&last) if (e - last).abs() <= tol => *mult.last_mut().unwrap() += 1,
            _ => {
                out.push(e);
                mult.push(1);
            }
        }
        group[idx] = out.len() - 1;
    }
    (out, mult, group)
}

/// Sub-bin peak position from the complex neighbours (Jacobsen interpolation).
///
/// Keeps initial levels off the bin grid, where `|X|` has kinks at exact zeros.
fn refine_peak(spec: &PowerSpectrum, p: &Peak) -> f64 {
    let m = spec.len();
    let x = &spec.coefficients;
    let (lo, mid, hi) = (x[(p.bin + m - 1) % m], x[p.bin], x[(p.bin + 1) % m]);
    let den = 2.0 * mid - lo - hi;
    if den.norm() == 0.0 {
        return p.frequency;
    }
    let delta = ((lo - hi) / den).re.clamp(-0.5, 0.5);
    if delta.is_finite() {
        p.frequency + delta * spec.bin_width()
    } else {
        p.frequency
    }
}

/// Greedy level guess from the positive-frequency peaks.
///
/// Peaks are visited strongest first. A peak already explained by a difference of the
/// current levels is skipped; otherwise the candidate `e ± f` that explains the most
/// peak weight is added.
fn auto_init(observed: &PowerSpectrum, m_levels: usize) -> Result<Vec<f64>> {
    let tol = 1.5 * observed.bin_width();
    let peaks = detect_peaks(observed, 1e-6, tol)?;
    let pos: Vec<(f64, f64)> = peaks.peaks.iter().filter(|p| p.frequency > 0.0).map(|p| (refine_peak(observed, p), p.magnitude)).collect();
    let explained = |levels: &[f64], f: f64| levels.iter().any(|&a| levels.iter().any(|&b| (a - b - f).abs() <= tol));
    let mut levels = vec![0.0];
    for &(f, _) in &pos {
        if levels.len() == m_levels {
            break;
        }
        if explained(&levels, f) {
            continue;
        }
        let mut best: Option<(f64, f64)> = None;
        for &e in &levels {
            for c in [e + f, e - f] {
                let lo = levels.iter().cloned().fold(c, f64::min);
                let hi = levels.iter().cloned().fold(c, f64::max);
                if hi - lo >= PI || levels.iter().any(|&x| (x - c).abs() <= tol) {
                    continue;
                }
                let mut trial = levels.clone();
                trial.push(c);
                let score: f64 = pos.iter().filter(|&&(g, _)| explained(&trial, g)).map(|&(_, w)| w).sum();
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((c, score));
                }
            }
        }
        if let Some((c, _)) = best {
            levels.push(c);
        }
    }
    if levels.len() < m_levels {
        return Err(QptError::RankDeficient { levels: m_levels, detail: format!("peaks determine only {} distinct levels", levels.len()) });
    }
    levels.sort_by(f64::total_cmp);
    Ok(levels)
}

/// `Σ_{m<M} e^{−i(Δ+ω_k)m}` at every bin `ω_k = 2πk/M`.
fn tone_column(delta: f64, m: usize) -> Vec<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let num = one - Complex64::from_polar(1.0, -delta * m as f64);
    (0..m)
        .map(|k| {
            let den = one - Complex64::from_polar(1.0, -(delta + 2.0 * PI * k as f64 / m as f64));
            if den.norm() < 1e-9 {
                Complex64::new(m as f64, 0.0)
            } else {
                num / den
            }
        })
        .collect()
}

/// Amplitudes at fixed levels from the complex spectrum.
///
/// The coefficients are linear in the pair products `P_{nn'} = c_n c_{n'}*`, so those
/// come from one linear least-squares solve. The amplitudes are then the leading
/// eigenvector of `P`, whose unobserved diagonal is filled in by alternating with the
/// rank-one estimate. The lowest level's amplitude is made real.
fn linear_amplitude_init(observed: &PowerSpectrum, levels: &[f64]) -> Vec<Complex64> {
    let m = observed.len();
    let l = levels.len();
    let pairs: Vec<(usize, usize)> = (0..l).flat_map(|a| (a + 1..l).map(move |b| (a, b))).collect();
    let mut design = DMatrix::<f64>::zeros(2 * m, 1 + 2 * pairs.len());
    let mut put = |col: usize, v: &[Complex64]| {
        for (k, z) in v.iter().enumerate() {
            design[(k, col)] = z.re;
            design[(m + k, col)] = z.im;
        }
    };
    put(0, &tone_column(0.0, m));
    for (j, &(a, b)) in pairs.iter().enumerate() {
        let fwd = tone_column(levels[a] - levels[b], m);
        let back = tone_column(levels[b] - levels[a], m);
        let sum: Vec<Complex64> = fwd.iter().zip(&back).map(|(x, y)| x + y).collect();
        let diff: Vec<Complex64> = fwd.iter().zip(&back).map(|(x, y)| Complex64::i() * (x - y)).collect();
        put(1 + 2 * j, &sum);
        put(2 + 2 * j, &diff);
    }
    let rhs = DVector::from_iterator(2 * m, observed.coefficients.iter().map(|z| z.re).chain(observed.coefficients.iter().map(|z| z.im)));
    let fallback = vec![Complex64::new((l as f64).sqrt().recip(), 0.0); l];
    let svd = design.svd(true, true);
    let top = svd.singular_values.max();
    let Ok(x) = svd.solve(&rhs, 1e-10 * top) else {
        return fallback;
    };
    let total = x[0].max(0.0);
    let mut h = CMatrix::zeros(l, l);
    for (j, &(a, b)) in pairs.iter().enumerate() {
        let p = Complex64::new(x[1 + 2 * j], x[2 + 2 * j]);
        h[(a, b)] = p;
        h[(b, a)] = p.conj();
    }
    let mut diag = vec![total / l as f64; l];
    let mut amps = fallback.clone();
    for _ in 0..50 {
        for n in 0..l {
            h[(n, n)] = Complex64::new(diag[n], 0.0);
        }
        let Ok((vals, vecs)) = hermitian_eigen(&h) else {
            return fallback;
        };
        let lead = vals[l - 1].max(0.0).sqrt();
        amps = vecs.column(l - 1).iter().map(|z| z * lead).collect();
        diag = amps.iter().map(|z| z.norm_sqr()).collect();
    }
    let phase = if amps[0].norm() > 0.0 { amps[0].conj() / amps[0].norm() } else { Complex64::new(1.0, 0.0) };
    if amps.iter().all(|z| z.is_finite()) {
        amps.iter().map(|z| z * phase).collect()
    } else {
        fallback
    }
}

/// Fit levels to an observed return-probability spectrum.
///
/// Residuals are `|X_model| − |X_obs|` over every bin. The model amplitudes are complex
/// (`re`, `im` per level, the lowest level real) because cross terms carry relative
/// phases. Without supplied overlaps the amplitudes are fitted first at fixed levels,
/// then levels and amplitudes together.
pub fn reconstruct_levels(observed: &PowerSpectrum, opts: &ReconstructOptions) -> Result<ReconstructedSpectrum> {
    let m = observed.len();
    if opts.m_levels < 1 {
        return Err(QptError::InvalidInput("need at least one level".into()));
    }
    let init = match &opts.init {
        LevelInit::Auto => auto_init(observed, opts.m_levels)?,
        LevelInit::Levels(v) => {
            if v.len() != opts.m_levels {
                return Err(QptError::InvalidInput(format!("{} initial levels given for m_levels = {}", v.len(), opts.m_levels)));
            }
            v.clone()
        }
    };
    let (levels0, mult, group) = collapse(&init, opts.merge_tol);
    let l = levels0.len();
    let spread = levels0.last().unwrap() - levels0[0];
    if spread >= PI {
        return Err(QptError::InvalidInput(format!("initial level spread {spread:.3} is not aliasing-safe (< pi)")));
    }
    // Overlaps may be given per distinct level or per initial level; merged levels add up.
    let overlaps = match &opts.overlaps {
        None => None,
        Some(ov) if ov.len() == l => Some(ov.clone()),
        Some(ov) if ov.len() == init.len() => {
            let mut sum = vec![Complex64::new(0.0, 0.0); l];
            for (z, &g) in ov.iter().zip(&group) {
                sum[g] += z;
            }
            Some(sum)
        }
        Some(ov) => {
            return Err(QptError::InvalidInput(format!("{} overlaps given for {l} distinct of {} initial levels", ov.len(), init.len())))
        }
    };
    let target = observed.magnitudes.clone();
    let base = levels0[0];

    // With known overlaps only E_1..E_{L−1} are fitted; E_0 stays at `base`.
    let unpack_levels = |p: &[f64]| -> Vec<f64> { std::iter::once(base).chain(p[..l - 1].iter().copied()).collect() };
    let model = |levels: &[f64], amps: &[Complex64]| -> Vec<f64> {
        predicted_from_amplitudes(levels, amps, m)
            .map(|s| s.magnitudes.iter().zip(&target).map(|(a, b)| a - b).collect())
            .unwrap_or_else(|_| vec![f64::NAN; m])
    };

    let mut total_iter = 0;
    let mut warnings = Vec::new();
    let (levels, amps, residual_norm) = match overlaps {
        Some(ov) => {
            let prob = FnProblem::new(l - 1, m, |p: &[f64]| model(&unpack_levels(p), &ov));
            let x0: Vec<f64> = levels0[1..].to_vec();
            check_rank(&prob, &x0, &opts.settings, l)?;
            let res = run_lm(&prob, &x0, &opts.settings, l)?;
            total_iter += res.iterations;
            (unpack_levels(&res.params), ov, res.residual_norm)
        }
        None => {
            let lin = linear_amplitude_init(observed, &levels0);
            let all: Vec<usize> = by_weight(&lin);
            // Stage 1: amplitudes at fixed levels. Only a starting point, so a stall is tolerated.
            let stage1 = FnProblem::new(2 * l - 1, m, |a: &[f64]| model(&levels0, &unpack_gauged(a, &all, l)));
            let amp0 = pack_gauged(&lin, &all);
            let a1 = match lm_minimize(&stage1, &amp0, &opts.settings) {
                Ok(r) => {
                    total_iter += r.iterations;
                    unpack_gauged(&r.params, &all, l)
                }
                Err(_) => lin,
            };
            // Levels the measured state does not populate leave the spectrum unchanged and are frozen.
            let top = a1.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let active: Vec<usize> = by_weight(&a1).into_iter().filter(|&n| a1[n].norm() > SILENT * top).collect();
            for n in (0..l).filter(|n| !active.contains(n)) {
                warnings.push(format!("level {n} carries no weight and keeps its initial value"));
            }
            // Stage 2: active levels and amplitudes. A singular fit with a weak level retries without it.
            let mut active = active;
            let (mut levels, amps, s2) = loop {
                match fit_joint(&model, &levels0, &a1, &active, &opts.settings) {
                    Ok(fit) => break fit,
                    Err(QptError::RankDeficient { .. }) if active.len() > 1 && a1[*active.last().unwrap()].norm() < PRUNE * top => {
                        let n = active.pop().unwrap();
                        warnings.push(format!("level {n} is too weakly populated to fit and keeps its initial value"));
                    }
                    Err(e) => return Err(e),
                }
            };
            total_iter += s2.iterations;
            // A level whose weight vanished during the joint fit is no longer pinned by the data.
            let top = amps.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for &n in &active[1..] {
                if amps[n].norm() <= SILENT * top {
                    levels[n] = levels0[n];
                    warnings.push(format!("level {n} lost its weight in the fit and keeps its initial value"));
                }
            }
            (levels, amps, s2.residual_norm)
        }
    };

    // Sign: the strongest transition out of the most populated level points upward.
    let mags: Vec<f64> = amps.iter().map(|z| z.norm()).collect();
    let dom = (0..l).fold(0, |best, n| if mags[n] > mags[best] { n } else { best });
    let partner = (0..l).filter(|&n| n != dom).fold(None, |best: Option<usize>, n| match best {
        Some(b) if mags[b] >= mags[n] => Some(b),
        _ => Some(n),
    });
    let flip = partner.is_some_and(|p| levels[p] < levels[dom]);
    let signed: Vec<f64> = levels.iter().map(|&e| if flip { -e } else { e }).collect();
    let lowest = signed.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut rows: Vec<(f64, f64)> = Vec::new();
    for n in 0..l {
        for _ in 0..mult[n] {
            rows.push((signed[n] - lowest, mags[n] / mult[n] as f64));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ReconstructedSpectrum {
        levels: rows.iter().map(|r| r.0).collect(),
        weights: rows.iter().map(|r| r.1).collect(),
        gauge: Gauge::Relative { sign_flipped: flip },
        residual_norm: Some(residual_norm),
        iterations: total_iter,
        warnings,
    })
}

/// Amplitudes below this fraction of the largest are treated as absent.
const SILENT: f64 = 1e-3;

/// Active levels below this fraction of the largest amplitude may be dropped from a singular fit.
const PRUNE: f64 = 0.05;

/// Fitted levels, amplitudes and the minimiser report.
type JointFit = (Vec<f64>, Vec<Complex64>, crate::numopt::LmResult);

/// Joint fit of the `active` levels and amplitudes; the first active level is the energy
/// reference and carries the phase gauge. Other levels stay at `levels0` with zero amplitude.
fn fit_joint<F: Fn(&[f64], &[Complex64]) -> Vec<f64>>(
    model: &F,
    levels0: &[f64],
    amps0: &[Complex64],
    active: &[usize],
    settings: &LmSettings,
) -> Result<JointFit> {
    let l = levels0.len();
    let free = &active[1..];
    let nf = free.len();
    let levels_of = |p: &[f64]| -> Vec<f64> {
        let mut e = levels0.to_vec();
        for (k, &n) in free.iter().enumerate() {
            e[n] = p[k];
        }
        e
    };
    let m = model(levels0, amps0).len();
    let joint = FnProblem::new(nf + 2 * active.len() - 1, m, |p: &[f64]| model(&levels_of(p), &unpack_gauged(&p[nf..], active, l)));
    let mut x0: Vec<f64> = free.iter().map(|&n| levels0[n]).collect();
    x0.extend(pack_gauged(amps0, active));
    check_rank(&joint, &x0, settings, l)?;
    let res = run_lm(&joint, &x0, settings, l)?;
    Ok((levels_of(&res.params), unpack_gauged(&res.params[nf..], active, l), res))
}

/// Level indices by decreasing amplitude.
fn by_weight(amps: &[Complex64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..amps.len()).collect();
    idx.sort_by(|&a, &b| amps[b].norm().total_cmp(&amps[a].norm()));
    idx
}

/// Amplitudes of `order` as parameters: the first one real (global phase), the rest as (re, im).
fn pack_gauged(amps: &[Complex64], order: &[usize]) -> Vec<f64> {
    let rot = amps[order[0]].conj() / amps[order[0]].norm().max(f64::MIN_POSITIVE);
    let mut p = vec![amps[order[0]].norm()];
    for &n in &order[1..] {
        let z = amps[n] * rot;
        p.extend([z.re, z.im]);
    }
    p
}

/// Inverse of [`pack_gauged`]; levels outside `order` get zero amplitude.
fn unpack_gauged(p: &[f64], order: &[usize], l: usize) -> Vec<Complex64> {
    let mut a = vec![Complex64::new(0.0, 0.0); l];
    a[order[0]] = Complex64::new(p[0], 0.0);
    for (k, &n) in order[1..].iter().enumerate() {
        a[n] = Complex64::new(p[1 + 2 * k], p[2 + 2 * k]);
    }
    a
}

fn run_lm(prob: &dyn crate::numopt::LeastSquaresProblem, x0: &[f64], s: &LmSettings, levels: usize) -> Result<crate::numopt::LmResult> {
    let res = lm_minimize(prob, x0, s).map_err(|e| match e {
        QptError::NonConvergence { reason, .. } => QptError::RankDeficient { levels, detail: reason },
        other => other,
    })?;
    if res.status == LmStatus::MaxIter {
        return Err(QptError::NonConvergence {
            reason: format!("no convergence within {} iterations", s.max_iter),
            residual_norm: res.residual_norm,
            iterations: res.iterations,
        });
    }
    Ok(res)
}

fn check_rank(prob: &dyn crate::numopt::LeastSquaresProblem, x0: &[f64], s: &LmSettings, levels: usize) -> Result<()> {
    let j = numeric_jacobian(prob, x0, s.jacobian_step)?;
    let norms: Vec<f64> = j.column_iter().map(|c| c.norm()).collect();
    let top = norms.iter().cloned().fold(0.0, f64::max);
    if let Some(p) = norms.iter().position(|&v| v <= 1e-12 * top) {
        return Err(QptError::RankDeficient { levels, detail: format!("parameter {p} does not affect the spectrum") });
    }
    Ok(())
}

/// RMS distance between two level sets after optimal offset and sign alignment.
pub fn gauge_aligned_rms(recovered: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(recovered.len(), truth.len());
    let mut rec = recovered.to_vec();
    rec.sort_by(f64::total_cmp);
    let mut best = f64::INFINITY;
    for sign in [1.0, -1.0] {
        let mut t: Vec<f64> = truth.iter().map(|e| sign * e).collect();
        t.sort_by(f64::total_cmp);
        let offset = rec.iter().zip(&t).map(|(a, b)| a - b).sum::<f64>() / rec.len() as f64;
        let ms = rec.iter().zip(&t).map(|(a, b)| (a - b - offset).powi(2)).sum::<f64>() / rec.len() as f64;
        best = best.min(ms.sqrt());
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Zero-padding factor of the windowed transform.
    pub pad: usize,
    /// Peaks below `threshold / 2^N` are ignored.
    pub threshold: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { pad: 8, threshold: 0.5 }
    }
}

/// Levels and degeneracies from the trace-moment channels.
///
/// The complex series is Hann-windowed and zero-padded; a level of degeneracy d shows up
/// as a peak of height d/2^N at ω = −E.
pub fn reconstruct_from_traces(real: &TimeSeries, imag: &TimeSeries, opts: TraceOptions) -> Result<ReconstructedSpectrum> {
    if real.samples.len() != imag.samples.len() {
        return Err(QptError::InvalidInput("trace channels differ in length".into()));
    }
    let n = real.meta.n_qubits;
    let dim = (1usize << n) as f64;
    let z: Vec<Complex64> = real.samples.iter().zip(&imag.samples).map(|(&a, &b)| Complex64::new(a, b)).collect();
    let spec = dft_hann(&z, opts.pad)?;
    let len = spec.len();
    let floor = opts.threshold / dim;
    let mut rows: Vec<(f64, usize)> = Vec::new();
    for j in 0..len {
        let v = spec.magnitudes[j];
        let l = spec.magnitudes[(j + len - 1) % len];
        let r = spec.magnitudes[(j + 1) % len];
        if v >= floor && v >= l && v > r {
            let d = (v * dim).round() as usize;
            if d > 0 {
                rows.push((wrap_phase(-spec.frequencies[j]), d));
            }
        }
    }
    let count: usize = rows.iter().map(|r| r.1).sum();
    let mut warnings = Vec::new();
    if count != 1 << n {
        let w = format!("trace reconstruction found {count} levels with degeneracy, expected {}", 1usize << n);
        log::warn!("{w}");
        warnings.push(w);
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut levels = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for (e, d) in rows {
        for _ in 0..d {
            levels.push(e);
            weights.push(1.0 / dim);
        }
    }
    Ok(ReconstructedSpectrum { levels, weights, gauge: Gauge::Absolute, residual_norm: None, iterations: 0, warnings })
}
