use super::*;
use crate::dense::{build_map, build_x_layer, eigendecompose, DenseUnitary, SpinState};
use crate::momentum::Couplings;
use crate::numopt::{numeric_jacobian, FnProblem};

use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, rng_seed: RngSeed::Fixed(0x5bec), failure_persistence: None, ..ProptestConfig::default() }
}

fn meta(n: usize) -> SeriesMeta {
    SeriesMeta { n_qubits: n, theta: 0.0, chi: 0.0, basis_index: None, initial_state: "test".into() }
}

/// `|⟨i|U^m|ψ⟩|²` by applying U repeatedly.
fn power_series(u: &DenseUnitary, psi: &SpinState, i: usize, m: usize) -> Vec<f64> {
    let mut v = psi.amplitudes.clone();
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        out.push(v[i].norm_sqr());
        v = &u.matrix * v;
    }
    out
}

#[test]
fn series_examples() {
    let u = build_map(Couplings::new(0.05, 0.2), 4, true).unwrap();
    let psi = SpinState::uniform(4).unwrap();
    let s = simulate_series_default(&u, &psi, 3, 2048).unwrap();
    assert!((s.samples[0] - psi.amplitudes[3].norm_sqr()).abs() < 1e-14);
    let direct = power_series(&u, &psi, 3, 2048);
    let worst = s.samples.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-10, "worst {worst}");
    assert!(s.samples.iter().all(|x| (0.0..=1.0).contains(x)));

    let e = eigendecompose(&u).unwrap();
    let eig = SpinState { n_qubits: 4, amplitudes: e.vectors.column(5).into_owned() };
    let s = simulate_series_default(&u, &eig, 7, 64).unwrap();
    assert!(s.samples.iter().all(|x| (x - s.samples[0]).abs() < 1e-12));
}

#[test]
fn aliasing_is_enforced() {
    let u = build_map(Couplings::new(0.05, 0.3), 4, true).unwrap();
    let psi = SpinState::uniform(4).unwrap();
    let err = simulate_series_default(&u, &psi, 0, 16).unwrap_err();
    match err {
        QptError::Aliasing { bound, .. } => assert!((bound - 0.25).abs() < 1e-15),
        other => panic!("unexpected {other}"),
    }
    assert!(simulate_series(&u, &psi, 0, 16, 1.5).is_ok());
}

#[test]
fn dft_examples() {
    let s = dft_real(&[0.7; 32]).unwrap();
    assert!((s.magnitudes[0] - 0.7 * 32.0).abs() < 1e-12);
    assert!(s.magnitudes[1..].iter().all(|&v| v < 1e-12));
    let m = 64;
    let w0 = 2.0 * std::f64::consts::PI * 5.0 / m as f64;
    let x: Vec<f64> = (0..m).map(|k| (w0 * k as f64).cos()).collect();
    let p = detect_peaks(&dft_real(&x).unwrap(), 0.1, 0.05).unwrap();
    assert_eq!(p.peaks.len(), 2);
    for pk in &p.peaks {
        assert!((pk.frequency.abs() - w0).abs() < 1e-12);
    }
    assert!(s.frequencies.iter().all(|f| *f > -std::f64::consts::PI && *f <= std::f64::consts::PI));
}

#[test]
fn peak_examples() {
    let m = 128;
    let w = |j: f64| 2.0 * std::f64::consts::PI * j / m as f64;
    let x: Vec<f64> = (0..m).map(|k| 0.5 + (w(9.0) * k as f64).cos()).collect();
    let p = detect_peaks(&dft_real(&x).unwrap(), 0.1, 0.05).unwrap();
    assert_eq!(p.peaks.len(), 3);
    let x: Vec<f64> = (0..m).map(|k| (w(9.0) * k as f64).cos() + 0.5 * (w(30.0) * k as f64).sin()).collect();
    let p = detect_peaks(&dft_real(&x).unwrap(), 0.1, 0.05).unwrap();
    assert_eq!(p.peaks.len(), 4);
    assert!(p.peaks.windows(2).all(|a| a[0].magnitude >= a[1].magnitude));
    let empty = PowerSpectrum { frequencies: vec![], coefficients: vec![], magnitudes: vec![] };
    assert!(detect_peaks(&empty, 0.5, 0.1).unwrap().peaks.is_empty());
    assert!(detect_peaks(&empty, 1.5, 0.1).is_err());
}

#[test]
fn map_peaks_are_level_differences() {
    let u = build_map(Couplings::new(0.1, 0.15), 4, true).unwrap();
    let e = eigendecompose(&u).unwrap();
    for (psi, i) in [(SpinState::uniform(4).unwrap(), 0), (SpinState::random(4, 11).unwrap(), 1)] {
        let amps = overlap_products(&e, &psi, i);
        let s = simulate_series_from(&e, &u, &psi, i, 1024).unwrap();
        let spec = dft(&s).unwrap();
        let peaks = detect_peaks(&spec, 0.05, 2.0 * spec.bin_width()).unwrap();
        assert!(!peaks.peaks.is_empty());
        for p in &peaks.peaks {
            let near = (0..16).any(|a| {
                (0..16).any(|b| {
                    amps[a].norm() * amps[b].norm() > 1e-8
                        && crate::linalg::wrap_phase(e.phases[a] - e.phases[b] - p.frequency).abs() <= spec.bin_width()
                })
            });
            assert!(near, "peak at {} is not a level difference", p.frequency);
        }
    }
}

#[test]
fn predicted_spectrum_examples() {
    let one = predicted_spectrum(&[0.3], &[Complex64::new(0.6, 0.0)], &[Complex64::new(0.5, 0.0)], 32).unwrap();
    assert!(one.magnitudes[1..].iter().all(|&v| v < 1e-12));
    let m = 256;
    let gap = 2.0 * std::f64::consts::PI * 20.0 / m as f64;
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let two = predicted_spectrum(&[0.1, 0.1 + gap], &[h, h], &[h, h], m).unwrap();
    // x_m = ½ + ½ cos(gap·m): weight ¼ at ±gap.
    assert!((two.magnitudes[20] - 0.25 * m as f64).abs() < 1e-9);
    assert!((two.magnitudes[m - 20] - 0.25 * m as f64).abs() < 1e-9);
    assert!((two.magnitudes[0] - 0.5 * m as f64).abs() < 1e-9);
}

#[test]
fn predicted_spectrum_matches_simulation() {
    let u = build_map(Couplings::new(0.05, 0.2), 4, true).unwrap();
    let e = eigendecompose(&u).unwrap();
    let psi = SpinState::random(4, 3).unwrap();
    let i = 2;
    let ov_i: Vec<Complex64> = (0..16).map(|n| e.vectors[(i, n)]).collect();
    let ov_psi: Vec<Complex64> = (0..16).map(|n| e.vectors.column(n).dotc(&psi.amplitudes)).collect();
    let model = predicted_spectrum(&e.phases, &ov_i, &ov_psi, 2048).unwrap();
    let sim = dft(&simulate_series_from(&e, &u, &psi, i, 2048).unwrap()).unwrap();
    let worst = model.coefficients.iter().zip(&sim.coefficients).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "worst {worst}");
}

/// Levels, spectrum and a trace-derived initial guess for a map instance.
fn fixture(c: Couplings, n: usize, m: usize, seed: u64, i: usize) -> (Vec<f64>, PowerSpectrum, Vec<f64>) {
    let u = build_map(c, n, true).unwrap();
    let e = eigendecompose(&u).unwrap();
    let psi = SpinState::random(n, seed).unwrap();
    let spec = dft(&simulate_series_from(&e, &u, &psi, i, m).unwrap()).unwrap();
    let (re, im) = controlled_u_series(&e, m, meta(n)).unwrap();
    let init = reconstruct_from_traces(&re, &im, TraceOptions::default()).unwrap();
    assert!(init.warnings.is_empty(), "{:?}", init.warnings);
    (e.phases, spec, init.levels)
}

#[test]
fn synthetic_three_levels_from_auto_init() {
    let truth = [-0.213, 0.0571, 0.4042];
    let amps = [Complex64::new(0.62, 0.0), Complex64::new(0.21, 0.13), Complex64::new(-0.1, 0.17)];
    let ones = [Complex64::new(1.0, 0.0); 3];
    let spec = predicted_spectrum(&truth, &amps, &ones, 1024).unwrap();
    let rec = reconstruct_levels(&spec, &ReconstructOptions::new(3)).unwrap();
    assert!(gauge_aligned_rms(&rec.levels, &truth) < 1e-6, "{:?}", rec.levels);
    assert_eq!(rec.levels[0], 0.0);
}

#[test]
fn unpopulated_level_keeps_its_initial_value() {
    let truth = [-0.213, 0.0571, 0.25, 0.4042];
    let amps = [Complex64::new(0.62, 0.0), Complex64::new(0.21, 0.13), Complex64::new(0.0, 0.0), Complex64::new(-0.1, 0.17)];
    let ones = [Complex64::new(1.0, 0.0); 4];
    let spec = predicted_spectrum(&truth, &amps, &ones, 1024).unwrap();
    let mut opts = ReconstructOptions::new(4);
    opts.init = LevelInit::Levels(vec![-0.2128, 0.0573, 0.2503, 0.4041]);
    let rec = reconstruct_levels(&spec, &opts).unwrap();
    assert_eq!(rec.warnings.len(), 1, "{:?}", rec.warnings);
    assert!(rec.weights.iter().filter(|&&w| w == 0.0).count() == 1, "{:?}", rec.weights);
    let shifted: Vec<f64> = rec.levels.iter().map(|e| e - 0.213).collect();
    for (got, want) in shifted.iter().zip([-0.213, 0.0571, 0.2503 - 0.0002, 0.4042]) {
        assert!((got - want).abs() < 1e-3, "{shifted:?}");
    }
}

#[test]
fn map_levels_with_stronger_exchange() {
    let (truth, spec, init) = fixture(Couplings::new(0.05, 0.2), 4, 2048, 7, 1);
    let mut opts = ReconstructOptions::new(16);
    opts.init = LevelInit::Levels(init);
    let rec = reconstruct_levels(&spec, &opts).unwrap();
    assert_eq!(rec.levels.len(), 16);
    let rms = gauge_aligned_rms(&rec.levels, &truth);
    assert!(rms < 1e-3, "rms {rms}");
}

#[test]
fn true_start_is_a_fixed_point() {
    let u = build_map(Couplings::new(0.1, 0.15), 4, true).unwrap();
    let e = eigendecompose(&u).unwrap();
    let psi = SpinState::random(4, 5).unwrap();
    let amps = overlap_products(&e, &psi, 1);
    let spec = dft(&simulate_series_from(&e, &u, &psi, 1, 512).unwrap()).unwrap();
    let mut opts = ReconstructOptions::new(16);
    opts.init = LevelInit::Levels(e.phases.clone());
    opts.overlaps = Some(amps);
    let rec = reconstruct_levels(&spec, &opts).unwrap();
    assert!(rec.iterations <= 2, "iterations {}", rec.iterations);
    assert!(gauge_aligned_rms(&rec.levels, &e.phases) < 1e-9);
}

#[test]
fn reconstruction_is_gauge_stable() {
    let truth = [-0.15, 0.02, 0.11, 0.33];
    let amps = [Complex64::new(0.5, 0.0), Complex64::new(0.3, 0.2), Complex64::new(0.2, -0.1), Complex64::new(0.15, 0.05)];
    let ones = [Complex64::new(1.0, 0.0); 4];
    let run = |shift: f64, sign: f64| {
        let lv: Vec<f64> = truth.iter().map(|e| sign * e + shift).collect();
        let a: Vec<Complex64> = if sign > 0.0 { amps.to_vec() } else { amps.iter().map(|z| z.conj()).collect() };
        let spec = predicted_spectrum(&lv, &a, &ones, 1024).unwrap();
        let mut opts = ReconstructOptions::new(4);
        opts.init = LevelInit::Levels(lv.iter().map(|e| e + 1e-3).collect());
        reconstruct_levels(&spec, &opts).unwrap().levels
    };
    let base = run(0.0, 1.0);
    let shifted = run(0.4, 1.0);
    let mirrored = run(0.0, -1.0);
    for k in 0..4 {
        assert!((base[k] - shifted[k]).abs() < 1e-9, "{base:?} {shifted:?}");
        assert!((base[k] - mirrored[k]).abs() < 1e-9, "{base:?} {mirrored:?}");
    }
    assert!(gauge_aligned_rms(&base, &truth) < 1e-8);
}

#[test]
fn negated_couplings_negate_the_spectrum() {
    let a = eigendecompose(&build_map(Couplings::new(0.07, 0.11), 4, true).unwrap()).unwrap().phases;
    let b = eigendecompose(&build_map(Couplings::new(-0.07, -0.11), 4, true).unwrap()).unwrap().phases;
    let neg: Vec<f64> = b.iter().map(|x| -x).collect();
    assert!(crate::linalg::circular_multiset_distance(&a, &neg).unwrap() < 1e-12);
}

#[test]
fn model_jacobian_matches_central_differences() {
    let m = 256;
    let ones = [Complex64::new(1.0, 0.0); 3];
    let prob = FnProblem::new(6, m, |p: &[f64]| {
        let levels = [0.0, p[0], p[1]];
        let amps = [Complex64::new(p[2], 0.0), Complex64::new(p[3], p[4]), Complex64::new(p[5], 0.0)];
        predicted_spectrum(&levels, &amps, &ones, m).unwrap().magnitudes
    });
    for x in [[0.13, 0.41, 0.6, 0.2, 0.1, 0.3], [0.07, 0.29, 0.5, -0.3, 0.2, 0.25]] {
        let j = numeric_jacobian(&prob, &x, 1e-7).unwrap();
        let h = 1e-6;
        for p in 0..6 {
            let mut a = x;
            let mut b = x;
            a[p] += h;
            b[p] -= h;
            let ra = prob.residuals(&a);
            let rb = prob.residuals(&b);
            let central: Vec<f64> = ra.iter().zip(&rb).map(|(u, v)| (u - v) / (2.0 * h)).collect();
            let scale = central.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let worst = (0..m).map(|r| (j[(r, p)] - central[r]).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-4 * scale, "param {p}: {worst} vs scale {scale}");
        }
    }
}

use crate::numopt::LeastSquaresProblem;

#[test]
fn trace_examples() {
    let e = eigendecompose(&build_map(Couplings::new(0.05, 0.05), 4, true).unwrap()).unwrap();
    let (re, im) = controlled_u_series(&e, 64, meta(4)).unwrap();
    assert!((re.samples[0] - 1.0).abs() < 1e-15 && im.samples[0].abs() < 1e-15);
    assert!(re.samples.iter().chain(&im.samples).all(|x| x.abs() <= 1.0 + 1e-12));
    let theta: f64 = 0.3;
    let e1 = eigendecompose(&build_x_layer(theta, 1).unwrap()).unwrap();
    let (re, im) = controlled_u_series(&e1, 32, meta(1)).unwrap();
    for m in 0..32 {
        assert!((re.samples[m] - (m as f64 * theta).cos()).abs() < 1e-12);
        assert!(im.samples[m].abs() < 1e-12);
    }
}

#[test]
fn trace_dft_peaks_at_the_phases() {
    let e = eigendecompose(&build_map(Couplings::new(0.1, 0.15), 4, true).unwrap()).unwrap();
    let (re, im) = controlled_u_series(&e, 1024, meta(4)).unwrap();
    let z: Vec<Complex64> = re.samples.iter().zip(&im.samples).map(|(&a, &b)| Complex64::new(a, b)).collect();
    let spec = dft_complex(&z).unwrap();
    let peaks = detect_peaks(&spec, 0.2, 2.0 * spec.bin_width()).unwrap();
    for p in &peaks.peaks {
        assert!(e.phases.iter().any(|&ph| crate::linalg::wrap_phase(-ph - p.frequency).abs() <= spec.bin_width()));
    }
}

#[test]
fn trace_reconstruction_examples() {
    let id = eigendecompose(&DenseUnitary::identity(3).unwrap()).unwrap();
    let (re, im) = controlled_u_series(&id, 256, meta(3)).unwrap();
    let r = reconstruct_from_traces(&re, &im, TraceOptions::default()).unwrap();
    assert_eq!(r.levels, vec![0.0; 8]);
    assert!(r.warnings.is_empty());

    let e = eigendecompose(&build_x_layer(0.1, 2).unwrap()).unwrap();
    let (re, im) = controlled_u_series(&e, 1024, meta(2)).unwrap();
    let r = reconstruct_from_traces(&re, &im, TraceOptions::default()).unwrap();
    let bin = 2.0 * std::f64::consts::PI / 1024.0;
    assert_eq!(r.levels.len(), 4);
    for (got, want) in r.levels.iter().zip([-0.2, 0.0, 0.0, 0.2]) {
        assert!((got - want).abs() < bin, "{:?}", r.levels);
    }
    assert!(r.weights.iter().all(|&w| w == 0.25));
}

#[test]
fn trace_reconstruction_of_small_maps() {
    for (t, x) in [(0.05, 0.05), (0.1, 0.15), (0.05, 0.2), (0.2, -0.1)] {
        let e = eigendecompose(&build_map(Couplings::new(t, x), 4, true).unwrap()).unwrap();
        let (re, im) = controlled_u_series(&e, 2048, meta(4)).unwrap();
        let r = reconstruct_from_traces(&re, &im, TraceOptions::default()).unwrap();
        assert!(r.warnings.is_empty(), "({t},{x}) {:?}", r.warnings);
        let d = crate::linalg::circular_multiset_distance(&r.levels, &e.phases).unwrap();
        assert!(d <= 2.0 * std::f64::consts::PI / 2048.0, "({t},{x}) {d}");
    }
}

#[test]
fn inconsistent_traces_warn() {
    // Levels closer than the resolution merge into one peak of the wrong height.
    let e = eigendecompose(&build_map(Couplings::new(0.01, 0.02), 4, true).unwrap()).unwrap();
    let (re, im) = controlled_u_series(&e, 64, meta(4)).unwrap();
    let r = reconstruct_from_traces(&re, &im, TraceOptions::default()).unwrap();
    assert!(!r.warnings.is_empty());
}

#[test]
fn too_many_levels_is_rank_deficient() {
    let truth = [0.0, 0.3];
    let amps = [Complex64::new(0.7, 0.0), Complex64::new(0.3, 0.0)];
    let ones = [Complex64::new(1.0, 0.0); 2];
    let spec = predicted_spectrum(&truth, &amps, &ones, 256).unwrap();
    let mut opts = ReconstructOptions::new(3);
    opts.init = LevelInit::Levels(vec![0.0, 0.3, 0.3 + 1e-3]);
    opts.overlaps = Some(vec![amps[0], amps[1], Complex64::new(0.0, 0.0)]);
    let err = reconstruct_levels(&spec, &opts).unwrap_err();
    assert!(matches!(err, QptError::RankDeficient { .. }), "{err}");
}

proptest! {
    #![proptest_config(cfg(12))]

    #[test]
    fn eigen_expansion_equals_matrix_powers(t in -0.15f64..0.15, x in -0.15f64..0.15, n in 2usize..7, seed in any::<u64>(), m in 2usize..256) {
        let u = build_map(Couplings::new(t, x), n, true).unwrap();
        let psi = SpinState::random(n, seed).unwrap();
        let i = (seed as usize) % (1 << n);
        let s = simulate_series(&u, &psi, i, m, 2.0).unwrap();
        let d = power_series(&u, &psi, i, m);
        prop_assert!(s.samples.iter().zip(&d).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn parseval(x in proptest::collection::vec(-1.0f64..1.0, 2..300)) {
        let s = dft_real(&x).unwrap();
        let lhs: f64 = s.magnitudes.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let rhs: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-300));
    }

    #[test]
    fn inverse_dft_round_trip(x in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..300)) {
        let z: Vec<Complex64> = x.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let back = inverse_dft(&dft_complex(&z).unwrap());
        prop_assert!(z.iter().zip(&back).all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn peaks_sit_on_allowed_differences(t in -0.2f64..0.2, x in -0.2f64..0.2, seed in any::<u64>()) {
        let u = build_map(Couplings::new(t, x), 4, true).unwrap();
        let e = eigendecompose(&u).unwrap();
        let psi = SpinState::random(4, seed).unwrap();
        let amps = overlap_products(&e, &psi, 0);
        let spec = dft(&simulate_series_from(&e, &u, &psi, 0, 512).unwrap()).unwrap();
        let peaks = detect_peaks(&spec, 1e-2, 2.0 * spec.bin_width()).unwrap();
        for p in &peaks.peaks {
            let ok = (0..16).any(|a| (0..16).any(|b| amps[a].norm() * amps[b].norm() > 1e-8
                && crate::linalg::wrap_phase(e.phases[a] - e.phases[b] - p.frequency).abs() <= spec.bin_width()));
            prop_assert!(ok);
        }
    }
}
