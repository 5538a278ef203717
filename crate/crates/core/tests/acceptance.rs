//! Acceptance run: one PASS/FAIL line per criterion, with the measured value and runtime.
//!
//! Runs without the libtest harness so the report is always printed. The process fails
//! if any criterion fails, except those listed in `KNOWN_UNATTAINABLE`, which are still
//! evaluated and reported.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::time::{Duration, Instant};

use qpt_core::cli::{self, resolve, CommandKind, Params};
use qpt_core::dense::{build_map, eigendecompose, grid_derivative, ground_concurrence, sector_phases, GroundSelection, SpinState};
use qpt_core::linalg::circular_multiset_distance;
use qpt_core::momentum::{
    assembled_sector_phases, d2_ground_phase, fourier_coeffs, mode_block_oracle, quasi_energy, spectral_gap, Couplings, MomentumGrid,
    Parity,
};
use qpt_core::scaling::{argmax, argmax_abs, linear_fit, uniform_grid};
use qpt_core::spectroscopy::{
    controlled_u_series, dft, gauge_aligned_rms, reconstruct_from_traces, reconstruct_levels, simulate_series, LevelInit,
    ReconstructOptions, SeriesMeta, TraceOptions,
};
use rand::{Rng, SeedableRng};

/// The log|a_l| linearity part of the interaction-range criterion cannot hold: κ has a
/// square-root branch point at η = −1, so a_l carries an l^(−1/2) prefactor and log a_l
/// bends by about 0.08 over l = 2..10.
const KNOWN_UNATTAINABLE: &[&str] = &["interaction-range decay"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn composition_identity() -> Outcome {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20240611);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut u = || rng.random_range(-PI..PI);
        let (t, x, k) = (u(), u(), u());
        worst = worst.max(mode_block_oracle(Couplings::new(t, x), k).max_entry_difference());
    }
    outcome(worst <= 1e-12, format!("max entry difference {worst:.2e} over 1000 draws (tol 1e-12)"))
}

fn critical_point() -> Outcome {
    let p: Params = toml::from_str("n = 200\nr = 1.9\nphi = \"0:1.5707963267948966:300\"\nworkers = 1").unwrap();
    let cfg = resolve(CommandKind::SweepEnergy, &p, None, None).unwrap();
    let table = cli::compute(&cfg).unwrap();
    let cell = |row: &[cli::Cell], i: usize| match row[i] {
        cli::Cell::Float(v) => v,
        _ => f64::NAN,
    };
    let phis: Vec<f64> = table.rows.iter().map(|r| cell(r, 0)).collect();
    let d2: Vec<f64> = table.rows.iter().map(|r| cell(r, 3)).collect();
    let i = argmax_abs(&d2).unwrap();
    let step = FRAC_PI_2 / 300.0;
    let off = (phis[i] - FRAC_PI_4).abs();
    outcome(off <= step + 1e-12, format!("argmax |d2 Omega| at phi = {:.6}, offset {off:.2e} (step {step:.2e})", phis[i]))
}

fn log_divergence() -> Outcome {
    let ns: Vec<usize> = (7..=13).map(|e| 1usize << e).collect();
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> =
        ns.iter().map(|&n| d2_ground_phase(1.9, FRAC_PI_4, &MomentumGrid::antiperiodic(n).unwrap(), 1e-5) / n as f64).collect();
    let fit = linear_fit(&x, &y);
    outcome(
        fit.r_squared > 0.99,
        format!("d2 Omega/N vs ln N, N = 128..8192: slope {:.4}, R^2 = {:.7} (need > 0.99)", fit.slope, fit.r_squared),
    )
}

fn gap_exponent() -> Outcome {
    let g = MomentumGrid::periodic(4096).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for j in 0..12 {
        let d = 0.02 * 10f64.powf(j as f64 / 11.0);
        for s in [-1.0, 1.0] {
            x.push(d.ln());
            y.push(spectral_gap(Couplings::from_polar(1.0, FRAC_PI_4 + s * d), &g).ln());
        }
    }
    let fit = linear_fit(&x, &y);
    outcome((fit.slope - 1.0).abs() <= 0.05, format!("log-log slope {:.4} (need 1.00 +/- 0.05), R^2 = {:.6}", fit.slope, fit.r_squared))
}

fn interaction_range() -> Outcome {
    let mut bound_ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_dev: f64 = 0.0;
    for t in [0.5, 1.0, 1.3] {
        let f = fourier_coeffs(Couplings::new(t, t), 10, 8192).unwrap();
        let ls: Vec<f64> = (2..=10).map(|l| l as f64).collect();
        let logs: Vec<f64> = (2..=10).map(|l| f.a[l].abs().ln()).collect();
        for l in 2..=10 {
            let b = f.decay_bound(l);
            bound_ok &= f.a[l] <= b;
            worst_ratio = worst_ratio.max(f.a[l] / b);
        }
        worst_dev = worst_dev.max(linear_fit(&ls, &logs).max_residual);
    }
    let linear_ok = worst_dev <= 0.05;
    outcome(
        bound_ok && linear_ok,
        format!(
            "bound {} (max a_l/bound {worst_ratio:.3}); log|a_l| max deviation from a line {worst_dev:.4} (need <= 0.05)",
            if bound_ok { "holds" } else { "violated" }
        ),
    )
}

fn free_fermion_equivalence() -> Outcome {
    let c = Couplings::new(0.12, -0.12);
    let mut worst: f64 = 0.0;
    for n in [4, 6, 8] {
        let dense = sector_phases(&build_map(c, n, true).unwrap(), Parity::Even).unwrap();
        let modes = assembled_sector_phases(c, n, Parity::Even).unwrap();
        worst = worst.max(circular_multiset_distance(&dense, &modes).unwrap_or(f64::INFINITY));
    }
    outcome(worst <= 1e-8, format!("max phase distance {worst:.2e} over N = 4, 6, 8 (tol 1e-8)"))
}

fn concurrence_signature() -> Outcome {
    let phis = uniform_grid(0.0, FRAC_PI_2, 64);
    let c: Vec<f64> =
        phis.iter().map(|&p| ground_concurrence(Couplings::from_polar(1.9, p), 6, true, GroundSelection::Vacuum).unwrap().0).collect();
    let d = grid_derivative(&phis, &c);
    let i = argmax(&d).unwrap();
    let off = (phis[i] - FRAC_PI_4).abs();
    outcome(off <= 0.15, format!("max dC/dphi at phi = {:.4}, offset {off:.4} (need <= 0.15)", phis[i]))
}

fn spectroscopy_reconstruction() -> Outcome {
    let c = Couplings::new(0.05, 0.05);
    let u = build_map(c, 4, true).unwrap();
    let e = eigendecompose(&u).unwrap();
    let psi = SpinState::random(4, 2024).unwrap();
    let series = simulate_series(&u, &psi, 1, 2048, 1.0).unwrap();
    let spec = dft(&series).unwrap();
    let meta = SeriesMeta { n_qubits: 4, theta: c.theta, chi: c.chi, basis_index: None, initial_state: "mixed".into() };
    let (re, im) = controlled_u_series(&e, 2048, meta).unwrap();
    let init = reconstruct_from_traces(&re, &im, TraceOptions::default()).unwrap();
    let mut opts = ReconstructOptions::new(16);
    opts.init = LevelInit::Levels(init.levels);
    match reconstruct_levels(&spec, &opts) {
        Ok(rec) => {
            let rms = gauge_aligned_rms(&rec.levels, &e.phases);
            outcome(rec.levels.len() == 16 && rms < 1e-3, format!("{} levels, gauge-aligned RMS {rms:.2e} (need < 1e-3)", rec.levels.len()))
        }
        Err(err) => outcome(false, format!("fit failed: {err}")),
    }
}

fn trace_spectroscopy() -> Outcome {
    let m = 2048;
    let bin = 2.0 * PI / m as f64;
    let mut worst: f64 = 0.0;
    let mut counts_ok = true;
    for c in [Couplings::new(0.05, 0.05), Couplings::new(0.1, 0.15)] {
        let e = eigendecompose(&build_map(c, 4, true).unwrap()).unwrap();
        let meta = SeriesMeta { n_qubits: 4, theta: c.theta, chi: c.chi, basis_index: None, initial_state: "mixed".into() };
        let (re, im) = controlled_u_series(&e, m, meta).unwrap();
        let r = reconstruct_from_traces(&re, &im, TraceOptions::default()).unwrap();
        counts_ok &= r.levels.len() == 16 && r.warnings.is_empty();
        worst = worst.max(circular_multiset_distance(&r.levels, &e.phases).unwrap_or(f64::INFINITY));
    }
    outcome(counts_ok && worst <= bin, format!("max level distance {worst:.2e} (bin {bin:.2e}), 16 levels with degeneracy"))
}

fn limit_cases() -> Outcome {
    let g = MomentumGrid::periodic(64).unwrap();
    let mut mode_err: f64 = 0.0;
    let mut dense_err: f64 = 0.0;
    for v in [0.1, 0.37, 1.2] {
        for (c, want) in [(Couplings::new(v, 0.0), v), (Couplings::new(0.0, v), v)] {
            for &k in &g.k_values {
                mode_err = mode_err.max((quasi_energy(c, k) - want).abs());
            }
            let dense = eigendecompose(&build_map(c, 4, true).unwrap()).unwrap().phases;
            let mut modes = assembled_sector_phases(c, 4, Parity::Even).unwrap();
            modes.extend(assembled_sector_phases(c, 4, Parity::Odd).unwrap());
            dense_err = dense_err.max(circular_multiset_distance(&dense, &modes).unwrap_or(f64::INFINITY));
        }
    }
    outcome(
        mode_err <= 1e-15 && dense_err <= 1e-10,
        format!(
            "per-mode |E_k - coupling| max {mode_err:.1e} (arccos rounding, tol 1e-15); dense vs modes N = 4: {dense_err:.2e} (tol 1e-10)"
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (CommandKind::SweepEnergy, "n = 200\nr = 1.9\nphi = \"0:1.5707963267948966:300\""),
        (CommandKind::DenseSweep, "qubits = 6\nr = 1.9\nphi = \"0:1.5707963267948966:24\""),
    ];
    let mut same = true;
    for (cmd, text) in cases {
        let mut bytes = Vec::new();
        for workers in [1, 8] {
            let mut p: Params = toml::from_str(text).unwrap();
            let out = dir.path().join(format!("{cmd}-{workers}.csv"));
            p.out = Some(out.clone());
            p.workers = Some(workers);
            let cfg = resolve(cmd, &p, None, None).unwrap();
            let ok = cli::execute(&cfg).map(|r| r.all_ok()).unwrap_or(false);
            same &= ok;
            bytes.push(std::fs::read(&out).unwrap_or_default());
        }
        same &= !bytes[0].is_empty() && bytes[0] == bytes[1];
    }
    outcome(same, "sweep-energy and dense-sweep CSVs with 1 and 8 workers byte-identical".into())
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("composition identity", Duration::from_secs(5), composition_identity),
        ("critical point location", Duration::from_secs(2), critical_point),
        ("logarithmic divergence", Duration::from_secs(10), log_divergence),
        ("gap exponent", Duration::from_secs(2), gap_exponent),
        ("interaction-range decay", Duration::from_secs(1), interaction_range),
        ("free-fermion vs dense", Duration::from_secs(5), free_fermion_equivalence),
        ("concurrence signature", Duration::from_secs(10), concurrence_signature),
        ("spectroscopy reconstruction", Duration::from_secs(30), spectroscopy_reconstruction),
        ("trace-moment spectroscopy", Duration::from_secs(5), trace_spectroscopy),
        ("limit cases", Duration::from_secs(1), limit_cases),
        ("determinism", Duration::from_secs(5), determinism),
    ];
    let mut unexpected = Vec::new();
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = o.pass && in_time;
        let time_note = if in_time { String::new() } else { format!(", over the {:.0} s budget", budget.as_secs_f64()) };
        let known = KNOWN_UNATTAINABLE.contains(&name);
        let tag = match (pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag:<12} {name}: {} [{:.3} s{time_note}]", o.detail, took.as_secs_f64());
        if pass == known {
            unexpected.push(name);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected acceptance outcome for: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
