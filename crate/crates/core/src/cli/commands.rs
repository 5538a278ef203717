//! Command bodies: each resolved job becomes a [`Table`] in grid order.

use rayon::prelude::*;

use super::config::{InitMode, InitialState, Job, SpectroSettings, SweepAxis};
use super::output::{status_cell, Cell, Table};
use crate::dense::{build_map, eigendecompose, grid_derivative, ground_concurrence, sector_phases, EigenDecomp, SpinState};
use crate::error::{QptError, Result};
use crate::linalg::wrap_phase;
use crate::momentum::{
    assembled_sector_phases, d2_ground_phase, d_ground_phase, fourier_coeffs, ground_phase, ising_ground_phase, ising_map, spectral_gap,
    Couplings, MomentumGrid, Parity, Sector,
};
use crate::spectroscopy::{
    check_aliasing, controlled_u_series, dft, reconstruct_from_traces, reconstruct_levels, simulate_series, LevelInit, ReconstructOptions,
    SeriesMeta, TraceOptions,
};

/// Evaluate a job. Must run inside the worker pool; grid points are mapped in parallel
/// and collected in grid order.
pub fn run_job(job: &Job) -> Result<Table> {
    match job {
        Job::SweepEnergy { n, r, phis, sector, h } => sweep_energy(*n, *r, phis, *sector, *h),
        Job::Gap { n, r, phis, sector } => gap(*n, *r, phis, *sector),
        Job::Coeffs { pairs, l_max, quad } => Ok(coeffs(pairs, *l_max, *quad)),
        Job::DenseSweep { qubits, axis, periodic } => Ok(dense_sweep(*qubits, axis, *periodic)),
        Job::Entanglement { qubits, r, phis, periodic, ground } => {
            let vals: Vec<Result<(f64, bool)>> =
                phis.par_iter().map(|&p| ground_concurrence(Couplings::from_polar(*r, p), *qubits, *periodic, *ground)).collect();
            let c: Vec<f64> = vals.iter().map(|v| v.as_ref().map_or(f64::NAN, |x| x.0)).collect();
            let d = grid_derivative(phis, &c);
            let mut t = Table::new(&["phi", "concurrence", "d_concurrence", "degenerate", "status"]);
            for (i, v) in vals.iter().enumerate() {
                let deg = v.as_ref().map_or(Cell::Empty, |x| Cell::Bool(x.1));
                t.failed_points += v.is_err() as usize;
                t.rows.push(vec![phis[i].into(), c[i].into(), d[i].into(), deg, status_cell(v)]);
            }
            t.note("ground_selection", ground.name());
            t.note("sites", "concurrence between qubits 0 and 1");
            t.note("derivative", "central differences on the phi grid, one-sided at the ends");
            Ok(t)
        }
        Job::Spectroscopy { qubits, chi, thetas, periodic, settings } => Ok(spectroscopy(*qubits, *chi, thetas, *periodic, settings)),
        Job::Reconstruct { qubits, couplings, periodic, settings, init } => reconstruct(*qubits, *couplings, *periodic, settings, *init),
        Job::Traces { qubits, couplings, periodic, samples } => {
            let e = eigendecompose(&build_map(*couplings, *qubits, *periodic)?)?;
            let (re, im) = controlled_u_series(&e, *samples, meta(*qubits, *couplings, None, "maximally mixed"))?;
            let mut t = Table::new(&["m", "re", "im"]);
            for (m, (a, b)) in re.samples.iter().zip(&im.samples).enumerate() {
                t.rows.push(vec![m.into(), (*a).into(), (*b).into()]);
            }
            t.note("series", "Tr(U^m)/2^N");
            Ok(t)
        }
        Job::Crosscheck { qubits, couplings } => crosscheck(*qubits, *couplings),
    }
}

fn grid(n: usize, sector: Sector) -> Result<MomentumGrid> {
    MomentumGrid::new(n, sector)
}

fn sweep_energy(n: usize, r: f64, phis: &[f64], sector: Sector, h: f64) -> Result<Table> {
    let g = grid(n, sector)?;
    let ising = |phi: f64| -> Result<f64> { Ok(ising_ground_phase(ising_map(Couplings::from_polar(r, phi))?, &g)) };
    let rows: Vec<Vec<Cell>> = phis
        .par_iter()
        .map(|&phi| {
            let omega = ground_phase(Couplings::from_polar(r, phi), &g);
            let d = d_ground_phase(r, phi, &g, h);
            let d2 = d2_ground_phase(r, phi, &g, h);
            let is: Result<(f64, f64)> = (|| {
                let (lo, mid, hi) = (ising(phi - h)?, ising(phi)?, ising(phi + h)?);
                Ok((mid, (hi - 2.0 * mid + lo) / (h * h)))
            })();
            let (io, id2) = is.as_ref().map_or((f64::NAN, f64::NAN), |v| *v);
            vec![phi.into(), omega.into(), d.into(), d2.into(), io.into(), id2.into(), status_cell(&is)]
        })
        .collect();
    let mut t = Table::new(&["phi", "omega1", "d_omega1", "d2_omega1", "ising_omega1", "d2_ising_omega1", "status"]);
    t.failed_points = rows.iter().filter(|r| r[6] != Cell::Text("ok".into())).count();
    t.rows = rows;
    t.note("grid_sector", sector.name());
    t.note("omega1", "-sum_k E_k over the momentum grid (extensive)");
    t.note("ising_omega1", "-1/2 sum_k eps_k of the matched transverse-field Ising model");
    t.note("phi_step", h);
    Ok(t)
}

fn gap(n: usize, r: f64, phis: &[f64], sector: Sector) -> Result<Table> {
    let g = grid(n, sector)?;
    let mut t = Table::new(&["phi", "delta", "status"]);
    t.rows = phis
        .par_iter()
        .map(|&phi| vec![phi.into(), spectral_gap(Couplings::from_polar(r, phi), &g).into(), Cell::Text("ok".into())])
        .collect();
    t.note("grid_sector", sector.name());
    t.note("delta", "min_k E_k");
    Ok(t)
}

fn coeffs(pairs: &[Couplings], l_max: usize, quad: usize) -> Table {
    let blocks: Vec<Vec<Vec<Cell>>> = pairs
        .par_iter()
        .map(|&c| match fourier_coeffs(c, l_max, quad) {
            Ok(f) => (0..=l_max)
                .map(|l| {
                    let bound = if l == 0 { f64::NAN } else { f.decay_bound(l) };
                    vec![c.theta.into(), c.chi.into(), l.into(), f.a[l].into(), bound.into(), Cell::Text("ok".into())]
                })
                .collect(),
            Err(e) => vec![vec![c.theta.into(), c.chi.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Text(format!("error: {e}"))]],
        })
        .collect();
    let mut t = Table::new(&["theta", "chi", "l", "a_l", "bound", "status"]);
    for b in blocks {
        t.failed_points += matches!(b[0][2], Cell::Empty) as usize;
        t.rows.extend(b);
    }
    t.note("quadrature", format!("trapezoid on [0, pi], {quad} intervals"));
    t.note("bound", "a_1/(sin theta sin chi) * (sin theta sin chi)^l");
    t
}

fn dense_sweep(q: usize, axis: &SweepAxis, periodic: bool) -> Table {
    let (name, points): (&str, Vec<(f64, Couplings)>) = match axis {
        SweepAxis::Polar { r, phis } => ("phi", phis.iter().map(|&p| (p, Couplings::from_polar(*r, p))).collect()),
        SweepAxis::Theta { chi, thetas } => ("theta", thetas.iter().map(|&t| (t, Couplings::new(t, *chi))).collect()),
    };
    let dim = 1usize << q;
    let mut header = vec![name.to_string()];
    header.extend((0..dim).map(|i| format!("e_{i}")));
    header.push("status".into());
    let results: Vec<Result<EigenDecomp>> =
        points.par_iter().map(|&(_, c)| build_map(c, q, periodic).and_then(|u| eigendecompose(&u))).collect();
    let mut t = Table { header, ..Table::default() };
    for ((x, _), res) in points.iter().zip(&results) {
        let mut row = vec![Cell::Float(*x)];
        match res {
            Ok(e) => row.extend(e.phases.iter().map(|&p| Cell::Float(p))),
            Err(_) => row.extend((0..dim).map(|_| Cell::Float(f64::NAN))),
        }
        row.push(status_cell(res));
        t.failed_points += res.is_err() as usize;
        t.rows.push(row);
    }
    t.note("levels", "eigenphases E_n ascending in (-pi, pi], U v = exp(-iE) v");
    t.note("boundary", if periodic { "periodic" } else { "open" });
    t
}

fn meta(q: usize, c: Couplings, basis: Option<usize>, state: &str) -> SeriesMeta {
    SeriesMeta { n_qubits: q, theta: c.theta, chi: c.chi, basis_index: basis, initial_state: state.into() }
}

fn initial_state(q: usize, s: &InitialState, seed: u64) -> Result<SpinState> {
    match s {
        InitialState::Random => SpinState::random(q, seed),
        InitialState::Uniform => SpinState::uniform(q),
        InitialState::Ghz => SpinState::ghz(q),
        InitialState::Basis(i) => SpinState::basis(q, *i),
    }
}

fn spectroscopy(q: usize, chi: f64, thetas: &[f64], periodic: bool, s: &SpectroSettings) -> Table {
    let blocks: Vec<Result<Vec<(f64, f64)>>> = thetas
        .par_iter()
        .map(|&theta| {
            let c = Couplings::new(theta, chi);
            let u = build_map(c, q, periodic)?;
            let psi = initial_state(q, &s.state, s.seed)?;
            let mut series = simulate_series(&u, &psi, s.basis, s.samples, s.k_int)?;
            series.meta = meta(q, c, Some(s.basis), &s.state.to_string());
            let spec = dft(&series)?;
            let mut bins: Vec<(f64, f64)> = spec.frequencies.iter().copied().zip(spec.magnitudes.iter().copied()).collect();
            bins.sort_by(|a, b| a.0.total_cmp(&b.0));
            Ok(bins)
        })
        .collect();
    let mut t = Table::new(&["theta", "bin_freq", "magnitude", "status"]);
    for (theta, b) in thetas.iter().zip(&blocks) {
        match b {
            Ok(bins) => {
                for &(f, m) in bins {
                    t.rows.push(vec![(*theta).into(), f.into(), m.into(), Cell::Text("ok".into())]);
                }
            }
            Err(e) => {
                t.failed_points += 1;
                t.rows.push(vec![(*theta).into(), Cell::Empty, Cell::Empty, Cell::Text(format!("error: {e}"))]);
            }
        }
    }
    t.note("series", format!("|<{}|U^m|psi>|^2, psi = {}", s.basis, s.state));
    t.note("magnitude", "|sum_m x_m exp(-i w m)|, bins ascending in (-pi, pi]");
    t.note("k_int", s.k_int);
    t
}

fn reconstruct(q: usize, c: Couplings, periodic: bool, s: &SpectroSettings, init: InitMode) -> Result<Table> {
    check_aliasing(c.theta, c.chi, q, s.k_int)?;
    let u = build_map(c, q, periodic)?;
    let e = eigendecompose(&u)?;
    let psi = initial_state(q, &s.state, s.seed)?;
    let series = crate::spectroscopy::simulate_series_from(&e, &u, &psi, s.basis, s.samples)?;
    let spec = dft(&series)?;
    let mut opts = ReconstructOptions::new(1 << q);
    let mut init_warnings = Vec::new();
    opts.init = match init {
        InitMode::Auto => LevelInit::Auto,
        InitMode::Traces => {
            let (re, im) = controlled_u_series(&e, s.samples, meta(q, c, None, "maximally mixed"))?;
            let guess = reconstruct_from_traces(&re, &im, TraceOptions::default())?;
            init_warnings = guess.warnings.clone();
            if guess.levels.len() != 1 << q {
                return Err(QptError::RankDeficient {
                    levels: 1 << q,
                    detail: format!("trace initialisation found {} levels; try --init auto", guess.levels.len()),
                });
            }
            LevelInit::Levels(guess.levels)
        }
    };
    let rec = reconstruct_levels(&spec, &opts)?;
    let rms = crate::spectroscopy::gauge_aligned_rms(&rec.levels, &e.phases);
    let mut t = Table::new(&["level_index", "energy", "weight", "residual_norm"]);
    let res = rec.residual_norm.unwrap_or(f64::NAN);
    for (i, (lv, w)) in rec.levels.iter().zip(&rec.weights).enumerate() {
        t.rows.push(vec![i.into(), (*lv).into(), (*w).into(), res.into()]);
    }
    t.note("gauge", "E_0 = 0; sign chosen so the strongest transition of the dominant level points upward");
    t.note(
        "init",
        match init {
            InitMode::Auto => "auto",
            InitMode::Traces => "traces",
        },
    );
    t.note("iterations", rec.iterations);
    t.note("rms_vs_dense", format!("{rms:.3e}"));
    for w in init_warnings.iter().chain(&rec.warnings) {
        t.note("warning", w);
    }
    Ok(t)
}

/// Pair two sorted circular multisets by the rotation that minimises the worst gap.
fn align(dense: &[f64], analytic: &[f64]) -> Vec<(f64, f64)> {
    let n = dense.len();
    let worst = |s: usize| (0..n).map(|i| wrap_phase(dense[(i + s) % n] - analytic[i]).abs()).fold(0.0, f64::max);
    let best = (0..n).min_by(|&a, &b| worst(a).total_cmp(&worst(b))).unwrap_or(0);
    (0..n).map(|i| (dense[(i + best) % n], analytic[i])).collect()
}

fn crosscheck(q: usize, c: Couplings) -> Result<Table> {
    let mut dense = sector_phases(&build_map(c, q, true)?, Parity::Even)?;
    let mut analytic: Vec<f64> = assembled_sector_phases(c, q, Parity::Even)?.into_iter().map(wrap_phase).collect();
    if dense.len() != analytic.len() {
        return Err(QptError::InvalidInput(format!("sector sizes differ: {} vs {}", dense.len(), analytic.len())));
    }
    dense.sort_by(f64::total_cmp);
    analytic.sort_by(f64::total_cmp);
    let mut t = Table::new(&["k", "phase_dense", "phase_analytic", "diff"]);
    let mut worst: f64 = 0.0;
    for (i, (d, a)) in align(&dense, &analytic).into_iter().enumerate() {
        let diff = wrap_phase(d - a);
        worst = worst.max(diff.abs());
        t.rows.push(vec![i.into(), d.into(), a.into(), diff.into()]);
    }
    t.note("sector", "even parity of prod sigma_x; analytic side from antiperiodic pair blocks");
    t.note("k", "index into the sorted even-sector eigenphase multiset");
    t.note("max_abs_diff", format!("{worst:.3e}"));
    Ok(t)
}
