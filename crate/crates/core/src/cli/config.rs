//! Flag and config-file parsing into a validated [`RunConfig`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize};

use crate::dense::GroundSelection;
use crate::error::{QptError, Result};
use crate::momentum::{Couplings, Sector};
use crate::scaling::uniform_grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CommandKind {
    SweepEnergy,
    Gap,
    Coeffs,
    DenseSweep,
    Entanglement,
    Spectroscopy,
    Reconstruct,
    Traces,
    Crosscheck,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::SweepEnergy => "sweep-energy",
            CommandKind::Gap => "gap",
            CommandKind::Coeffs => "coeffs",
            CommandKind::DenseSweep => "dense-sweep",
            CommandKind::Entanglement => "entanglement",
            CommandKind::Spectroscopy => "spectroscopy",
            CommandKind::Reconstruct => "reconstruct",
            CommandKind::Traces => "traces",
            CommandKind::Crosscheck => "crosscheck",
        }
    }

    /// Parameter keys the command reads, besides `out` and `workers`.
    fn keys(&self) -> &'static [&'static str] {
        const SPECTRO_KEYS: &[&str] = &["qubits", "theta", "chi", "r", "phi", "samples", "k_int", "seed", "basis", "state", "open"];
        match self {
            CommandKind::SweepEnergy => &["n", "r", "phi", "sector", "h"],
            CommandKind::Gap => &["n", "r", "phi", "sector"],
            CommandKind::Coeffs => &["theta", "chi", "diagonal", "l_max", "quad"],
            CommandKind::DenseSweep => &["qubits", "r", "phi", "theta", "chi", "open"],
            CommandKind::Entanglement => &["qubits", "r", "phi", "open", "ground"],
            CommandKind::Spectroscopy => SPECTRO_KEYS,
            CommandKind::Reconstruct => {
                &["qubits", "theta", "chi", "r", "phi", "samples", "k_int", "seed", "basis", "state", "open", "init"]
            }
            CommandKind::Traces => &["qubits", "theta", "chi", "r", "phi", "samples", "open"],
            CommandKind::Crosscheck => &["qubits", "theta", "chi", "r", "phi"],
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw parameters as given on the command line or in a TOML file.
///
/// Value lists (`phi`, `theta`, `chi`) accept a number, a comma-separated list, or
/// `start:end:count` with `end` excluded.
#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Chain length for momentum-space commands.
    #[arg(long)]
    pub n: Option<usize>,
    /// Qubit count for dense commands.
    #[arg(long)]
    pub qubits: Option<usize>,
    /// Polar radius of (θ, χ).
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
    /// Polar angle: value, list a,b,c, or start:end:count (end excluded).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_values")]
    pub phi: Option<String>,
    /// Transverse-field angle: value, list, or start:end:count.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_values")]
    pub theta: Option<String>,
    /// Exchange angle: value, list, or start:end:count.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_values")]
    pub chi: Option<String>,
    /// Momentum grid: periodic or antiperiodic.
    #[arg(long)]
    pub sector: Option<String>,
    /// Finite-difference step in φ.
    #[arg(long)]
    pub h: Option<f64>,
    /// Use θ = χ pairs from the theta list instead of the θ × χ product.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub diagonal: Option<bool>,
    /// Largest Fourier index.
    #[arg(long)]
    pub l_max: Option<usize>,
    /// Quadrature intervals on [0, π].
    #[arg(long)]
    pub quad: Option<usize>,
    /// Open boundary conditions (default periodic).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub open: Option<bool>,
    /// Number of time samples M.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Aliasing guard: couplings must satisfy max(|θ|, |χ|) < k_int/N.
    #[arg(long)]
    pub k_int: Option<f64>,
    /// Seed for random initial states.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Measured basis state index.
    #[arg(long)]
    pub basis: Option<usize>,
    /// Initial state: random, uniform, ghz, or basis:<index>.
    #[arg(long)]
    pub state: Option<String>,
    /// Level initialisation for the fit: traces or auto.
    #[arg(long)]
    pub init: Option<String>,
    /// Ground-state selection: vacuum or lowest.
    #[arg(long)]
    pub ground: Option<String>,
    /// Output CSV path; stdout when absent (no manifest then).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; falls back to QPT_WORKERS, then the core count.
    #[arg(long)]
    pub workers: Option<usize>,
}

fn de_values<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Int(i64),
        Text(String),
        List(Vec<f64>),
    }
    Ok(Some(match Raw::deserialize(d)? {
        Raw::Num(v) => format!("{v:?}"),
        Raw::Int(v) => v.to_string(),
        Raw::Text(s) => s,
        Raw::List(v) => v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","),
    }))
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($f:ident),*) => {
        Params { $($f: $top.$f.clone().or_else(|| $base.$f.clone()),)* }
    };
}

macro_rules! present_keys {
    ($p:expr, $($f:ident),*) => {{
        let mut v: Vec<&'static str> = Vec::new();
        $(if $p.$f.is_some() { v.push(stringify!($f)); })*
        v
    }};
}

impl Params {
    /// `self` wins over `base` field by field.
    pub fn overlay(&self, base: &Params) -> Params {
        overlay!(
            self, base, n, qubits, r, phi, theta, chi, sector, h, diagonal, l_max, quad, open, samples, k_int, seed, basis, state, init,
            ground, out, workers
        )
    }

    fn present(&self) -> Vec<&'static str> {
        present_keys!(
            self, n, qubits, r, phi, theta, chi, sector, h, diagonal, l_max, quad, open, samples, k_int, seed, basis, state, init, ground,
            out, workers
        )
    }

    pub fn from_toml_file(path: &Path) -> Result<Params> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| QptError::Config(format!("{}: {e}", path.display())))
    }
}

/// Parse a value list: `x`, `a,b,c`, or `start:end:count` with `end` excluded.
pub fn parse_values(name: &str, text: &str) -> Result<Vec<f64>> {
    let bad = |why: String| QptError::Config(format!("--{name} {text:?}: {why}"));
    let num = |s: &str| -> Result<f64> {
        let v = f64::from_str(s.trim()).map_err(|_| bad(format!("{s:?} is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad("values must be finite".into()))
        }
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.len() {
        1 => text.split(',').map(num).collect(),
        3 => {
            let start = num(parts[0])?;
            let end = num(parts[1])?;
            let count = usize::from_str(parts[2].trim()).map_err(|_| bad("count must be a non-negative integer".into()))?;
            if count == 0 || start == end {
                return Err(bad("empty range".into()));
            }
            Ok(uniform_grid(start, end, count))
        }
        _ => Err(bad("expected a value, a list, or start:end:count".into())),
    }
}

/// How a dense sweep is parameterised.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// φ grid at fixed r.
    Polar { r: f64, phis: Vec<f64> },
    /// θ grid at fixed χ.
    Theta { chi: f64, thetas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Random,
    Uniform,
    Ghz,
    Basis(usize),
}

impl FromStr for InitialState {
    type Err = QptError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(InitialState::Random),
            "uniform" => Ok(InitialState::Uniform),
            "ghz" => Ok(InitialState::Ghz),
            _ => match s.strip_prefix("basis:").map(usize::from_str) {
                Some(Ok(i)) => Ok(InitialState::Basis(i)),
                _ => Err(QptError::Config(format!("unknown --state {s:?} (random, uniform, ghz, basis:<index>)"))),
            },
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::Random => f.write_str("random"),
            InitialState::Uniform => f.write_str("uniform"),
            InitialState::Ghz => f.write_str("ghz"),
            InitialState::Basis(i) => write!(f, "basis:{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Traces,
    Auto,
}

/// Settings of the spectroscopy-family commands.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectroSettings {
    pub samples: usize,
    pub k_int: f64,
    pub seed: u64,
    pub basis: usize,
    pub state: InitialState,
}

/// Per-command resolved parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    SweepEnergy { n: usize, r: f64, phis: Vec<f64>, sector: Sector, h: f64 },
    Gap { n: usize, r: f64, phis: Vec<f64>, sector: Sector },
    Coeffs { pairs: Vec<Couplings>, l_max: usize, quad: usize },
    DenseSweep { qubits: usize, axis: SweepAxis, periodic: bool },
    Entanglement { qubits: usize, r: f64, phis: Vec<f64>, periodic: bool, ground: GroundSelection },
    Spectroscopy { qubits: usize, chi: f64, thetas: Vec<f64>, periodic: bool, settings: SpectroSettings },
    Reconstruct { qubits: usize, couplings: Couplings, periodic: bool, settings: SpectroSettings, init: InitMode },
    Traces { qubits: usize, couplings: Couplings, periodic: bool, samples: usize },
    Crosscheck { qubits: usize, couplings: Couplings },
}

/// A validated run: the command, its resolved job and the raw parameters echoed to the manifest.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub job: Job,
    pub params: Params,
    pub out: Option<PathBuf>,
    pub workers: usize,
}

pub const DEFAULT_SAMPLES: usize = 2048;
pub const DEFAULT_L_MAX: usize = 10;
pub const DEFAULT_QUAD: usize = 4096;

/// Merge file and flags and resolve the job. `env_workers` is the raw `QPT_WORKERS` value.
pub fn resolve(command: CommandKind, flags: &Params, file: Option<&Params>, env_workers: Option<&str>) -> Result<RunConfig> {
    let p = match file {
        Some(f) => flags.overlay(f),
        None => flags.clone(),
    };
    let allowed = command.keys();
    for key in p.present() {
        if key != "out" && key != "workers" && !allowed.contains(&key) {
            return Err(QptError::Config(format!("parameter {key} is not used by {command}")));
        }
    }
    let workers = match (p.workers, env_workers) {
        (Some(0), _) => return Err(QptError::Config("workers must be at least 1".into())),
        (Some(w), _) => w,
        (None, Some(s)) => match usize::from_str(s.trim()) {
            Ok(w) if w > 0 => w,
            _ => return Err(QptError::Config(format!("QPT_WORKERS={s:?} is not a positive integer"))),
        },
        (None, None) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let job = resolve_job(command, &p)?;
    Ok(RunConfig { command, job, out: p.out.clone(), params: p, workers })
}

fn need<T: Clone>(v: &Option<T>, name: &str, command: CommandKind) -> Result<T> {
    v.clone().ok_or_else(|| QptError::Config(format!("{command} needs --{}", name.replace('_', "-"))))
}

fn positive(v: f64, name: &str) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(QptError::Config(format!("--{name} must be positive and finite")))
    }
}

fn finite(v: f64, name: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QptError::Config(format!("--{name} must be finite")))
    }
}

fn single(name: &str, text: &str) -> Result<f64> {
    match parse_values(name, text)?.as_slice() {
        [v] => Ok(*v),
        _ => Err(QptError::Config(format!("--{name} takes a single value here"))),
    }
}

fn values(v: &Option<String>, name: &str, command: CommandKind) -> Result<Vec<f64>> {
    parse_values(name, &need(v, name, command)?)
}

fn derivative_grid(phis: Vec<f64>, command: CommandKind) -> Result<Vec<f64>> {
    if phis.len() < 2 {
        return Err(QptError::Config(format!("{command} needs at least 2 phi points for derivatives")));
    }
    Ok(phis)
}

fn sector(p: &Params) -> Result<Sector> {
    p.sector.as_deref().map_or(Ok(Sector::Periodic), |s| Sector::from_str(s).map_err(|e| QptError::Config(e.to_string())))
}

fn conflict(p: &Params) -> Result<()> {
    if (p.theta.is_some() || p.chi.is_some()) && (p.r.is_some() || p.phi.is_some()) {
        return Err(QptError::Config("give couplings either as --theta/--chi or as --r/--phi, not both".into()));
    }
    Ok(())
}

/// A single (θ, χ) point from either parameterisation.
fn point(p: &Params, command: CommandKind) -> Result<Couplings> {
    conflict(p)?;
    if p.r.is_some() || p.phi.is_some() {
        let r = finite(need(&p.r, "r", command)?, "r")?;
        let phi = single("phi", &need(&p.phi, "phi", command)?)?;
        return Ok(Couplings::from_polar(r, phi));
    }
    let theta = single("theta", &need(&p.theta, "theta", command)?)?;
    let chi = single("chi", &need(&p.chi, "chi", command)?)?;
    Ok(Couplings::new(theta, chi))
}

fn polar_grid(p: &Params, command: CommandKind) -> Result<(f64, Vec<f64>)> {
    conflict(p)?;
    let r = finite(need(&p.r, "r", command)?, "r")?;
    Ok((r, values(&p.phi, "phi", command)?))
}

fn qubits(p: &Params, command: CommandKind) -> Result<usize> {
    let q = need(&p.qubits, "qubits", command)?;
    crate::dense::check_capacity(q, 2)?;
    Ok(q)
}

fn spectro_settings(p: &Params, q: usize) -> Result<SpectroSettings> {
    let samples = p.samples.unwrap_or(DEFAULT_SAMPLES);
    if samples < 2 {
        return Err(QptError::Config("--samples must be at least 2".into()));
    }
    let basis = p.basis.unwrap_or(1);
    if basis >= 1 << q {
        return Err(QptError::Config(format!("--basis {basis} is out of range for {q} qubits")));
    }
    let state = p.state.as_deref().map_or(Ok(InitialState::Random), InitialState::from_str)?;
    if let InitialState::Basis(i) = state {
        if i >= 1 << q {
            return Err(QptError::Config(format!("--state basis:{i} is out of range for {q} qubits")));
        }
    }
    Ok(SpectroSettings {
        samples,
        k_int: positive(p.k_int.unwrap_or(crate::dense::DEFAULT_K_INT), "k-int")?,
        seed: p.seed.unwrap_or(0),
        basis,
        state,
    })
}

fn resolve_job(command: CommandKind, p: &Params) -> Result<Job> {
    let periodic = !p.open.unwrap_or(false);
    Ok(match command {
        CommandKind::SweepEnergy => {
            let (r, phis) = polar_grid(p, command)?;
            let n = need(&p.n, "n", command)?;
            let h = positive(p.h.unwrap_or(crate::momentum::DEFAULT_PHI_STEP), "h")?;
            Job::SweepEnergy { n, r, phis: derivative_grid(phis, command)?, sector: sector(p)?, h }
        }
        CommandKind::Gap => {
            let (r, phis) = polar_grid(p, command)?;
            Job::Gap { n: need(&p.n, "n", command)?, r, phis, sector: sector(p)? }
        }
        CommandKind::Coeffs => {
            let thetas = values(&p.theta, "theta", command)?;
            let pairs = if p.diagonal.unwrap_or(false) {
                if p.chi.is_some() {
                    return Err(QptError::Config("--diagonal takes χ from --theta; drop --chi".into()));
                }
                thetas.iter().map(|&t| Couplings::new(t, t)).collect()
            } else {
                let chis = values(&p.chi, "chi", command)?;
                thetas.iter().flat_map(|&t| chis.iter().map(move |&c| Couplings::new(t, c))).collect()
            };
            let l_max = p.l_max.unwrap_or(DEFAULT_L_MAX);
            let quad = p.quad.unwrap_or(DEFAULT_QUAD.max(8 * l_max));
            Job::Coeffs { pairs, l_max, quad }
        }
        CommandKind::DenseSweep => {
            let q = qubits(p, command)?;
            let axis = if p.theta.is_some() {
                conflict(p)?;
                let chi = single("chi", &need(&p.chi, "chi", command)?)?;
                SweepAxis::Theta { chi, thetas: values(&p.theta, "theta", command)? }
            } else {
                let (r, phis) = polar_grid(p, command)?;
                SweepAxis::Polar { r, phis }
            };
            Job::DenseSweep { qubits: q, axis, periodic }
        }
        CommandKind::Entanglement => {
            let q = qubits(p, command)?;
            let (r, phis) = polar_grid(p, command)?;
            let ground = match p.ground.as_deref() {
                Some("vacuum") => GroundSelection::Vacuum,
                Some("lowest") => GroundSelection::LowestPhase,
                Some(other) => return Err(QptError::Config(format!("unknown --ground {other:?} (vacuum, lowest)"))),
                None if periodic && q % 2 == 0 => GroundSelection::Vacuum,
                None => GroundSelection::LowestPhase,
            };
            if ground == GroundSelection::Vacuum && !(periodic && q % 2 == 0) {
                return Err(QptError::Config("--ground vacuum needs a periodic chain with an even qubit count".into()));
            }
            Job::Entanglement { qubits: q, r, phis: derivative_grid(phis, command)?, periodic, ground }
        }
        CommandKind::Spectroscopy => {
            let q = qubits(p, command)?;
            conflict(p)?;
            let (chi, thetas) = if p.r.is_some() || p.phi.is_some() {
                let c = point(p, command)?;
                (c.chi, vec![c.theta])
            } else {
                (single("chi", &need(&p.chi, "chi", command)?)?, values(&p.theta, "theta", command)?)
            };
            Job::Spectroscopy { qubits: q, chi, thetas, periodic, settings: spectro_settings(p, q)? }
        }
        CommandKind::Reconstruct => {
            let q = qubits(p, command)?;
            let init = match p.init.as_deref() {
                None | Some("traces") => InitMode::Traces,
                Some("auto") => InitMode::Auto,
                Some(other) => return Err(QptError::Config(format!("unknown --init {other:?} (traces, auto)"))),
            };
            Job::Reconstruct { qubits: q, couplings: point(p, command)?, periodic, settings: spectro_settings(p, q)?, init }
        }
        CommandKind::Traces => {
            let q = qubits(p, command)?;
            let samples = p.samples.unwrap_or(DEFAULT_SAMPLES);
            if samples < 2 {
                return Err(QptError::Config("--samples must be at least 2".into()));
            }
            Job::Traces { qubits: q, couplings: point(p, command)?, periodic, samples }
        }
        CommandKind::Crosscheck => {
            let q = qubits(p, command)?;
            if q % 2 != 0 || q < 2 {
                return Err(QptError::Config("crosscheck needs an even qubit count".into()));
            }
            Job::Crosscheck { qubits: q, couplings: point(p, command)? }
        }
    })
}
