//! Command-line front end.
//!
//! Every command evaluates its grid in a worker pool, emits rows in grid order and writes
//! a `<out>.manifest` sidecar before the CSV. Grid commands carry a trailing `status`
//! column; a failed point becomes an error row and the run continues.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

pub use commands::run_job;
pub use config::{parse_values, resolve, CommandKind, Job, Params, RunConfig};
pub use output::{read_manifest, write_csv, Cell, Table};

use crate::error::{QptError, Result};

const AFTER_HELP: &str = "\
Value lists (--phi, --theta, --chi) take a number, a comma list a,b,c, or start:end:count.
Ranges exclude the end point: 0:1.5708:300 gives 300 points starting at 0.
Couplings are (theta, chi) or polar (r, phi) with theta = r cos(phi), chi = r sin(phi).
The map is U = ZZ(chi) X(theta) with the field layer applied first.
Flags override values from --config; unknown keys in the file are rejected.
Worker count: --workers, else QPT_WORKERS, else the number of cores.";

#[derive(Debug, Parser)]
#[command(name = "qpt", version, about = "Floquet spin-chain phase-diagram sweeps and spectroscopy", long_about = None, after_help = AFTER_HELP)]
pub struct Cli {
    /// What to compute.
    #[arg(value_enum)]
    pub command: CommandKind,
    /// TOML file with default parameters (same names as the flags, snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: Params,
}

/// Result of a completed run.
#[derive(Debug)]
pub struct RunReport {
    pub table: Table,
    pub manifest: Option<PathBuf>,
}

impl RunReport {
    pub fn all_ok(&self) -> bool {
        self.table.failed_points == 0
    }
}

/// Manifest entries for a run: config echo, conventions, then derived facts.
pub fn manifest_entries(cfg: &RunConfig, table: &Table) -> Vec<(String, String)> {
    let mut out = vec![("command".to_string(), cfg.command.to_string()), ("version".to_string(), env!("CARGO_PKG_VERSION").to_string())];
    if let Ok(toml::Value::Table(t)) = toml::Value::try_from(&cfg.params) {
        for (k, v) in t {
            let v = match v {
                toml::Value::String(s) => s,
                other => other.to_string(),
            };
            out.push((format!("param.{k}"), v));
        }
    }
    out.push(("workers".into(), cfg.workers.to_string()));
    out.push(("layer_order".into(), "U = ZZ(chi) X(theta), X applied first".into()));
    out.push(("phase_convention".into(), "U v = exp(-iE) v, E in (-pi, pi]".into()));
    out.push(("polar".into(), "theta = r cos(phi), chi = r sin(phi)".into()));
    out.push(("ranges".into(), "start:end:count excludes end".into()));
    for (k, v) in &table.derived {
        out.push((format!("derived.{k}"), v.clone()));
    }
    out.push(("rows".into(), table.rows.len().to_string()));
    out.push(("failed_points".into(), table.failed_points.to_string()));
    out
}

/// Compute the table inside a pool of `cfg.workers` threads.
pub fn compute(cfg: &RunConfig) -> Result<Table> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| QptError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| run_job(&cfg.job))
}

/// Compute, then write manifest, CSV and the wall time, in that order.
pub fn execute(cfg: &RunConfig) -> Result<RunReport> {
    let start = Instant::now();
    let table = compute(cfg)?;
    let manifest = match &cfg.out {
        Some(path) => {
            let m = output::manifest_path(path);
            output::write_manifest(&m, &manifest_entries(cfg, &table))?;
            output::write_csv_file(&table, path)?;
            output::append_manifest(&m, "wall_time_s", &format!("{:.3}", start.elapsed().as_secs_f64()))?;
            Some(m)
        }
        None => {
            write_csv(&table, std::io::stdout().lock())?;
            None
        }
    };
    Ok(RunReport { table, manifest })
}

/// Parse arguments, run, and return the process exit code.
///
/// 0: every point succeeded. 1: a point or the run failed. 2: usage or config error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let file = match cli.config.as_deref().map(Params::from_toml_file).transpose() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let env = std::env::var("QPT_WORKERS").ok();
    let cfg = match resolve(cli.command, &cli.params, file.as_ref(), env.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match execute(&cfg) {
        Ok(report) if report.all_ok() => 0,
        Ok(report) => {
            eprintln!("error: {} of the grid points failed; see the status column", report.table.failed_points);
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
