//! CSV rendering and the run-metadata sidecar.
//!
//! Numbers use five significant digits in the tables' style
//! (`7.4120e+00`); absent values are `-`. Nothing time-dependent goes into
//! the CSV, so identical specs give byte-identical files. Wall time and other
//! run information live in `<csv>.meta.toml`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use nepv_core::rng::PRNG_NAME;

use crate::config::ExperimentSpec;
use crate::error::CliError;
use crate::experiment::ResultRow;

/// Column order is part of the output format; append new columns at the end.
pub const CSV_COLUMNS: [&str; 24] = [
    "kind",
    "replicate",
    "seed",
    "h",
    "beta",
    "eps",
    "eps2",
    "delta_target",
    "delta",
    "l",
    "g",
    "d",
    "g_over_d",
    "kappa",
    "chi",
    "xi_star",
    "tau_star",
    "gamma_star",
    "residual",
    "iterations",
    "converged",
    "d_method",
    "notes",
    "status",
];

pub const ABSENT: &str = "-";

/// `x` with five significant digits and a signed two-digit exponent.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.4e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn num(x: Option<f64>) -> String {
    x.map_or_else(|| ABSENT.to_string(), format_number)
}

fn int(x: Option<usize>) -> String {
    x.map_or_else(|| ABSENT.to_string(), |v| v.to_string())
}

/// RFC 4180 quoting for fields that need it.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn row_fields(r: &ResultRow) -> Vec<String> {
    let notes = if r.notes.is_empty() {
        ABSENT.to_string()
    } else {
        r.notes.join("; ")
    };
    vec![
        r.kind.to_string(),
        r.replicate.to_string(),
        r.seed.to_string(),
        num(r.h),
        num(r.beta),
        num(r.eps),
        num(r.eps2),
        num(r.delta_target),
        num(r.delta),
        int(r.l),
        num(r.g),
        num(r.d),
        num(r.g_over_d),
        num(r.kappa),
        num(r.chi),
        num(r.xi_star),
        num(r.tau_star),
        num(r.gamma_star),
        num(r.residual),
        int(r.iterations),
        r.converged.map_or_else(|| ABSENT.to_string(), |c| c.to_string()),
        r.d_method.clone().unwrap_or_else(|| ABSENT.to_string()),
        field(&notes),
        if r.failed { "failed" } else { "ok" }.to_string(),
    ]
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&row_fields(r).join(","));
        out.push('\n');
    }
    out
}

/// Sidecar path for a CSV file: `<csv>.meta.toml`.
pub fn meta_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".meta.toml");
    PathBuf::from(name)
}

/// The resolved spec as TOML, preceded by comment lines with run information.
/// Parsing it back yields the spec.
pub fn metadata(spec: &ExperimentSpec, rows: &[ResultRow], workers: usize, wall_time: Duration) -> String {
    let failed = rows.iter().filter(|r| r.failed).count();
    let mut out = String::new();
    let _ = writeln!(out, "# nepv {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# prng: {PRNG_NAME}");
    let _ = writeln!(
        out,
        "# replicate seeds: split_seed(master = {}, replicate)",
        spec.seed()
    );
    let _ = writeln!(out, "# rows: {} ({failed} failed)", rows.len());
    let _ = writeln!(out, "# workers: {workers}");
    let _ = writeln!(out, "# wall_time_s: {:.3}", wall_time.as_secs_f64());
    out.push('\n');
    out.push_str(&spec.to_toml());
    out
}

pub fn write_outputs(
    csv_path: &Path,
    spec: &ExperimentSpec,
    rows: &[ResultRow],
    workers: usize,
    wall_time: Duration,
) -> Result<(), CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    std::fs::write(csv_path, to_csv(rows)).map_err(|e| io(csv_path, e))?;
    let meta = meta_path(csv_path);
    std::fs::write(&meta, metadata(spec, rows, workers, wall_time)).map_err(|e| io(&meta, e))
}
