//! CSV and JSON artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! values always produce equal bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anderson::OnsiteField;
use crate::analysis::ScalingPoint;
use crate::classical::Moments;
use crate::distribution::{MomentumDistribution, ObservableSeries};
use crate::error::Result;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// JSON payload with the code version and wall-clock time of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar<T> {
    pub code_version: String,
    pub wall_time_s: f64,
    #[serde(flatten)]
    pub data: T,
}

impl<T> Sidecar<T> {
    pub fn new(data: T, wall_time_s: f64) -> Self {
        Sidecar {
            code_version: CODE_VERSION.to_string(),
            wall_time_s,
            data,
        }
    }
}

/// Columns `m, p_over_2hbarkL, prob`; momentum is `m + beta`.
pub fn distribution_csv(dist: &MomentumDistribution, beta: f64) -> String {
    let mut s = String::from("m,p_over_2hbarkL,prob\n");
    for (m, p) in dist.sites() {
        let _ = writeln!(s, "{m},{},{p}", m as f64 + beta);
    }
    s
}

/// Parses the output of [`distribution_csv`] back into `(m, prob)` pairs.
pub fn parse_distribution_csv(text: &str) -> Result<Vec<(i64, f64)>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || crate::Error::InsufficientData(format!("malformed distribution row {line:?}"));
            if cols.len() != 3 {
                return Err(bad());
            }
            let m = cols[0].parse().map_err(|_| bad())?;
            let p = cols[2].parse().map_err(|_| bad())?;
            Ok((m, p))
        })
        .collect()
}

/// Columns `t, p2_mean, pi0, edge_mass`.
pub fn observables_csv(series: &ObservableSeries) -> String {
    let mut s = String::from("t,p2_mean,pi0,edge_mass\n");
    for i in 0..series.len() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            series.times[i], series.p2_mean[i], series.pi0[i], series.edge_mass[i]
        );
    }
    s
}

/// Columns `t, p1sq, p2sq, p1p2`.
pub fn moments_csv(m: &Moments) -> String {
    let mut s = String::from("t,p1sq,p2sq,p1p2\n");
    for i in 0..m.t.len() {
        let _ = writeln!(s, "{},{},{},{}", m.t[i], m.p1sq[i], m.p2sq[i], m.p1p2[i]);
    }
    s
}

/// Columns `x, y, K, hbar, epsilon, t`.
pub fn scaling_csv(points: &[ScalingPoint]) -> String {
    let mut s = String::from("x,y,K,hbar,epsilon,t\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{},{},{}", p.x, p.y, p.k, p.hbar_eff, p.epsilon, p.t);
    }
    s
}

/// Grid layout: header row of `m2` values, then one row per `m1`.
pub fn onsite_csv(field: &OnsiteField) -> String {
    let mut s = String::from("m1\\m2");
    for b in 0..field.n2 {
        let _ = write!(s, ",{}", field.m2_start + b as i64);
    }
    s.push('\n');
    for a in 0..field.n1 {
        let _ = write!(s, "{}", field.m1_start + a as i64);
        for b in 0..field.n2 {
            let _ = write!(s, ",{}", field.get(a, b));
        }
        s.push('\n');
    }
    s
}
