//! Plot-ready tables and a text summary built from a sweep manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{scaling_fit, scaling_points, ScalingFit, ScalingPoint, ALPHA, DEFAULT_X_MAX};
use crate::error::Result;
use crate::io::{parse_distribution_csv, write_atomic, write_json};
use crate::stats::line_fit;
use crate::sweep::{CellRecord, CellStatus, Manifest};

pub const REPORT_DIR: &str = "report";
/// Sites below this probability are left out of the distribution table.
pub const TABLE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairFit {
    #[serde(rename = "K")]
    pub k: f64,
    pub hbar_eff: f64,
    pub n_points: usize,
    /// Slope of `ln E_kin` against `ε`.
    pub slope: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub n_cells: usize,
    pub completed: usize,
    pub failed: usize,
    pub pending: usize,
    pub missing_artifacts: Vec<String>,
    pub pair_fits: Vec<PairFit>,
    pub scaling: Option<ScalingFit>,
    pub files: Vec<String>,
}

fn pairs_in_order(cells: &[&CellRecord]) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for c in cells {
        let p = (c.params.k, c.params.hbar_eff);
        if !pairs.contains(&p) {
            pairs.push(p);
        }
    }
    pairs
}

/// Writes `report/` under `dir` from `dir/manifest.json`.
pub fn report(dir: &Path) -> Result<ReportSummary> {
    let manifest = Manifest::load(dir)?;
    report_from(dir, &manifest)
}

pub fn report_from(dir: &Path, manifest: &Manifest) -> Result<ReportSummary> {
    let mut missing = Vec::new();
    let completed: Vec<&CellRecord> = manifest
        .cells
        .iter()
        .filter(|c| c.status == CellStatus::Completed && c.result.is_some())
        .collect();
    for c in &completed {
        for a in &c.artifacts {
            if !dir.join(a).is_file() {
                missing.push(a.clone());
            }
        }
    }

    let mut fig1 = String::from("K,hbar,epsilon,t,m,prob\n");
    for c in &completed {
        for &t in &c.record_times {
            let Some(rel) = c.artifacts.iter().find(|a| a.ends_with(&format!("dist_t{t:05}.csv"))) else {
                continue;
            };
            let Ok(text) = fs::read_to_string(dir.join(rel)) else {
                continue;
            };
            let rows = match parse_distribution_csv(&text) {
                Ok(rows) => rows,
                Err(_) => {
                    missing.push(format!("{rel} (unreadable)"));
                    continue;
                }
            };
            for (m, p) in rows.into_iter().filter(|&(_, p)| p >= TABLE_FLOOR) {
                let _ = writeln!(fig1, "{},{},{},{t},{m},{p}", c.params.k, c.params.hbar_eff, c.params.epsilon);
            }
        }
    }

    let mut fig2 = String::from("K,hbar,epsilon,t,e_kin,ln_e_kin\n");
    let mut fig3 = String::from("x,y,K,hbar,epsilon,t,prediction\n");
    let mut pair_fits = Vec::new();
    let mut all_points: Vec<ScalingPoint> = Vec::new();
    for (k, h) in pairs_in_order(&completed) {
        let cells: Vec<&&CellRecord> = completed
            .iter()
            .filter(|c| c.params.k == k && c.params.hbar_eff == h)
            .collect();
        let mut energies = Vec::new();
        let mut t_final = 0;
        for c in &cells {
            let r = c.result.as_ref().expect("completed cells carry a result");
            t_final = r.t_final;
            energies.push((c.params.epsilon, r.e_kin_final));
            let _ = writeln!(
                fig2,
                "{k},{h},{},{},{},{}",
                c.params.epsilon,
                r.t_final,
                r.e_kin_final,
                r.e_kin_final.ln()
            );
        }
        if energies.len() >= 3 {
            let x: Vec<f64> = energies.iter().map(|e| e.0).collect();
            let y: Vec<f64> = energies.iter().map(|e| e.1.ln()).collect();
            if let Ok(f) = line_fit(&x, &y) {
                pair_fits.push(PairFit {
                    k,
                    hbar_eff: h,
                    n_points: x.len(),
                    slope: f.slope,
                    r_squared: f.r_squared,
                });
            }
        }
        if let Ok(points) = scaling_points(k, h, t_final, &energies) {
            for p in &points {
                let _ = writeln!(
                    fig3,
                    "{},{},{},{},{},{},{}",
                    p.x,
                    p.y,
                    p.k,
                    p.hbar_eff,
                    p.epsilon,
                    p.t,
                    (2.0 * ALPHA * p.x).exp()
                );
            }
            all_points.extend(points);
        }
    }
    let scaling = scaling_fit(&all_points, DEFAULT_X_MAX).ok();

    let summary = ReportSummary {
        n_cells: manifest.cells.len(),
        completed: manifest.count(CellStatus::Completed),
        failed: manifest.count(CellStatus::Failed),
        pending: manifest.count(CellStatus::Pending),
        missing_artifacts: missing,
        pair_fits,
        scaling,
        files: [
            "fig1_distributions.csv",
            "fig2_energy.csv",
            "fig3_scaling.csv",
            "summary.txt",
            "summary.json",
        ]
        .iter()
        .map(|f| format!("{REPORT_DIR}/{f}"))
        .collect(),
    };

    let out = dir.join(REPORT_DIR);
    write_atomic(&out.join("fig1_distributions.csv"), fig1.as_bytes())?;
    write_atomic(&out.join("fig2_energy.csv"), fig2.as_bytes())?;
    write_atomic(&out.join("fig3_scaling.csv"), fig3.as_bytes())?;
    write_atomic(&out.join("summary.txt"), summary_text(manifest, &summary).as_bytes())?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn summary_text(manifest: &Manifest, s: &ReportSummary) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "cells: {} total, {} completed, {} failed, {} pending",
        s.n_cells, s.completed, s.failed, s.pending
    );
    for c in manifest.cells.iter().filter(|c| c.status == CellStatus::Failed) {
        if let Some(e) = &c.error {
            let _ = writeln!(t, "failed {}: [{}] {}", c.id, e.kind, e.message);
        }
    }
    if !s.pair_fits.is_empty() {
        let _ = writeln!(t, "\nln E_kin vs epsilon:");
        for f in &s.pair_fits {
            let _ = writeln!(
                t,
                "  K={} hbar={}: slope {:.4}, R^2 {:.4} ({} points)",
                f.k, f.hbar_eff, f.slope, f.r_squared, f.n_points
            );
        }
    }
    match &s.scaling {
        Some(f) => {
            let _ = writeln!(
                t,
                "\nscaling: slope {:.4} +/- {:.4} over {} points with x <= {}; prediction 2*alpha = {:.4} ({:+.1}%); E_kin ratio span {:.2}",
                f.slope,
                f.stderr,
                f.n_points,
                f.x_max,
                2.0 * ALPHA,
                100.0 * f.deviation_from_prediction(),
                f.y_span
            );
        }
        None => {
            let _ = writeln!(t, "\nscaling: not enough points");
        }
    }
    if !s.missing_artifacts.is_empty() {
        let _ = writeln!(t, "\nmissing artifacts:");
        for m in &s.missing_artifacts {
            let _ = writeln!(t, "  {m}");
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{EnsembleSpec, SimParams};
    use crate::sweep::{run_sweep, SweepOptions, SweepSpec};

    #[test]
    fn empty_manifest_gives_empty_report() {
        let dir = tempfile::tempdir().unwrap();
        Manifest::empty().save(dir.path()).unwrap();
        let s = report(dir.path()).unwrap();
        assert_eq!(s.n_cells, 0);
        assert!(s.scaling.is_none());
        let fig3 = fs::read_to_string(dir.path().join("report/fig3_scaling.csv")).unwrap();
        assert_eq!(fig3, "x,y,K,hbar,epsilon,t,prediction\n");
    }

    #[test]
    fn tables_from_small_sweep() {
        let dir = tempfile::tempdir().unwrap();
        let base = SimParams::new(5.34, 2.89, 0.0).with_kicks(30).with_grid(256);
        let eps = [0.0, 0.12, 0.24, 0.36, 0.48, 0.6];
        let spec = SweepSpec::from_axes(base, &[5.34], &[2.89], &eps, EnsembleSpec::uniform(2, 3), dir.path());
        run_sweep(&spec, &SweepOptions::default()).unwrap();
        let a = report(dir.path()).unwrap();
        assert!(a.missing_artifacts.is_empty());
        assert_eq!(a.pair_fits.len(), 1);
        assert!(a.scaling.is_some());

        let fig3 = fs::read_to_string(dir.path().join("report/fig3_scaling.csv")).unwrap();
        let rows: Vec<Vec<f64>> = fig3
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0][1], 1.0);
        for r in &rows {
            assert!((r[6] - (2.0 * ALPHA * r[0]).exp()).abs() < 1e-12 * r[6]);
        }

        let before: Vec<Vec<u8>> = a.files.iter().map(|f| fs::read(dir.path().join(f)).unwrap()).collect();
        let b = report(dir.path()).unwrap();
        let after: Vec<Vec<u8>> = b.files.iter().map(|f| fs::read(dir.path().join(f)).unwrap()).collect();
        assert_eq!(before, after);

        let first_dist = dir.path().join(&Manifest::load(dir.path()).unwrap().cells[0].artifacts[1]);
        fs::remove_file(&first_dist).unwrap();
        let c = report(dir.path()).unwrap();
        assert_eq!(c.missing_artifacts.len(), 1);
    }
}
