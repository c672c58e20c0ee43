//! Parameter sweeps with a resumable on-disk manifest.
//!
//! Layout under the output directory:
//!
//! ```text
//! sweep.json                      the spec
//! manifest.json                   one record per cell, rewritten after each cell
//! cells/<id>/observables.csv
//! cells/<id>/dist_t<t>.csv        one per recording time
//! cells/<id>/cell.json            summary with code version and wall time
//! ```
//!
//! Every cell reuses the ensemble's master seed, so cells of one sweep see
//! the same `(β, φ₂)` draws and ratios between cells carry less noise.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_exponential, LocalizationFit};
use crate::error::{Error, Result};
use crate::io::{distribution_csv, observables_csv, write_atomic, write_json, Sidecar, CODE_VERSION};
use crate::params::{EnsembleSpec, RunConfig, SimParams, Warning};
use crate::quantum::{run_ensemble_adaptive, EnsembleRun};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPEC_FILE: &str = "sweep.json";
pub const DEFAULT_MAX_GRID: usize = crate::params::MAX_GRID_N;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPair {
    #[serde(rename = "K")]
    pub k: f64,
    pub hbar_eff: f64,
}

impl ParamPair {
    pub fn new(k: f64, hbar_eff: f64) -> Self {
        ParamPair { k, hbar_eff }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    /// Distributions at several `ε` for `K = 5.34, ħ = 2.89`.
    Fig1,
    /// `E_kin(ε)` at four `(K, ħ)` pairs.
    Fig2,
    /// Scaling campaign over `K/ħ ∈ [1.3, 2.5]`, `ħ ∈ {2.89, 3.2, 3.46}`.
    Fig3,
}

impl std::str::FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Recipe::Fig1),
            "fig2" => Ok(Recipe::Fig2),
            "fig3" => Ok(Recipe::Fig3),
            _ => Err(Error::invalid("recipe", format!("unknown recipe {s:?} (fig1, fig2, fig3)"))),
        }
    }
}

/// `ε = 0, step, 2·step, …` with `n` values, free of accumulated rounding.
pub fn epsilon_grid(step_hundredths: u32, n: u32) -> Vec<f64> {
    (0..n).map(|i| f64::from(i * step_hundredths) / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Source of every parameter not swept (`n_kicks`, `grid_n`, `omega2`, …).
    pub base: SimParams,
    pub pairs: Vec<ParamPair>,
    pub epsilons: Vec<f64>,
    pub record_times: Vec<usize>,
    pub ensemble: EnsembleSpec,
    /// Largest grid the adaptive runner may double to.
    pub max_grid: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl SweepSpec {
    /// Full product of `ks × hbars × epsilons`.
    pub fn from_axes(
        base: SimParams,
        ks: &[f64],
        hbars: &[f64],
        epsilons: &[f64],
        ensemble: EnsembleSpec,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        let pairs = ks
            .iter()
            .flat_map(|&k| hbars.iter().map(move |&h| ParamPair::new(k, h)))
            .collect();
        SweepSpec {
            record_times: fig_record_times(base.n_kicks),
            base,
            pairs,
            epsilons: epsilons.to_vec(),
            ensemble,
            max_grid: DEFAULT_MAX_GRID,
            out_dir: out_dir.into(),
        }
    }

    pub fn recipe(recipe: Recipe, base: SimParams, ensemble: EnsembleSpec, out_dir: impl Into<PathBuf>) -> Self {
        let (pairs, epsilons) = match recipe {
            Recipe::Fig1 => (vec![ParamPair::new(5.34, 2.89)], epsilon_grid(12, 6)),
            Recipe::Fig2 => (
                [5.34, 6.5]
                    .iter()
                    .flat_map(|&k| [2.89, 3.46].iter().map(move |&h| ParamPair::new(k, h)))
                    .collect(),
                epsilon_grid(6, 11),
            ),
            Recipe::Fig3 => {
                let mut pairs = Vec::new();
                for h in [2.89, 3.2, 3.46] {
                    for i in 0..12 {
                        let ratio = 1.3 + 1.2 * f64::from(i) / 11.0;
                        pairs.push(ParamPair::new(ratio * h, h));
                    }
                }
                (pairs, epsilon_grid(6, 11))
            }
        };
        SweepSpec {
            record_times: fig_record_times(base.n_kicks),
            base,
            pairs,
            epsilons,
            ensemble,
            max_grid: DEFAULT_MAX_GRID,
            out_dir: out_dir.into(),
        }
    }

    pub fn cell_params(&self) -> Vec<SimParams> {
        self.pairs
            .iter()
            .flat_map(|pair| {
                self.epsilons.iter().map(move |&epsilon| SimParams {
                    k: pair.k,
                    hbar_eff: pair.hbar_eff,
                    epsilon,
                    ..self.base
                })
            })
            .collect()
    }

    /// Validates every cell and the ensemble before anything runs.
    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        if self.pairs.is_empty() || self.epsilons.is_empty() {
            return Err(Error::invalid("sweep", "needs at least one (K, ħ) pair and one ε"));
        }
        for p in self.cell_params() {
            p.validate()?;
        }
        if self.record_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("record_times", "must be strictly increasing"));
        }
        if self.record_times.last().is_some_and(|&t| t > self.base.n_kicks) {
            return Err(Error::invalid("record_times", "exceed n_kicks"));
        }
        Ok(())
    }
}

/// Flat TOML sweep file: the run keys of [`RunConfig`] plus the swept axes.
///
/// ```toml
/// K = 5.34
/// hbar_eff = 2.89
/// epsilon = 0.0
/// n_kicks = 1000
/// grid_n = 1024
/// n_realizations = 100
/// master_seed = 1
/// epsilons = [0.0, 0.12, 0.24]
/// pairs = [{ K = 5.34, hbar_eff = 2.89 }, { K = 6.5, hbar_eff = 2.89 }]
/// ```
///
/// Without `pairs` the base `(K, hbar_eff)` is the only pair; without
/// `epsilons` the base `epsilon` is the only value. A `recipe` supplies both
/// unless they are given explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    #[serde(default)]
    pub recipe: Option<Recipe>,
    #[serde(default)]
    pub pairs: Vec<ParamPair>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub max_grid: Option<usize>,
}

impl SweepConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn into_spec(self, out_dir: impl Into<PathBuf>) -> SweepSpec {
        let base = self.run.params;
        let ensemble = self.run.ensemble();
        let mut spec = match self.recipe {
            Some(r) => SweepSpec::recipe(r, base, ensemble, out_dir),
            None => SweepSpec::from_axes(base, &[base.k], &[base.hbar_eff], &[base.epsilon], ensemble, out_dir),
        };
        if !self.pairs.is_empty() {
            spec.pairs = self.pairs;
        }
        if !self.epsilons.is_empty() {
            spec.epsilons = self.epsilons;
        }
        if let Some(t) = self.run.record_times {
            spec.record_times = t;
        }
        if let Some(g) = self.max_grid {
            spec.max_grid = g;
        }
        spec
    }
}

/// `0, n/10, n/5, 3n/10, n/2, n`.
pub fn fig_record_times(n_kicks: usize) -> Vec<usize> {
    let mut t: Vec<usize> = [0, 1, 2, 3, 5, 10].iter().map(|i| i * n_kicks / 10).collect();
    t.dedup();
    t
}

pub fn cell_id(p: &SimParams) -> String {
    format!("K{}_hbar{}_eps{}", p.k, p.hbar_eff, p.epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Pending,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub grid_n: usize,
    pub t_final: usize,
    pub p2_final: f64,
    pub e_kin_final: f64,
    pub pi0_final: f64,
    pub edge_mass_final: f64,
    pub max_norm_drift: f64,
    pub fit: Option<LocalizationFit>,
    pub fit_error: Option<String>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub id: String,
    pub params: SimParams,
    pub ensemble: EnsembleSpec,
    pub record_times: Vec<usize>,
    pub max_grid: usize,
    pub status: CellStatus,
    pub error: Option<CellError>,
    /// Paths relative to the sweep directory.
    pub artifacts: Vec<String>,
    pub result: Option<CellSummary>,
}

impl CellRecord {
    fn pending(spec: &SweepSpec, params: SimParams) -> Self {
        CellRecord {
            id: cell_id(&params),
            params,
            ensemble: spec.ensemble,
            record_times: spec.record_times.clone(),
            max_grid: spec.max_grid,
            status: CellStatus::Pending,
            error: None,
            artifacts: Vec::new(),
            result: None,
        }
    }

    fn same_work(&self, other: &CellRecord) -> bool {
        self.id == other.id
            && self.params == other.params
            && self.ensemble == other.ensemble
            && self.record_times == other.record_times
            && self.max_grid == other.max_grid
    }

    fn artifacts_present(&self, dir: &Path) -> bool {
        self.artifacts.iter().all(|a| dir.join(a).is_file())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub cells: Vec<CellRecord>,
}

impl Manifest {
    pub fn empty() -> Self {
        Manifest {
            code_version: CODE_VERSION.to_string(),
            cells: Vec::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        crate::io::read_json(&dir.join(MANIFEST_FILE))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().filter(|c| c.status == status).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepOptions {
    /// Thread count for the sweep; the global pool when `None`.
    pub workers: Option<usize>,
}

fn run_cell(dir: &Path, record: &CellRecord) -> Result<(Vec<String>, CellSummary)> {
    let start = Instant::now();
    let params = record.params.validate()?;
    let run: EnsembleRun = run_ensemble_adaptive(&params, &record.ensemble, &record.record_times, record.max_grid)?;
    let cell_dir = Path::new("cells").join(&record.id);
    let mut artifacts = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        let rel = cell_dir.join(&name);
        write_atomic(&dir.join(&rel), bytes)?;
        artifacts.push(rel.to_string_lossy().into_owned());
        Ok(())
    };
    put("observables.csv".into(), observables_csv(&run.series).as_bytes())?;
    for d in &run.distributions {
        put(format!("dist_t{:05}.csv", d.time), distribution_csv(d, 0.0).as_bytes())?;
    }

    let last = run.series.len() - 1;
    let (fit, fit_error) = match run.distributions.last().map(fit_exponential) {
        Some(Ok(f)) => (Some(f), None),
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, Some("no distribution recorded".into())),
    };
    let summary = CellSummary {
        grid_n: run.grid_n,
        t_final: run.series.times[last],
        p2_final: run.series.p2_mean[last],
        e_kin_final: 0.5 * run.series.p2_mean[last],
        pi0_final: run.series.pi0[last],
        edge_mass_final: run.series.edge_mass[last],
        max_norm_drift: run.max_norm_drift,
        fit,
        fit_error,
        warnings: params.warnings().to_vec(),
    };
    let rel = cell_dir.join("cell.json");
    write_json(
        &dir.join(&rel),
        &Sidecar::new(
            serde_json::json!({ "params": record.params, "ensemble": record.ensemble, "summary": summary }),
            start.elapsed().as_secs_f64(),
        ),
    )?;
    artifacts.push(rel.to_string_lossy().into_owned());
    Ok((artifacts, summary))
}

/// Runs every cell of `spec` not already completed in an existing manifest
/// under `spec.out_dir`. Failed cells are recorded and do not stop the others.
pub fn run_sweep(spec: &SweepSpec, opts: &SweepOptions) -> Result<Manifest> {
    spec.validate()?;
    let dir = spec.out_dir.as_path();
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(SPEC_FILE), spec)?;

    let previous = Manifest::load(dir).ok();
    let cells: Vec<CellRecord> = spec
        .cell_params()
        .into_iter()
        .map(|p| {
            let fresh = CellRecord::pending(spec, p);
            previous
                .as_ref()
                .and_then(|m| m.cells.iter().find(|c| c.same_work(&fresh)))
                .filter(|c| c.status == CellStatus::Completed && c.artifacts_present(dir))
                .cloned()
                .unwrap_or(fresh)
        })
        .collect();
    let todo: Vec<usize> = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.status != CellStatus::Completed)
        .map(|(i, _)| i)
        .collect();
    let manifest = Mutex::new(Manifest {
        code_version: CODE_VERSION.to_string(),
        cells,
    });
    manifest.lock().expect("manifest lock").save(dir)?;

    let work = || -> Result<()> {
        todo.par_iter().try_for_each(|&i| {
            let record = manifest.lock().expect("manifest lock").cells[i].clone();
            let outcome = run_cell(dir, &record);
            let mut m = manifest.lock().expect("manifest lock");
            let cell = &mut m.cells[i];
            match outcome {
                Ok((artifacts, summary)) => {
                    cell.status = CellStatus::Completed;
                    cell.error = None;
                    cell.artifacts = artifacts;
                    cell.result = Some(summary);
                }
                Err(Error::Io(e)) => return Err(Error::Io(e)),
                Err(e) => {
                    cell.status = CellStatus::Failed;
                    cell.error = Some(CellError {
                        kind: e.root_kind().to_string(),
                        message: e.to_string(),
                    });
                    cell.artifacts.clear();
                    cell.result = None;
                }
            }
            m.save(dir)
        })
    };
    match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    }
    Ok(manifest.into_inner().expect("manifest lock"))
}
