use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use qpkr_core::anderson::{self, MappingOptions, OnsiteField};
use qpkr_core::analysis::{fit_exponential, kinetic_energy, pi0_proxy, predicted_ploc_sites};
use qpkr_core::classical::{estimate_diffusion, simulate, FitWindow, MapParams};
use qpkr_core::io::{self, Sidecar};
use qpkr_core::params::{RunConfig, DEFAULT_OMEGA2};
use qpkr_core::quantum::run_ensemble_adaptive;
use qpkr_core::report;
use qpkr_core::sweep::{run_sweep, Recipe, SweepConfig, SweepOptions, SweepSpec, DEFAULT_MAX_GRID};
use qpkr_core::{EnsembleSpec, Error, SimParams};

#[derive(Parser)]
#[command(name = "qpkr", version, about = "Quasiperiodic kicked rotor simulations")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "QPKR_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    kicks: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(g) = self.grid {
            cfg.params.grid_n = g;
        }
        if let Some(k) = self.kicks {
            cfg.params.n_kicks = k;
            // stale recording times would point past the end
            if cfg.record_times.as_ref().is_some_and(|t| t.iter().any(|&t| t > k)) {
                cfg.record_times = None;
            }
        }
        if let Some(r) = self.realizations {
            cfg.n_realizations = r;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a run configuration and print it with any warnings.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one ensemble and write its observables and distributions.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a parameter sweep; completed cells are skipped on re-runs.
    Sweep {
        #[arg(long, required_unless_present = "recipe")]
        config: Option<PathBuf>,
        /// fig1, fig2 or fig3.
        #[arg(long)]
        recipe: Option<Recipe>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Build plot-ready tables from a sweep directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the lattice mapping against a dense diagonalization.
    VerifyMapping {
        #[arg(long = "K", alias = "k", default_value_t = 2.0)]
        k: f64,
        #[arg(long, default_value_t = 2.89)]
        hbar: f64,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_OMEGA2)]
        omega2: f64,
        #[arg(long, default_value_t = 32)]
        lattice: usize,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        range: usize,
        /// Side of the on-site energy window written with --out.
        #[arg(long, default_value_t = 64)]
        onsite_window: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of the classical diffusion tensor.
    Classical {
        #[arg(long = "K", alias = "k", default_value_t = 10.0)]
        k: f64,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 100_000)]
        trajectories: usize,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn warnings_json(w: &[qpkr_core::Warning]) -> Value {
    Value::Array(
        w.iter()
            .map(|w| {
                let mut v = serde_json::to_value(w).expect("serializable");
                v["message"] = json!(w.to_string());
                v
            })
            .collect(),
    )
}

fn cmd_validate(config: &Path) -> Result<(), Error> {
    let cfg = RunConfig::from_file(config)?;
    let params = cfg.params.validate()?;
    cfg.ensemble().validate()?;
    print_json(&json!({
        "params": cfg.params,
        "ensemble": cfg.ensemble(),
        "record_times": cfg.record_times(),
        "scaling_variable": cfg.params.scaling_variable(),
        "warnings": warnings_json(params.warnings()),
    }));
    Ok(())
}

fn cmd_run(config: &Path, out: &Path, overrides: &Overrides) -> Result<(), Error> {
    let start = Instant::now();
    let mut cfg = RunConfig::from_file(config)?;
    overrides.apply(&mut cfg);
    let params = cfg.params.validate()?;
    for w in params.warnings() {
        eprintln!("warning: {w}");
    }
    let spec = cfg.ensemble();
    let times = cfg.record_times();
    let run = run_ensemble_adaptive(&params, &spec, &times, DEFAULT_MAX_GRID)?;

    io::write_atomic(&out.join("observables.csv"), io::observables_csv(&run.series).as_bytes())?;
    for d in &run.distributions {
        io::write_atomic(
            &out.join(format!("dist_t{:05}.csv", d.time)),
            io::distribution_csv(d, 0.0).as_bytes(),
        )?;
    }
    let last = run.distributions.last().expect("t = 0 is always recorded");
    let fit = fit_exponential(last);
    let summary = json!({
        "params": cfg.params,
        "ensemble": spec,
        "grid_n": run.grid_n,
        "n_realizations": run.n_realizations,
        "max_norm_drift": run.max_norm_drift,
        "t_final": last.time,
        "kinetic_energy": kinetic_energy(last, 0.0),
        "p2_mean": run.series.p2_mean.last(),
        "pi0": run.series.pi0.last(),
        "pi0_proxy": run.series.pi0.last().and_then(|&p| pi0_proxy(p).ok()),
        "fit": fit.as_ref().ok(),
        "fit_error": fit.as_ref().err().map(|e| e.to_string()),
        "predicted_ploc_sites": predicted_ploc_sites(cfg.params.k, cfg.params.hbar_eff, cfg.params.epsilon),
        "warnings": warnings_json(params.warnings()),
    });
    io::write_json(&out.join("run.json"), &Sidecar::new(summary.clone(), start.elapsed().as_secs_f64()))?;
    print_json(&summary);
    Ok(())
}

fn cmd_sweep(
    config: Option<&Path>,
    recipe: Option<Recipe>,
    out: &Path,
    overrides: &Overrides,
    workers: Option<usize>,
) -> Result<(), Error> {
    let spec: SweepSpec = match config {
        Some(path) => {
            let mut cfg = SweepConfig::from_file(path)?;
            if recipe.is_some() {
                cfg.recipe = recipe;
            }
            overrides.apply(&mut cfg.run);
            cfg.into_spec(out)
        }
        None => {
            let mut cfg = RunConfig {
                params: SimParams::new(5.34, 2.89, 0.0),
                n_realizations: 100,
                master_seed: 0,
                beta_sampling: qpkr_core::params::SamplingMode::Uniform,
                phi2_sampling: qpkr_core::params::SamplingMode::Uniform,
                record_times: None,
            };
            overrides.apply(&mut cfg);
            let ensemble: EnsembleSpec = cfg.ensemble();
            SweepSpec::recipe(recipe.expect("clap requires config or recipe"), cfg.params, ensemble, out)
        }
    };
    let manifest = run_sweep(&spec, &SweepOptions { workers })?;
    print_json(&json!({
        "out": out,
        "cells": manifest.cells.len(),
        "completed": manifest.count(qpkr_core::sweep::CellStatus::Completed),
        "failed": manifest.count(qpkr_core::sweep::CellStatus::Failed),
    }));
    Ok(())
}

fn cmd_report(out: &Path) -> Result<(), Error> {
    let summary = report::report(out)?;
    print_json(&serde_json::to_value(&summary)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    k: f64,
    hbar: f64,
    epsilon: f64,
    omega2: f64,
    lattice: usize,
    samples: usize,
    range: usize,
    onsite_window: usize,
    out: Option<&Path>,
) -> Result<(), Error> {
    let start = Instant::now();
    let opts = MappingOptions {
        hopping_range: range,
        n_samples: samples,
        quadrature_n: (8 * range).max(256),
        ..MappingOptions::default()
    };
    let rep = anderson::verify_mapping(k, hbar, epsilon, omega2, lattice, &opts)?;
    let table = anderson::hopping_table(k, hbar, epsilon, anderson::DEFAULT_HOPPING_RANGE, 256)?;
    let aniso = anderson::anisotropy_report(&table);
    if let Some(dir) = out {
        let wall = start.elapsed().as_secs_f64();
        io::write_json(&dir.join("mapping.json"), &Sidecar::new(&rep, wall))?;
        io::write_json(&dir.join("hopping.json"), &Sidecar::new(json!({ "table": table, "anisotropy": aniso }), wall))?;
        let field = OnsiteField::centered(onsite_window, 0.0, hbar, omega2)?;
        io::write_atomic(&dir.join("onsite_E0.csv"), io::onsite_csv(&field).as_bytes())?;
    }
    print_json(&json!({
        "K": k,
        "hbar_eff": hbar,
        "epsilon": epsilon,
        "lattice_n": rep.lattice_n,
        "n_states": rep.n_states,
        "n_sampled": rep.samples.len(),
        "max_residual": rep.max_residual,
        "median_residual": rep.median_residual,
        "fraction_below": rep.fraction_below,
        "residual_threshold": rep.residual_threshold,
        "resonant_sites_excluded": rep.resonant_sites_excluded,
        "anisotropy_ratio": aniso.ratio,
    }));
    Ok(())
}

fn cmd_classical(k: f64, epsilon: f64, trajectories: usize, steps: usize, seed: u64, out: Option<&Path>) -> Result<(), Error> {
    let start = Instant::now();
    if trajectories == 0 {
        return Err(qpkr_core::Error::InsufficientData("at least one trajectory is needed".into()));
    }
    let map = MapParams::new(k, epsilon);
    let moments = simulate(&map, trajectories, steps, seed);
    let tensor = estimate_diffusion(&moments, FitWindow::default_for(&moments))?;
    let (d11_rp, d22_rp) = map.random_phase_diffusion();
    let summary = json!({
        "map": map,
        "trajectories": trajectories,
        "steps": steps,
        "seed": seed,
        "diffusion": tensor,
        "random_phase": { "d11": d11_rp, "d22": d22_rp },
    });
    if let Some(dir) = out {
        io::write_atomic(&dir.join("moments.csv"), io::moments_csv(&moments).as_bytes())?;
        io::write_json(&dir.join("diffusion.json"), &Sidecar::new(summary.clone(), start.elapsed().as_secs_f64()))?;
    }
    print_json(&summary);
    Ok(())
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_string()),
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            return fail("invalid_parameter", "invalid workers: must be at least 1".into());
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("config", format!("thread pool: {e}"));
        }
    }
    let result = match &cli.command {
        Command::Validate { config } => cmd_validate(config),
        Command::Run { config, out, overrides } => cmd_run(config, out, overrides),
        Command::Sweep {
            config,
            recipe,
            out,
            overrides,
        } => cmd_sweep(config.as_deref(), *recipe, out, overrides, cli.workers),
        Command::Report { out } => cmd_report(out),
        Command::VerifyMapping {
            k,
            hbar,
            epsilon,
            omega2,
            lattice,
            samples,
            range,
            onsite_window,
            out,
        } => cmd_verify(*k, *hbar, *epsilon, *omega2, *lattice, *samples, *range, *onsite_window, out.as_deref()),
        Command::Classical {
            k,
            epsilon,
            trajectories,
            steps,
            seed,
            out,
        } => cmd_classical(*k, *epsilon, *trajectories, *steps, *seed, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.root_kind(), e.to_string()),
    }
}
