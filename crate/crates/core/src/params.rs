//! Run parameters, validation and ensemble description.
//!
//! Momentum is counted in lattice sites: one site is one quantum `2ħk_L`.
//! Internally the scaled canonical momentum of site `m` at quasimomentum `β`
//! is `ħ_eff (m + β)`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::realization_rng;

/// `2π√5`, the experimental second frequency.
pub const DEFAULT_OMEGA2: f64 = 14.049_629_462_081_453;
pub const DEFAULT_GRID_N: usize = 4096;
pub const MIN_GRID_N: usize = 16;
/// Largest grid the adaptive ensemble runner will double up to.
pub const MAX_GRID_N: usize = 65_536;
/// Largest denominator checked when looking for commensurate frequencies.
pub const COMMENSURABILITY_MAX_DENOMINATOR: u64 = 64;
const COMMENSURABILITY_TOL: f64 = 1e-9;

fn default_omega2() -> f64 {
    DEFAULT_OMEGA2
}

fn default_grid_n() -> usize {
    DEFAULT_GRID_N
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Kick strength.
    #[serde(rename = "K")]
    pub k: f64,
    pub hbar_eff: f64,
    /// Modulation amplitude of the kick strength.
    pub epsilon: f64,
    #[serde(default = "default_omega2")]
    pub omega2: f64,
    #[serde(default)]
    pub phi2: f64,
    /// Quasimomentum, as a fraction of one momentum quantum.
    #[serde(default)]
    pub beta: f64,
    pub n_kicks: usize,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
}

impl SimParams {
    pub fn new(k: f64, hbar_eff: f64, epsilon: f64) -> Self {
        SimParams {
            k,
            hbar_eff,
            epsilon,
            omega2: DEFAULT_OMEGA2,
            phi2: 0.0,
            beta: 0.0,
            n_kicks: 1000,
            grid_n: DEFAULT_GRID_N,
        }
    }

    pub fn with_kicks(mut self, n_kicks: usize) -> Self {
        self.n_kicks = n_kicks;
        self
    }

    pub fn with_grid(mut self, grid_n: usize) -> Self {
        self.grid_n = grid_n;
        self
    }

    /// Scaling variable `ε K² / ħ_eff²`.
    pub fn scaling_variable(&self) -> f64 {
        self.epsilon * self.k * self.k / (self.hbar_eff * self.hbar_eff)
    }

    pub fn validate(&self) -> Result<ValidatedParams> {
        validate(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// KAM tori may survive and trivially localize the dynamics.
    WeakChaos { k: f64 },
    /// `value / 2π` is close to `p / q` with a small denominator.
    Commensurate {
        quantity: String,
        numerator: i64,
        denominator: u64,
    },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::WeakChaos { .. } => {
                write!(f, "K ≤ 4: classical phase space not fully chaotic")
            }
            Warning::Commensurate {
                quantity,
                numerator,
                denominator,
            } => write!(
                f,
                "{quantity}/2π is commensurate ({numerator}/{denominator}): pseudo-random disorder degenerates"
            ),
        }
    }
}

/// Parameters that passed [`validate`], together with any non-fatal warnings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedParams {
    params: SimParams,
    warnings: Vec<Warning>,
}

impl ValidatedParams {
    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn into_inner(self) -> SimParams {
        self.params
    }
}

impl std::ops::Deref for ValidatedParams {
    type Target = SimParams;

    fn deref(&self) -> &SimParams {
        &self.params
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {v}")))
    }
}

/// Smallest-denominator rational `p/q` (q ≤ `max_den`) within tolerance of `x`.
pub fn small_rational(x: f64, max_den: u64) -> Option<(i64, u64)> {
    (1..=max_den).find_map(|q| {
        let scaled = x * q as f64;
        let p = scaled.round();
        ((scaled - p).abs() <= COMMENSURABILITY_TOL * q as f64).then_some((p as i64, q))
    })
}

pub fn validate(params: &SimParams) -> Result<ValidatedParams> {
    for (name, v) in [
        ("K", params.k),
        ("hbar_eff", params.hbar_eff),
        ("epsilon", params.epsilon),
        ("omega2", params.omega2),
        ("phi2", params.phi2),
        ("beta", params.beta),
    ] {
        finite(name, v)?;
    }
    if params.k <= 0.0 {
        return Err(Error::invalid("K", format!("must be positive, got {}", params.k)));
    }
    if params.hbar_eff <= 0.0 {
        return Err(Error::invalid(
            "hbar_eff",
            format!("must be positive, got {}", params.hbar_eff),
        ));
    }
    if !(0.0..1.0).contains(&params.epsilon) {
        return Err(Error::invalid(
            "epsilon",
            format!("out of range [0, 1): {}", params.epsilon),
        ));
    }
    if !(0.0..TAU).contains(&params.phi2) {
        return Err(Error::invalid(
            "phi2",
            format!("out of range [0, 2π): {}", params.phi2),
        ));
    }
    if !(0.0..1.0).contains(&params.beta) {
        return Err(Error::invalid(
            "beta",
            format!("out of range [0, 1): {}", params.beta),
        ));
    }
    if params.grid_n % 2 != 0 || params.grid_n < MIN_GRID_N {
        return Err(Error::invalid(
            "grid_n",
            format!("must be even and at least {MIN_GRID_N}, got {}", params.grid_n),
        ));
    }

    let mut warnings = Vec::new();
    if params.k <= 4.0 {
        warnings.push(Warning::WeakChaos { k: params.k });
    }
    for (quantity, v) in [("omega2", params.omega2), ("hbar_eff", params.hbar_eff)] {
        if let Some((numerator, denominator)) =
            small_rational(v / (2.0 * PI), COMMENSURABILITY_MAX_DENOMINATOR)
        {
            warnings.push(Warning::Commensurate {
                quantity: quantity.to_string(),
                numerator,
                denominator,
            });
        }
    }
    Ok(ValidatedParams {
        params: *params,
        warnings,
    })
}

/// How one per-realization quantity is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Fixed(f64),
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_realizations: usize,
    pub master_seed: u64,
    /// Quasimomentum, uniform in `[0, 1)` or fixed.
    pub beta_sampling: Sampling,
    /// Modulation phase, uniform in `[0, 2π)` or fixed.
    pub phi2_sampling: Sampling,
}

impl EnsembleSpec {
    /// Default experimental-style ensemble: β and φ₂ both uniform.
    pub fn uniform(n_realizations: usize, master_seed: u64) -> Self {
        EnsembleSpec {
            n_realizations,
            master_seed,
            beta_sampling: Sampling::Uniform,
            phi2_sampling: Sampling::Uniform,
        }
    }

    pub fn fixed(beta: f64, phi2: f64) -> Self {
        EnsembleSpec {
            n_realizations: 1,
            master_seed: 0,
            beta_sampling: Sampling::Fixed(beta),
            phi2_sampling: Sampling::Fixed(phi2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(Error::invalid("n_realizations", "must be at least 1"));
        }
        if let Sampling::Fixed(b) = self.beta_sampling {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid("beta", format!("out of range [0, 1): {b}")));
            }
        }
        if let Sampling::Fixed(p) = self.phi2_sampling {
            if !(0.0..TAU).contains(&p) {
                return Err(Error::invalid("phi2", format!("out of range [0, 2π): {p}")));
            }
        }
        Ok(())
    }

    /// `(β, φ₂)` for realization `index`. Both uniforms are always drawn, in
    /// that order, so one quantity's draws never depend on the other's mode.
    pub fn draw(&self, index: usize) -> (f64, f64) {
        let mut rng = realization_rng(self.master_seed, index as u64);
        let u_beta: f64 = rng.random();
        let u_phi: f64 = rng.random();
        let beta = match self.beta_sampling {
            Sampling::Fixed(b) => b,
            Sampling::Uniform => u_beta,
        };
        let phi2 = match self.phi2_sampling {
            Sampling::Fixed(p) => p,
            Sampling::Uniform => u_phi * TAU,
        };
        (beta, phi2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Fixed,
    Uniform,
}

fn default_realizations() -> usize {
    1
}

fn default_sampling() -> SamplingMode {
    SamplingMode::Uniform
}

/// Flat key-value run configuration (TOML). Parameter keys are named exactly
/// like the [`SimParams`] fields; ensemble keys like the [`EnsembleSpec`]
/// fields, where a `fixed` sampling mode takes its value from `beta`/`phi2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub params: SimParams,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_sampling")]
    pub beta_sampling: SamplingMode,
    #[serde(default = "default_sampling")]
    pub phi2_sampling: SamplingMode,
    #[serde(default)]
    pub record_times: Option<Vec<usize>>,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn ensemble(&self) -> EnsembleSpec {
        let pick = |mode, v| match mode {
            SamplingMode::Fixed => Sampling::Fixed(v),
            SamplingMode::Uniform => Sampling::Uniform,
        };
        EnsembleSpec {
            n_realizations: self.n_realizations,
            master_seed: self.master_seed,
            beta_sampling: pick(self.beta_sampling, self.params.beta),
            phi2_sampling: pick(self.phi2_sampling, self.params.phi2),
        }
    }

    /// Recording times; defaults to six evenly spaced snapshots including 0
    /// and `n_kicks`.
    pub fn record_times(&self) -> Vec<usize> {
        match &self.record_times {
            Some(t) => t.clone(),
            None => default_record_times(self.params.n_kicks),
        }
    }
}

pub fn default_record_times(n_kicks: usize) -> Vec<usize> {
    let mut times: Vec<usize> = (0..=5).map(|i| i * n_kicks / 5).collect();
    times.dedup();
    times
}
