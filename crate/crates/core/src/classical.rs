//! Classical map of the quasiperiodic kicked rotor and diffusion-tensor
//! estimation.
//!
//! One step updates both momenta from the current angles, then advances
//! `x₁` with the new `p₁` and `x₂` by `ω₂`.
//!
//! The diffusion tensor follows `⟨p_i p_j⟩ ≈ 2 D_ij t`: each component is
//! half the fitted slope of the corresponding second moment. With
//! uncorrelated kicks this gives `D₁₁ = (K²/4)(1 + ε²/2)` and
//! `D₂₂ = K²ε²/8`.

use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::realization_rng;
use crate::stats::{line_fit, mean};

/// Trajectories are split into this many independently seeded batches; the
/// batch-to-batch spread gives the statistical error of the tensor.
pub const DEFAULT_BATCHES: usize = 16;
pub const DEFAULT_FIT_START: usize = 10;
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub x1: f64,
    pub x2: f64,
    pub p1: f64,
    pub p2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    #[serde(rename = "K")]
    pub k: f64,
    pub epsilon: f64,
    pub omega2: f64,
}

impl MapParams {
    pub fn new(k: f64, epsilon: f64) -> Self {
        MapParams {
            k,
            epsilon,
            omega2: crate::params::DEFAULT_OMEGA2,
        }
    }

    /// Uncorrelated-kick values `(D₁₁, D₂₂)`.
    pub fn random_phase_diffusion(&self) -> (f64, f64) {
        let k2 = self.k * self.k;
        let e2 = self.epsilon * self.epsilon;
        (k2 / 4.0 * (1.0 + e2 / 2.0), k2 * e2 / 8.0)
    }
}

pub fn step(s: ClassicalState, k: f64, epsilon: f64, omega2: f64) -> ClassicalState {
    let (sin1, cos1) = s.x1.sin_cos();
    let (sin2, cos2) = s.x2.sin_cos();
    let p1 = s.p1 + k * sin1 * (1.0 + epsilon * cos2);
    let p2 = s.p2 + k * epsilon * cos1 * sin2;
    ClassicalState {
        x1: (s.x1 + p1).rem_euclid(TAU),
        x2: (s.x2 + omega2).rem_euclid(TAU),
        p1,
        p2,
    }
}

/// Inverse of [`step`].
pub fn step_back(s: ClassicalState, k: f64, epsilon: f64, omega2: f64) -> ClassicalState {
    let x1 = (s.x1 - s.p1).rem_euclid(TAU);
    let x2 = (s.x2 - omega2).rem_euclid(TAU);
    let (sin1, cos1) = x1.sin_cos();
    let (sin2, cos2) = x2.sin_cos();
    ClassicalState {
        x1,
        x2,
        p1: s.p1 - k * sin1 * (1.0 + epsilon * cos2),
        p2: s.p2 - k * epsilon * cos1 * sin2,
    }
}

/// Second moments per step, averaged over trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// `0..=n_steps`.
    pub t: Vec<usize>,
    pub p1sq: Vec<f64>,
    pub p2sq: Vec<f64>,
    pub p1p2: Vec<f64>,
    /// Same moments restricted to each independent batch.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub batches: Vec<Moments>,
}

impl Moments {
    fn zeros(n_steps: usize) -> Self {
        Moments {
            t: (0..=n_steps).collect(),
            p1sq: vec![0.0; n_steps + 1],
            p2sq: vec![0.0; n_steps + 1],
            p1p2: vec![0.0; n_steps + 1],
            batches: Vec::new(),
        }
    }
}

fn simulate_batch(map: &MapParams, n_traj: usize, n_steps: usize, seed: u64, batch: usize) -> Moments {
    let mut rng = realization_rng(seed, batch as u64);
    let mut m = Moments::zeros(n_steps);
    for _ in 0..n_traj {
        let mut s = ClassicalState {
            x1: rng.random::<f64>() * TAU,
            x2: rng.random::<f64>() * TAU,
            p1: 0.0,
            p2: 0.0,
        };
        for t in 1..=n_steps {
            s = step(s, map.k, map.epsilon, map.omega2);
            m.p1sq[t] += s.p1 * s.p1;
            m.p2sq[t] += s.p2 * s.p2;
            m.p1p2[t] += s.p1 * s.p2;
        }
    }
    let inv = 1.0 / n_traj.max(1) as f64;
    for v in [&mut m.p1sq, &mut m.p2sq, &mut m.p1p2] {
        v.iter_mut().for_each(|x| *x *= inv);
    }
    m
}

/// Iterates `n_traj` trajectories from `p₁ = p₂ = 0` with independent uniform
/// angles. Batches run concurrently and are combined in batch order.
pub fn simulate(map: &MapParams, n_traj: usize, n_steps: usize, seed: u64) -> Moments {
    simulate_batched(map, n_traj, n_steps, seed, DEFAULT_BATCHES)
}

pub fn simulate_batched(
    map: &MapParams,
    n_traj: usize,
    n_steps: usize,
    seed: u64,
    n_batches: usize,
) -> Moments {
    let n_batches = n_batches.clamp(1, n_traj.max(1));
    let sizes: Vec<usize> = (0..n_batches)
        .map(|b| n_traj / n_batches + usize::from(b < n_traj % n_batches))
        .collect();
    let batches: Vec<Moments> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &size)| simulate_batch(map, size, n_steps, seed, b))
        .collect();

    let mut total = Moments::zeros(n_steps);
    let norm = n_traj.max(1) as f64;
    for (b, size) in batches.iter().zip(&sizes) {
        let w = *size as f64 / norm;
        for t in 0..=n_steps {
            total.p1sq[t] += w * b.p1sq[t];
            total.p2sq[t] += w * b.p2sq[t];
            total.p1p2[t] += w * b.p1p2[t];
        }
    }
    total.batches = batches;
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_min: usize,
    pub t_max: usize,
}

impl FitWindow {
    pub fn new(t_min: usize, t_max: usize) -> Self {
        FitWindow { t_min, t_max }
    }

    /// `[10, t_last]`.
    pub fn default_for(moments: &Moments) -> Self {
        FitWindow {
            t_min: DEFAULT_FIT_START,
            t_max: moments.t.last().copied().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionTensor {
    pub d11: f64,
    pub d22: f64,
    pub d12: f64,
    pub d11_stderr: f64,
    pub d22_stderr: f64,
    pub d12_stderr: f64,
    pub window: FitWindow,
}

impl DiffusionTensor {
    pub fn anisotropy(&self) -> f64 {
        self.d22 / self.d11
    }
}

fn half_slopes(m: &Moments, window: FitWindow) -> Result<[f64; 3]> {
    let idx: Vec<usize> = (0..m.t.len())
        .filter(|&i| m.t[i] >= window.t_min && m.t[i] <= window.t_max)
        .collect();
    if idx.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "fit window [{}, {}] holds {} points, need {MIN_FIT_POINTS}",
            window.t_min,
            window.t_max,
            idx.len()
        )));
    }
    let t: Vec<f64> = idx.iter().map(|&i| m.t[i] as f64).collect();
    let mut out = [0.0; 3];
    for (o, series) in out.iter_mut().zip([&m.p1sq, &m.p2sq, &m.p1p2]) {
        let y: Vec<f64> = idx.iter().map(|&i| series[i]).collect();
        *o = 0.5 * line_fit(&t, &y)?.slope;
    }
    Ok(out)
}

fn half_slope_stderrs(m: &Moments, window: FitWindow) -> Result<[f64; 3]> {
    let idx: Vec<usize> = (0..m.t.len())
        .filter(|&i| m.t[i] >= window.t_min && m.t[i] <= window.t_max)
        .collect();
    let t: Vec<f64> = idx.iter().map(|&i| m.t[i] as f64).collect();
    let mut out = [0.0; 3];
    for (o, series) in out.iter_mut().zip([&m.p1sq, &m.p2sq, &m.p1p2]) {
        let y: Vec<f64> = idx.iter().map(|&i| series[i]).collect();
        *o = 0.5 * line_fit(&t, &y)?.slope_stderr;
    }
    Ok(out)
}

/// Fits each moment linearly over `window`; `D = slope / 2`. Errors come from
/// the spread of per-batch estimates when batches are present, otherwise
/// from the regression residuals.
pub fn estimate_diffusion(moments: &Moments, window: FitWindow) -> Result<DiffusionTensor> {
    let d = half_slopes(moments, window)?;
    let err = if moments.batches.len() >= 2 {
        let per_batch = moments
            .batches
            .iter()
            .map(|b| half_slopes(b, window))
            .collect::<Result<Vec<_>>>()?;
        let nb = per_batch.len() as f64;
        let mut e = [0.0; 3];
        for (c, ec) in e.iter_mut().enumerate() {
            let v: Vec<f64> = per_batch.iter().map(|x| x[c]).collect();
            let mu = mean(&v);
            let var = v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nb - 1.0);
            *ec = (var / nb).sqrt();
        }
        e
    } else {
        half_slope_stderrs(moments, window)?
    };
    Ok(DiffusionTensor {
        d11: d[0],
        d22: d[1],
        d12: d[2],
        d11_stderr: err[0],
        d22_stderr: err[1],
        d12_stderr: err[2],
        window,
    })
}
