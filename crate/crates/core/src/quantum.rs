//! Floquet evolution of the quasiperiodic kicked rotor.
//!
//! One period is a kick followed by a free flight. Kick `n` (counting from
//! zero) has amplitude `K (1 + ε cos(ω₂ n + φ₂))` and multiplies the
//! position-space wavefunction by `exp(−i A cos x / ħ_eff)` on the uniform
//! grid `x_j = 2πj/N`. The free flight multiplies momentum site `m` by
//! `exp(−i ħ_eff (m+β)² / 2)`.
//!
//! Amplitudes are stored in natural site order (`i = m + N/2`). The shift by
//! `N/2` contributes a factor `(−1)^j` on the way into position space and the
//! same factor on the way back, so no explicit fft-shift is needed. The
//! transform pair is rustfft's unnormalized inverse/forward; the `1/N` of
//! each round trip is folded into the kick phase factors.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::distribution::{edge_width, MomentumDistribution, ObservableSeries, Provenance};
use crate::error::{Error, Result};
use crate::params::{EnsembleSpec, ValidatedParams, MAX_GRID_N};

/// Probability allowed in the outer tenth of the grid before a run aborts.
pub const EDGE_MASS_THRESHOLD: f64 = 1e-6;

/// Realizations evaluated concurrently before being folded into the mean.
const ENSEMBLE_CHUNK: usize = 32;

/// Wavefunction over the truncated momentum lattice at fixed quasimomentum.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    amps: Vec<Complex64>,
    beta: f64,
    t: usize,
}

impl WaveState {
    /// Momentum eigenstate `|m⟩` at quasimomentum `beta`.
    pub fn momentum_eigenstate(grid_n: usize, m: i64, beta: f64) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); grid_n];
        let i = m + (grid_n / 2) as i64;
        assert!(
            (0..grid_n as i64).contains(&i),
            "site {m} outside grid of {grid_n}"
        );
        amps[i as usize] = Complex64::new(1.0, 0.0);
        WaveState { amps, beta, t: 0 }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>, beta: f64) -> Self {
        WaveState { amps, beta, t: 0 }
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Number of completed periods.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn grid_n(&self) -> usize {
        self.amps.len()
    }

    pub fn site(&self, i: usize) -> i64 {
        i as i64 - (self.amps.len() / 2) as i64
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨(m+β)²⟩` in site units.
    pub fn p2_mean(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let p = self.site(i) as f64 + self.beta;
                a.norm_sqr() * p * p
            })
            .sum()
    }
}

/// Planned transforms and cached phase tables for one grid size.
pub struct Propagator {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    cos_x: Vec<f64>,
    scratch: Vec<Complex64>,
    free_cache: Option<(f64, f64, Vec<Complex64>)>,
}

impl Propagator {
    pub fn new(grid_n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid_n);
        let inverse = planner.plan_fft_inverse(grid_n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let cos_x = (0..grid_n)
            .map(|j| (TAU * j as f64 / grid_n as f64).cos())
            .collect();
        Propagator {
            n: grid_n,
            forward,
            inverse,
            cos_x,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            free_cache: None,
        }
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }

    fn check_len(&self, state: &WaveState) -> Result<()> {
        if state.amps.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: state.amps.len(),
            });
        }
        Ok(())
    }

    /// Multiplies the state by `exp(−i A cos x / ħ_eff)` in position space.
    /// `A = 0` leaves the amplitudes untouched bit for bit.
    pub fn kick(&mut self, state: &mut WaveState, amplitude: f64, hbar_eff: f64) -> Result<()> {
        self.check_len(state)?;
        if amplitude == 0.0 {
            return Ok(());
        }
        let scale = 1.0 / self.n as f64;
        let coupling = -amplitude / hbar_eff;
        self.inverse
            .process_with_scratch(&mut state.amps, &mut self.scratch);
        for (a, &c) in state.amps.iter_mut().zip(&self.cos_x) {
            *a *= Complex64::from_polar(scale, coupling * c);
        }
        self.forward
            .process_with_scratch(&mut state.amps, &mut self.scratch);
        Ok(())
    }

    fn free_phases(&mut self, hbar_eff: f64, beta: f64) -> &[Complex64] {
        let stale = !matches!(&self.free_cache, Some((h, b, _)) if *h == hbar_eff && *b == beta);
        if stale {
            let half = (self.n / 2) as f64;
            let phases = (0..self.n)
                .map(|i| {
                    let p = i as f64 - half + beta;
                    Complex64::from_polar(1.0, -0.5 * hbar_eff * p * p)
                })
                .collect();
            self.free_cache = Some((hbar_eff, beta, phases));
        }
        &self.free_cache.as_ref().expect("filled above").2
    }

    /// Multiplies site `m` by `exp(−i ħ_eff (m+β)² / 2)`.
    pub fn free_flight(&mut self, state: &mut WaveState, hbar_eff: f64) -> Result<()> {
        self.check_len(state)?;
        let beta = state.beta;
        let phases = self.free_phases(hbar_eff, beta);
        for (a, ph) in state.amps.iter_mut().zip(phases) {
            *a *= ph;
        }
        Ok(())
    }

    /// One full period: kick with `amplitude`, then free flight.
    pub fn period(&mut self, state: &mut WaveState, amplitude: f64, hbar_eff: f64) -> Result<()> {
        self.kick(state, amplitude, hbar_eff)?;
        self.free_flight(state, hbar_eff)?;
        state.t += 1;
        Ok(())
    }
}

/// Amplitude of kick `n`: `K (1 + ε cos(ω₂ n + φ₂))`.
pub fn kick_amplitude(k: f64, epsilon: f64, omega2: f64, phi2: f64, n: usize) -> f64 {
    k * (1.0 + epsilon * (omega2 * n as f64 + phi2).cos())
}

/// Result of a single-realization run.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub distributions: Vec<MomentumDistribution>,
    pub series: ObservableSeries,
    pub grid_n: usize,
    /// Largest `|‖ψ‖² − 1|` seen over the run.
    pub max_norm_drift: f64,
}

struct Snapshot {
    norm: f64,
    p2: f64,
    pi0: f64,
    edge: f64,
}

fn snapshot(state: &WaveState) -> Snapshot {
    let n = state.amps.len();
    let w = edge_width(n);
    let half = (n / 2) as f64;
    let (mut norm, mut p2, mut edge) = (0.0, 0.0, 0.0);
    for (i, a) in state.amps.iter().enumerate() {
        let prob = a.norm_sqr();
        let p = i as f64 - half + state.beta;
        norm += prob;
        p2 += prob * p * p;
        if i < w || i >= n - w {
            edge += prob;
        }
    }
    Snapshot {
        norm,
        p2,
        pi0: state.amps[n / 2].norm_sqr(),
        edge,
    }
}

fn check_record_times(record_times: &[usize], n_kicks: usize) -> Result<()> {
    if record_times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("record_times", "must be sorted"));
    }
    if let Some(&last) = record_times.last() {
        if last > n_kicks {
            return Err(Error::invalid(
                "record_times",
                format!("time {last} exceeds n_kicks = {n_kicks}"),
            ));
        }
    }
    Ok(())
}

/// Evolves the momentum eigenstate `m = 0` at quasimomentum `beta` for
/// `n_kicks` periods with modulation phase `phi2`.
pub fn evolve(
    params: &ValidatedParams,
    beta: f64,
    phi2: f64,
    record_times: &[usize],
) -> Result<Evolution> {
    let mut prop = Propagator::new(params.grid_n);
    evolve_with(&mut prop, params, beta, phi2, record_times, None)
}

fn evolve_with(
    prop: &mut Propagator,
    params: &ValidatedParams,
    beta: f64,
    phi2: f64,
    record_times: &[usize],
    ensemble: Option<EnsembleSpec>,
) -> Result<Evolution> {
    check_record_times(record_times, params.n_kicks)?;
    let n = params.grid_n;
    let mut run_params = *params.params();
    run_params.beta = beta;
    run_params.phi2 = phi2;
    let meta = Provenance {
        params: run_params,
        ensemble,
    };

    let mut state = WaveState::momentum_eigenstate(n, 0, beta);
    let mut series = ObservableSeries::with_capacity(params.n_kicks + 1);
    let mut distributions = Vec::with_capacity(record_times.len());
    let mut next_record = 0;
    let mut max_norm_drift: f64 = 0.0;

    let mut record = |state: &WaveState,
                      series: &mut ObservableSeries,
                      distributions: &mut Vec<MomentumDistribution>,
                      next_record: &mut usize|
     -> Result<()> {
        let s = snapshot(state);
        max_norm_drift = max_norm_drift.max((s.norm - 1.0).abs());
        if s.edge > EDGE_MASS_THRESHOLD {
            return Err(Error::GridOverflow {
                kick: state.t,
                edge_mass: s.edge,
                grid_n: n,
            });
        }
        series.push(state.t, s.p2, s.pi0, s.edge);
        while *next_record < record_times.len() && record_times[*next_record] == state.t {
            distributions.push(MomentumDistribution {
                probs: state.probabilities(),
                time: state.t,
                meta,
            });
            *next_record += 1;
        }
        Ok(())
    };

    record(&state, &mut series, &mut distributions, &mut next_record)?;
    for kick in 0..params.n_kicks {
        let amplitude = kick_amplitude(params.k, params.epsilon, params.omega2, phi2, kick);
        prop.period(&mut state, amplitude, params.hbar_eff)?;
        record(&state, &mut series, &mut distributions, &mut next_record)?;
    }
    Ok(Evolution {
        distributions,
        series,
        grid_n: n,
        max_norm_drift,
    })
}

/// Ensemble-averaged run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRun {
    pub distributions: Vec<MomentumDistribution>,
    pub series: ObservableSeries,
    pub grid_n: usize,
    pub n_realizations: usize,
    pub max_norm_drift: f64,
}

struct Accumulator {
    probs: Vec<Vec<f64>>,
    p2: Vec<f64>,
    pi0: Vec<f64>,
    edge: Vec<f64>,
    max_norm_drift: f64,
    count: usize,
}

impl Accumulator {
    fn from_first(e: &Evolution) -> Self {
        Accumulator {
            probs: e.distributions.iter().map(|d| d.probs.clone()).collect(),
            p2: e.series.p2_mean.clone(),
            pi0: e.series.pi0.clone(),
            edge: e.series.edge_mass.clone(),
            max_norm_drift: e.max_norm_drift,
            count: 1,
        }
    }

    fn add(&mut self, e: &Evolution) {
        for (acc, d) in self.probs.iter_mut().zip(&e.distributions) {
            for (a, p) in acc.iter_mut().zip(&d.probs) {
                *a += p;
            }
        }
        for (acc, src) in [
            (&mut self.p2, &e.series.p2_mean),
            (&mut self.pi0, &e.series.pi0),
            (&mut self.edge, &e.series.edge_mass),
        ] {
            for (a, v) in acc.iter_mut().zip(src) {
                *a += v;
            }
        }
        self.max_norm_drift = self.max_norm_drift.max(e.max_norm_drift);
        self.count += 1;
    }
}

/// Runs `spec.n_realizations` independent realizations with per-realization
/// `(β, φ₂)` drawn from `spec`, and returns arithmetic means. Realizations run
/// concurrently on the current rayon pool but are folded strictly in index
/// order, so the output bits depend only on the inputs.
pub fn run_ensemble(
    params: &ValidatedParams,
    spec: &EnsembleSpec,
    record_times: &[usize],
) -> Result<EnsembleRun> {
    spec.validate()?;
    check_record_times(record_times, params.n_kicks)?;
    let mut acc: Option<Accumulator> = None;
    let mut template: Option<Evolution> = None;

    let indices: Vec<usize> = (0..spec.n_realizations).collect();
    for chunk in indices.chunks(ENSEMBLE_CHUNK) {
        let results: Vec<Result<Evolution>> = chunk
            .par_iter()
            .map_init(
                || Propagator::new(params.grid_n),
                |prop, &r| {
                    let (beta, phi2) = spec.draw(r);
                    evolve_with(prop, params, beta, phi2, record_times, Some(*spec)).map_err(
                        |e| Error::Realization {
                            index: r,
                            source: Box::new(e),
                        },
                    )
                },
            )
            .collect();
        for result in results {
            let evo = result?;
            match acc.as_mut() {
                None => {
                    acc = Some(Accumulator::from_first(&evo));
                    template = Some(evo);
                }
                Some(a) => a.add(&evo),
            }
        }
    }

    let acc = acc.expect("at least one realization");
    let template = template.expect("at least one realization");
    let count = acc.count as f64;
    let mean = |v: Vec<f64>| v.into_iter().map(|x| x / count).collect::<Vec<f64>>();

    let mut base = *params.params();
    if let crate::params::Sampling::Fixed(b) = spec.beta_sampling {
        base.beta = b;
    }
    if let crate::params::Sampling::Fixed(p) = spec.phi2_sampling {
        base.phi2 = p;
    }
    let meta = Provenance {
        params: base,
        ensemble: Some(*spec),
    };
    let distributions = acc
        .probs
        .into_iter()
        .zip(&template.distributions)
        .map(|(probs, d)| MomentumDistribution {
            probs: mean(probs),
            time: d.time,
            meta,
        })
        .collect();
    let series = ObservableSeries {
        times: template.series.times.clone(),
        p2_mean: mean(acc.p2),
        pi0: mean(acc.pi0),
        edge_mass: mean(acc.edge),
    };
    Ok(EnsembleRun {
        distributions,
        series,
        grid_n: params.grid_n,
        n_realizations: acc.count,
        max_norm_drift: acc.max_norm_drift,
    })
}

/// [`run_ensemble`] with grid doubling on overflow, up to `max_grid`
/// (at most [`MAX_GRID_N`]). The whole ensemble is rerun on the larger grid
/// so every realization shares one lattice.
pub fn run_ensemble_adaptive(
    params: &ValidatedParams,
    spec: &EnsembleSpec,
    record_times: &[usize],
    max_grid: usize,
) -> Result<EnsembleRun> {
    let max_grid = max_grid.min(MAX_GRID_N);
    let mut p = params.clone();
    loop {
        match run_ensemble(&p, spec, record_times) {
            Err(e) if e.is_grid_overflow() && p.grid_n * 2 <= max_grid => {
                let mut raw = *p.params();
                raw.grid_n *= 2;
                p = raw.validate()?;
            }
            other => return other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Sampling, SimParams};
    use proptest::prelude::*;

    /// Bessel function of integer order by its power series. Independent
    /// from everything under test; accurate for the small arguments used.
    fn bessel_j(order: i64, z: f64) -> f64 {
        let n = order.unsigned_abs();
        let sign = if order < 0 && n % 2 == 1 { -1.0 } else { 1.0 };
        let half = z / 2.0;
        let mut term = half.powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
        let mut sum = term;
        for k in 1..200u64 {
            term *= -half * half / (k as f64 * (k + n) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        sign * sum
    }

    #[test]
    fn bessel_oracle_sanity() {
        // J_0(1), J_1(1), J_2(3) reference values
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((bessel_j(2, 3.0) - 0.486_091_260_585_891_1).abs() < 1e-14);
        // Σ m² J_m(z)² = z²/2 by direct summation
        let z = 2.3;
        let s: f64 = (-60..=60)
            .map(|m: i64| (m * m) as f64 * bessel_j(m, z).powi(2))
            .sum();
        assert!((s - z * z / 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_kick_is_identity() {
        let mut prop = Propagator::new(64);
        let mut s = WaveState::momentum_eigenstate(64, 3, 0.3);
        prop.free_flight(&mut s, 1.7).unwrap();
        let before = s.clone();
        prop.kick(&mut s, 0.0, 2.89).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn kick_populations_are_bessel_weights() {
        let (amp, hbar) = (5.34, 2.89);
        let z = amp / hbar;
        let mut prop = Propagator::new(256);
        let mut s = WaveState::momentum_eigenstate(256, 0, 0.0);
        prop.kick(&mut s, amp, hbar).unwrap();
        for i in 0..256 {
            let m = s.site(i);
            let expected = bessel_j(m, z).powi(2);
            assert!(
                (s.amps()[i].norm_sqr() - expected).abs() < 1e-14,
                "m={m}"
            );
        }
        // phase convention (−i)^m J_m(z)
        let a1 = s.amps()[129];
        assert!((a1 - Complex64::new(0.0, -bessel_j(1, z))).norm() < 1e-14);
    }

    #[test]
    fn length_mismatch() {
        let mut prop = Propagator::new(64);
        let mut s = WaveState::momentum_eigenstate(32, 0, 0.0);
        assert!(matches!(
            prop.kick(&mut s, 1.0, 1.0),
            Err(Error::LengthMismatch { expected: 64, got: 32 })
        ));
    }

    #[test]
    fn free_flight_at_two_pi_is_parity_pattern() {
        let n = 32;
        let amps: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0 + i as f64, 0.5))
            .collect();
        let mut s = WaveState::from_amplitudes(amps.clone(), 0.0);
        let mut prop = Propagator::new(n);
        prop.free_flight(&mut s, TAU).unwrap();
        for i in 0..n {
            let m = i as i64 - 16;
            let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            assert!((s.amps()[i] - amps[i] * sign).norm() < 1e-9 * (1.0 + (m * m) as f64));
        }
    }

    #[test]
    fn two_flights_equal_one_doubled() {
        let n = 64;
        let amps: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0 / 8.0, 0.37 * i as f64))
            .collect();
        let mut a = WaveState::from_amplitudes(amps.clone(), 0.41);
        let mut b = WaveState::from_amplitudes(amps, 0.41);
        let mut prop = Propagator::new(n);
        prop.free_flight(&mut a, 1.3).unwrap();
        prop.free_flight(&mut a, 1.3).unwrap();
        prop.free_flight(&mut b, 2.6).unwrap();
        for (x, y) in a.amps().iter().zip(b.amps()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_kicks_is_delta() {
        let p = SimParams::new(5.34, 2.89, 0.36)
            .with_kicks(0)
            .with_grid(64)
            .validate()
            .unwrap();
        let evo = evolve(&p, 0.2, 1.0, &[0]).unwrap();
        assert_eq!(evo.distributions.len(), 1);
        let d = &evo.distributions[0];
        assert_eq!(d.prob(0), 1.0);
        assert_eq!(d.total(), 1.0);
        assert_eq!(evo.series.len(), 1);
    }

    #[test]
    fn record_time_validation() {
        let p = SimParams::new(5.34, 2.89, 0.0)
            .with_kicks(10)
            .with_grid(64)
            .validate()
            .unwrap();
        assert!(evolve(&p, 0.0, 0.0, &[5, 3]).is_err());
        assert!(evolve(&p, 0.0, 0.0, &[11]).is_err());
    }

    #[test]
    fn small_grid_overflows() {
        let p = SimParams::new(10.0, 1.0, 0.3)
            .with_kicks(50)
            .with_grid(32)
            .validate()
            .unwrap();
        let err = evolve(&p, 0.0, 0.0, &[]).unwrap_err();
        assert!(matches!(err, Error::GridOverflow { grid_n: 32, .. }));
        let spec = EnsembleSpec::uniform(3, 1);
        let err = run_ensemble(&p, &spec, &[]).unwrap_err();
        assert!(matches!(err, Error::Realization { index: 0, .. }));
        assert!(err.is_grid_overflow());
    }

    #[test]
    fn adaptive_grid_recovers() {
        let p = SimParams::new(5.34, 2.89, 0.0)
            .with_kicks(40)
            .with_grid(16)
            .validate()
            .unwrap();
        let spec = EnsembleSpec::uniform(2, 5);
        let run = run_ensemble_adaptive(&p, &spec, &[40], 1024).unwrap();
        assert!(run.grid_n > 16);
        assert!(run.series.edge_mass.iter().all(|&e| e <= EDGE_MASS_THRESHOLD));
    }

    #[test]
    fn periodic_reduction_is_bitwise() {
        let p = SimParams::new(5.34, 2.89, 0.0)
            .with_kicks(60)
            .with_grid(256)
            .validate()
            .unwrap();
        let (beta, phi2) = (0.31, 2.2);
        let evo = evolve(&p, beta, phi2, &[60]).unwrap();
        let mut prop = Propagator::new(256);
        let mut s = WaveState::momentum_eigenstate(256, 0, beta);
        for _ in 0..60 {
            prop.period(&mut s, 5.34, 2.89).unwrap();
        }
        assert_eq!(evo.distributions[0].probs, s.probabilities());
    }

    #[test]
    fn degenerate_ensemble_matches_evolve() {
        let p = SimParams::new(5.34, 2.89, 0.36)
            .with_kicks(50)
            .with_grid(256)
            .validate()
            .unwrap();
        let spec = EnsembleSpec::fixed(0.2, 1.1);
        let run = run_ensemble(&p, &spec, &[0, 25, 50]).unwrap();
        let evo = evolve(&p, 0.2, 1.1, &[0, 25, 50]).unwrap();
        assert_eq!(run.series, evo.series);
        for (a, b) in run.distributions.iter().zip(&evo.distributions) {
            assert_eq!(a.probs, b.probs);
        }
    }

    #[test]
    fn beta_zero_ensemble_is_parity_symmetric() {
        let p = SimParams::new(5.34, 2.89, 0.36)
            .with_kicks(100)
            .with_grid(512)
            .validate()
            .unwrap();
        let spec = EnsembleSpec {
            beta_sampling: Sampling::Fixed(0.0),
            ..EnsembleSpec::uniform(4, 11)
        };
        let run = run_ensemble(&p, &spec, &[100]).unwrap();
        let d = &run.distributions[0];
        for m in 1..256 {
            assert!((d.prob(m) - d.prob(-m)).abs() <= 1e-12, "m={m}");
        }
    }

    #[test]
    fn ensemble_independent_of_worker_count() {
        let p = SimParams::new(5.34, 2.89, 0.36)
            .with_kicks(30)
            .with_grid(256)
            .validate()
            .unwrap();
        let spec = EnsembleSpec::uniform(40, 3);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_ensemble(&p, &spec, &[30]).unwrap());
        let three = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| run_ensemble(&p, &spec, &[30]).unwrap());
        assert_eq!(one, three);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn one_kick_energy_is_bessel_second_moment(
            amp in 0.5f64..12.0,
            hbar in 0.5f64..4.0,
            beta in 0.0f64..1.0,
        ) {
            let mut prop = Propagator::new(1024);
            let mut s = WaveState::momentum_eigenstate(1024, 0, beta);
            let before = s.p2_mean();
            prop.kick(&mut s, amp, hbar).unwrap();
            let z = amp / hbar;
            // ⟨(m+β)²⟩ gains z²/2; from m = 0 it starts at β²
            prop_assert!((s.p2_mean() - before - z * z / 2.0).abs() < 1e-8);
        }

        #[test]
        fn flight_preserves_populations(hbar in 0.1f64..7.0, beta in 0.0f64..1.0, seed in 0u64..1000) {
            let n = 128;
            let mut s = WaveState::momentum_eigenstate(n, 0, beta);
            let mut prop = Propagator::new(n);
            prop.kick(&mut s, 3.0 + (seed % 7) as f64, 2.0).unwrap();
            let before = s.probabilities();
            prop.free_flight(&mut s, hbar).unwrap();
            for (a, b) in before.iter().zip(s.probabilities()) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }

        #[test]
        fn kick_preserves_norm(amp in 0.0f64..20.0, hbar in 0.3f64..5.0) {
            let mut prop = Propagator::new(512);
            let mut s = WaveState::momentum_eigenstate(512, 0, 0.0);
            prop.kick(&mut s, 2.0, 1.0).unwrap();
            let before = s.norm_sqr();
            prop.kick(&mut s, amp, hbar).unwrap();
            prop_assert!((s.norm_sqr() - before).abs() < 1e-12);
        }
    }
}
