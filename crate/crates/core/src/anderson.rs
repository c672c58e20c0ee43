//! Mapping of the quasiperiodic kicked rotor onto a 2D Anderson-like lattice.
//!
//! The periodically kicked two-dimensional rotor
//! `H = p₁²/2 + ω₂ p₂ + K cos x₁ (1 + ε cos x₂) Σ δ(t − n)`
//! has a one-period operator `U = exp(−i H₀/ħ) exp(−i V/ħ)` (kick first).
//! For a Floquet state `Uφ = exp(−iE/ħ) φ`, the state `χ = (1 + iW)⁻¹ φ`
//! with `W = tan(V / 2ħ)` satisfies
//!
//! ```text
//! ε_m χ_m + Σ_{r≠0} W_r χ_{m+r} = 0,
//! ε_m = tan{ ½ [ (ħ m₁²/2 + ω₂ m₂) − E/ħ ] }
//! ```
//!
//! where `W_r` are the Fourier components of `W` on the torus. `W` is odd
//! under `x₁ → x₁ + π`, so `W_{0,0}` and every even-`r₁` component vanish.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{cauchy_cdf, ks_distance, ks_two_sample, median, pearson};

/// Distance to a pole of `tan` below which a site is resonant.
pub const RESONANCE_TOLERANCE: f64 = 1e-12;
/// Required gap between `K(1+ε)/2ħ` and `π/2`.
pub const SINGULARITY_MARGIN: f64 = 1e-6;
pub const DEFAULT_HOPPING_RANGE: usize = 16;
pub const MAX_MAPPING_LATTICE: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSite {
    pub m1: i64,
    pub m2: i64,
}

pub fn onsite_energy(m1: i64, m2: i64, energy: f64, hbar_eff: f64, omega2: f64) -> Result<f64> {
    let m1 = m1 as f64;
    let arg = 0.5 * ((hbar_eff * m1 * m1 / 2.0 + omega2 * m2 as f64) - energy / hbar_eff);
    let r = (arg - FRAC_PI_2).rem_euclid(PI);
    if r.min(PI - r) < RESONANCE_TOLERANCE {
        return Err(Error::ResonantSite {
            argument: arg,
            tolerance: RESONANCE_TOLERANCE,
        });
    }
    Ok(arg.tan())
}

/// On-site energies on a rectangular window of sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsiteField {
    pub m1_start: i64,
    pub m2_start: i64,
    pub n1: usize,
    pub n2: usize,
    pub energy: f64,
    pub hbar_eff: f64,
    pub omega2: f64,
    /// Row-major, `m1` outer.
    pub values: Vec<f64>,
}

impl OnsiteField {
    pub fn window(
        m1_start: i64,
        m2_start: i64,
        n1: usize,
        n2: usize,
        energy: f64,
        hbar_eff: f64,
        omega2: f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n1 * n2);
        for a in 0..n1 as i64 {
            for b in 0..n2 as i64 {
                values.push(onsite_energy(
                    m1_start + a,
                    m2_start + b,
                    energy,
                    hbar_eff,
                    omega2,
                )?);
            }
        }
        Ok(OnsiteField {
            m1_start,
            m2_start,
            n1,
            n2,
            energy,
            hbar_eff,
            omega2,
            values,
        })
    }

    /// Square window of side `n` centred on the origin.
    pub fn centered(n: usize, energy: f64, hbar_eff: f64, omega2: f64) -> Result<Self> {
        let start = -((n / 2) as i64);
        Self::window(start, start, n, n, energy, hbar_eff, omega2)
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n2 + b]
    }

    /// Pearson correlation between values at `m` and `m + (d1, d2)`.
    pub fn autocorrelation(&self, d1: usize, d2: usize) -> f64 {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for a in 0..self.n1.saturating_sub(d1) {
            for b in 0..self.n2.saturating_sub(d2) {
                x.push(self.get(a, b));
                y.push(self.get(a + d1, b + d2));
            }
        }
        pearson(&x, &y)
    }

    pub fn statistics(&self) -> OnsiteStatistics {
        OnsiteStatistics {
            n_sites: self.values.len(),
            ks_cauchy: ks_distance(&self.values, cauchy_cdf),
            corr_10: self.autocorrelation(1, 0),
            corr_01: self.autocorrelation(0, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsiteStatistics {
    pub n_sites: usize,
    /// KS distance of the empirical distribution to the standard Cauchy law.
    pub ks_cauchy: f64,
    pub corr_10: f64,
    pub corr_01: f64,
}

/// Two-sample KS distance between the value distributions of two windows.
pub fn onsite_ks_between(a: &OnsiteField, b: &OnsiteField) -> f64 {
    ks_two_sample(&a.values, &b.values)
}

/// Largest value of `|K cos x₁ (1 + ε cos x₂)| / 2ħ`.
pub fn tan_argument_bound(k: f64, hbar_eff: f64, epsilon: f64) -> f64 {
    k.abs() * (1.0 + epsilon.abs()) / (2.0 * hbar_eff)
}

fn check_regular(k: f64, hbar_eff: f64, epsilon: f64) -> Result<()> {
    let value = tan_argument_bound(k, hbar_eff, epsilon);
    if value.is_nan() || value >= FRAC_PI_2 - SINGULARITY_MARGIN {
        return Err(Error::SingularMapping { value });
    }
    Ok(())
}

/// `W(x₁, x₂) = tan[K cos x₁ (1 + ε cos x₂) / 2ħ]`.
pub fn hopping_function(k: f64, hbar_eff: f64, epsilon: f64, x1: f64, x2: f64) -> f64 {
    (k * x1.cos() * (1.0 + epsilon * x2.cos()) / (2.0 * hbar_eff)).tan()
}

/// In-place 2D transform of an `n × n` row-major array.
fn fft2(data: &mut [Complex64], n: usize, forward: bool) {
    let mut planner = FftPlanner::new();
    let plan = if forward {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    };
    // rows
    plan.process(data);
    // columns
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        plan.process(&mut col);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
}

/// Samples `f(x₁, x₂)` on the `n × n` uniform torus grid and returns its
/// discrete Fourier coefficients `(1/n²) Σ f e^{−i(r₁x₁ + r₂x₂)}`, indexed
/// by `(r₁ mod n, r₂ mod n)`.
fn torus_coefficients(n: usize, f: impl Fn(f64, f64) -> Complex64) -> Vec<Complex64> {
    let mut data = Vec::with_capacity(n * n);
    for j1 in 0..n {
        let x1 = TAU * j1 as f64 / n as f64;
        for j2 in 0..n {
            data.push(f(x1, TAU * j2 as f64 / n as f64));
        }
    }
    fft2(&mut data, n, true);
    let scale = 1.0 / (n * n) as f64;
    data.iter_mut().for_each(|c| *c *= scale);
    data
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoppingTable {
    #[serde(rename = "K")]
    pub k: f64,
    pub hbar_eff: f64,
    pub epsilon: f64,
    pub range: usize,
    pub quadrature_n: usize,
    /// `W_{r₁,r₂}` for `r ∈ [−R, R]²`, row-major with `r₁` outer.
    pub coefficients: Vec<f64>,
    /// Largest discarded imaginary part.
    pub max_imag: f64,
}

impl HoppingTable {
    pub fn side(&self) -> usize {
        2 * self.range + 1
    }

    pub fn get(&self, r1: i64, r2: i64) -> f64 {
        let r = self.range as i64;
        if r1.abs() > r || r2.abs() > r {
            return 0.0;
        }
        self.coefficients[((r1 + r) as usize) * self.side() + (r2 + r) as usize]
    }

    /// Non-zero displacements with their coefficients.
    pub fn entries(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let r = self.range as i64;
        (-r..=r)
            .flat_map(move |r1| (-r..=r).map(move |r2| (r1, r2)))
            .filter(|&(r1, r2)| (r1, r2) != (0, 0))
            .map(move |(r1, r2)| (r1, r2, self.get(r1, r2)))
    }

    /// Largest magnitude on the shell `max(|r₁|, |r₂|) = s`.
    pub fn shell_max(&self, s: usize) -> f64 {
        self.entries()
            .filter(|&(r1, r2, _)| r1.unsigned_abs().max(r2.unsigned_abs()) as usize == s)
            .map(|(_, _, w)| w.abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from `W_r = W_{−r₁,r₂} = W_{r₁,−r₂} = W_{−r}`.
    pub fn symmetry_violation(&self) -> f64 {
        self.entries()
            .map(|(r1, r2, w)| {
                [
                    self.get(-r1, -r2),
                    self.get(-r1, r2),
                    self.get(r1, -r2),
                ]
                .iter()
                .map(|v| (v - w).abs())
                .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Fourier components of `W` by trapezoidal quadrature on a
/// `quadrature_n × quadrature_n` torus grid.
pub fn hopping_table(
    k: f64,
    hbar_eff: f64,
    epsilon: f64,
    range: usize,
    quadrature_n: usize,
) -> Result<HoppingTable> {
    check_regular(k, hbar_eff, epsilon)?;
    if quadrature_n < 8 * range.max(1) {
        return Err(Error::invalid(
            "quadrature_n",
            format!("must be at least 8R = {}, got {quadrature_n}", 8 * range.max(1)),
        ));
    }
    let n = quadrature_n;
    let data = torus_coefficients(n, |x1, x2| {
        Complex64::new(hopping_function(k, hbar_eff, epsilon, x1, x2), 0.0)
    });
    let side = 2 * range + 1;
    let mut coefficients = Vec::with_capacity(side * side);
    let mut max_imag: f64 = 0.0;
    let r = range as i64;
    for r1 in -r..=r {
        for r2 in -r..=r {
            let c = data[(r1.rem_euclid(n as i64) as usize) * n + r2.rem_euclid(n as i64) as usize];
            max_imag = max_imag.max(c.im.abs());
            coefficients.push(c.re);
        }
    }
    Ok(HoppingTable {
        k,
        hbar_eff,
        epsilon,
        range,
        quadrature_n,
        coefficients,
        max_imag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyReport {
    /// RMS of hoppings with `r₂ = 0`.
    pub rms_dir1: f64,
    /// RMS of hoppings with `r₂ ≠ 0`.
    pub rms_dir2: f64,
    pub ratio: f64,
}

pub fn anisotropy_report(table: &HoppingTable) -> AnisotropyReport {
    let (mut s1, mut s2) = (0.0, 0.0);
    for (_, r2, w) in table.entries() {
        if r2 == 0 {
            s1 += w * w;
        } else {
            s2 += w * w;
        }
    }
    let (rms_dir1, rms_dir2) = (s1.sqrt(), s2.sqrt());
    AnisotropyReport {
        rms_dir1,
        rms_dir2,
        ratio: if rms_dir1 > 0.0 { rms_dir2 / rms_dir1 } else { 0.0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingOptions {
    /// Hopping range `R`; also the interior margin.
    pub hopping_range: usize,
    pub quadrature_n: usize,
    pub n_samples: usize,
    /// Sites with `|ε_m|` above this are treated as resonant and skipped.
    pub resonance_cutoff: f64,
    pub residual_threshold: f64,
}

impl Default for MappingOptions {
    fn default() -> Self {
        MappingOptions {
            hopping_range: 10,
            quadrature_n: 256,
            n_samples: 64,
            resonance_cutoff: 1e8,
            residual_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateResidual {
    pub index: usize,
    pub quasi_energy: f64,
    /// `‖Uφ − λφ‖`.
    pub eigen_residual: f64,
    /// Interior lattice-equation residual relative to `‖χ‖`.
    pub residual: f64,
    pub resonant_sites: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingReport {
    #[serde(rename = "K")]
    pub k: f64,
    pub hbar_eff: f64,
    pub epsilon: f64,
    pub omega2: f64,
    pub lattice_n: usize,
    pub margin: usize,
    pub n_states: usize,
    pub max_residual: f64,
    pub median_residual: f64,
    /// Fraction of sampled states with residual at or below the threshold.
    pub fraction_below: f64,
    pub residual_threshold: f64,
    pub resonant_sites_excluded: usize,
    pub samples: Vec<StateResidual>,
}

/// One-period operator on the `L × L` plane-wave torus, natural site order
/// (`i = m + L/2` along each axis, flattened `i₁ L + i₂`).
pub fn floquet_matrix(
    k: f64,
    hbar_eff: f64,
    epsilon: f64,
    omega2: f64,
    lattice_n: usize,
) -> DMatrix<Complex64> {
    let l = lattice_n;
    let kick = torus_coefficients(l, |x1, x2| {
        let v = k * x1.cos() * (1.0 + epsilon * x2.cos());
        Complex64::from_polar(1.0, -v / hbar_eff)
    });
    let half = (l / 2) as i64;
    let free: Vec<Complex64> = (0..l * l)
        .map(|idx| {
            let m1 = (idx / l) as i64 - half;
            let m2 = (idx % l) as i64 - half;
            let phase = hbar_eff * (m1 * m1) as f64 / 2.0 + omega2 * m2 as f64;
            Complex64::from_polar(1.0, -phase)
        })
        .collect();
    DMatrix::from_fn(l * l, l * l, |row, col| {
        let d1 = ((row / l) as i64 - (col / l) as i64).rem_euclid(l as i64) as usize;
        let d2 = ((row % l) as i64 - (col % l) as i64).rem_euclid(l as i64) as usize;
        free[row] * kick[d1 * l + d2]
    })
}

/// Diagonalizes a unitary matrix. For a normal matrix the Schur form is
/// diagonal and the Schur vectors are eigenvectors.
fn diagonalize_unitary(u: DMatrix<Complex64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let n = u.nrows();
    let schur = nalgebra::linalg::Schur::try_new(u, 1e-14, 10_000)
        .ok_or_else(|| Error::Diagonalization(format!("Schur iteration did not converge (n = {n})")))?;
    let (q, t) = schur.unpack();
    let values = (0..n).map(|i| t[(i, i)]).collect();
    Ok((values, q))
}

/// Orthonormal bases of the even and odd subspaces under `m₁ → −m₁` on the
/// `L × L` torus. Each vector is a list of `(index, coefficient)`.
fn parity_bases(l: usize) -> [Vec<Vec<(usize, f64)>>; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (mut even, mut odd) = (Vec::new(), Vec::new());
    for i1 in 0..l {
        // natural index of −m₁; the site m₁ = −L/2 is its own mirror
        let j1 = (l - i1) % l;
        for i2 in 0..l {
            let (a, b) = (i1 * l + i2, j1 * l + i2);
            match a.cmp(&b) {
                std::cmp::Ordering::Equal => even.push(vec![(a, 1.0)]),
                std::cmp::Ordering::Less => {
                    even.push(vec![(a, h), (b, h)]);
                    odd.push(vec![(a, h), (b, -h)]);
                }
                std::cmp::Ordering::Greater => {}
            }
        }
    }
    [even, odd]
}

/// Eigenpairs of `u`, which commutes with `m₁ → −m₁`, found block by block.
fn diagonalize_by_parity(u: &DMatrix<Complex64>, l: usize) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let n = u.nrows();
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    let mut col = 0;
    for basis in parity_bases(l) {
        let d = basis.len();
        let block = DMatrix::from_fn(d, d, |a, b| {
            let mut z = Complex64::new(0.0, 0.0);
            for &(i, ci) in &basis[a] {
                for &(j, cj) in &basis[b] {
                    z += u[(i, j)] * (ci * cj);
                }
            }
            z
        });
        let (vals, vecs) = diagonalize_unitary(block)?;
        for (k, v) in vals.into_iter().enumerate() {
            values.push(v);
            for (a, entries) in basis.iter().enumerate() {
                for &(i, c) in entries {
                    vectors[(i, col)] += vecs[(a, k)] * c;
                }
            }
            col += 1;
        }
    }
    Ok((values, vectors))
}

/// `χ = (1 + iW)⁻¹ φ`, evaluated pointwise on the torus grid.
fn chi_from_phi(phi: &[Complex64], w_grid: &[f64], l: usize) -> Vec<Complex64> {
    let mut data = phi.to_vec();
    fft2(&mut data, l, false);
    for (d, w) in data.iter_mut().zip(w_grid) {
        *d /= Complex64::new(1.0, *w);
    }
    fft2(&mut data, l, true);
    let scale = 1.0 / (l * l) as f64;
    data.iter_mut().for_each(|c| *c *= scale);
    data
}

/// Builds and diagonalizes the one-period operator of the 2D rotor on an
/// `L × L` plane-wave torus, maps a sample of its eigenvectors to `χ`, and
/// measures how well `χ` satisfies the lattice equation on sites at least
/// `R` away from every edge.
pub fn verify_mapping(
    k: f64,
    hbar_eff: f64,
    epsilon: f64,
    omega2: f64,
    lattice_n: usize,
    opts: &MappingOptions,
) -> Result<MappingReport> {
    let l = lattice_n;
    if l % 2 != 0 || l > MAX_MAPPING_LATTICE {
        return Err(Error::invalid(
            "lattice_n",
            format!("must be even and at most {MAX_MAPPING_LATTICE}, got {l}"),
        ));
    }
    let margin = opts.hopping_range;
    if l <= 2 * margin {
        return Err(Error::invalid(
            "lattice_n",
            format!("no interior left with margin {margin} on a {l}×{l} lattice"),
        ));
    }
    let table = hopping_table(k, hbar_eff, epsilon, opts.hopping_range, opts.quadrature_n)?;

    let u = floquet_matrix(k, hbar_eff, epsilon, omega2, l);
    let (values, vectors) = diagonalize_by_parity(&u, l)?;
    let n_states = values.len();

    let mut w_grid = Vec::with_capacity(l * l);
    for j1 in 0..l {
        for j2 in 0..l {
            let x1 = TAU * j1 as f64 / l as f64;
            let x2 = TAU * j2 as f64 / l as f64;
            w_grid.push(hopping_function(k, hbar_eff, epsilon, x1, x2));
        }
    }
    let hops: Vec<(i64, i64, f64)> = table.entries().filter(|e| e.2 != 0.0).collect();
    let half = (l / 2) as i64;

    let n_samples = opts.n_samples.clamp(1, n_states);
    let picks: Vec<usize> = (0..n_samples).map(|s| s * n_states / n_samples).collect();
    let samples: Vec<StateResidual> = picks
        .par_iter()
        .map(|&index| {
            let phi: Vec<Complex64> = vectors.column(index).iter().copied().collect();
            let lambda = values[index];
            let u_phi = &u * vectors.column(index);
            let eigen_residual = u_phi
                .iter()
                .zip(&phi)
                .map(|(a, b)| (a - lambda * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let quasi_energy = -hbar_eff * lambda.arg();
            let chi = chi_from_phi(&phi, &w_grid, l);
            let chi_norm = chi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();

            let mut resonant_sites = 0;
            let mut res2 = 0.0;
            for i1 in margin..l - margin {
                for i2 in margin..l - margin {
                    let m1 = i1 as i64 - half;
                    let m2 = i2 as i64 - half;
                    let eps_m = match onsite_energy(m1, m2, quasi_energy, hbar_eff, omega2) {
                        Ok(e) if e.abs() <= opts.resonance_cutoff => e,
                        _ => {
                            resonant_sites += 1;
                            continue;
                        }
                    };
                    let mut r = chi[i1 * l + i2] * eps_m;
                    for &(r1, r2, w) in &hops {
                        let j1 = (i1 as i64 + r1) as usize;
                        let j2 = (i2 as i64 + r2) as usize;
                        r += chi[j1 * l + j2] * w;
                    }
                    res2 += r.norm_sqr();
                }
            }
            StateResidual {
                index,
                quasi_energy,
                eigen_residual,
                residual: res2.sqrt() / chi_norm,
                resonant_sites,
            }
        })
        .collect();

    let mut residuals: Vec<f64> = samples.iter().map(|s| s.residual).collect();
    let below = residuals
        .iter()
        .filter(|&&r| r <= opts.residual_threshold)
        .count();
    Ok(MappingReport {
        k,
        hbar_eff,
        epsilon,
        omega2,
        lattice_n: l,
        margin,
        n_states,
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        median_residual: median(&mut residuals),
        fraction_below: below as f64 / samples.len() as f64,
        residual_threshold: opts.residual_threshold,
        resonant_sites_excluded: samples.iter().map(|s| s.resonant_sites).sum(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::DEFAULT_OMEGA2;

    #[test]
    fn onsite_examples() {
        assert_eq!(onsite_energy(0, 0, 0.0, 2.89, DEFAULT_OMEGA2).unwrap(), 0.0);
        let v = onsite_energy(1, 0, 0.0, 2.89, DEFAULT_OMEGA2).unwrap();
        assert!((v - 0.7225f64.tan()).abs() < 1e-15);
    }

    #[test]
    fn resonant_site_is_reported() {
        // ½(−E/ħ) = −π/2 exactly at E = π ħ
        let err = onsite_energy(0, 0, PI * 2.0, 2.0, DEFAULT_OMEGA2).unwrap_err();
        assert!(matches!(err, Error::ResonantSite { .. }));
    }

    #[test]
    fn energy_shift_moves_only_onsite_terms() {
        let a = OnsiteField::centered(8, 0.0, 2.89, DEFAULT_OMEGA2).unwrap();
        let b = OnsiteField::centered(8, 0.4, 2.89, DEFAULT_OMEGA2).unwrap();
        assert_ne!(a.values, b.values);
        for (i, v) in b.values.iter().enumerate() {
            let m1 = a.m1_start + (i / 8) as i64;
            let m2 = a.m2_start + (i % 8) as i64;
            let expect = (0.5 * (2.89 * (m1 * m1) as f64 / 2.0 + DEFAULT_OMEGA2 * m2 as f64)
                - 0.2 / 2.89)
                .tan();
            assert!((v - expect).abs() < 1e-9 * (1.0 + expect.abs()));
        }
        // the hopping table has no energy argument at all
        let t = hopping_table(2.0, 2.89, 0.2, 4, 64).unwrap();
        assert_eq!(t, hopping_table(2.0, 2.89, 0.2, 4, 64).unwrap());
    }

    #[test]
    fn singular_parameters_rejected() {
        let err = hopping_table(7.26, 3.46, 0.6, 8, 128).unwrap_err();
        assert!(matches!(err, Error::SingularMapping { .. }));
        assert!(hopping_table(5.34, 2.89, 0.36, 8, 128).is_ok());
    }

    #[test]
    fn quadrature_must_resolve_range() {
        assert!(hopping_table(2.0, 2.89, 0.2, 8, 32).is_err());
    }

    #[test]
    fn unmodulated_table_lives_on_axis() {
        let t = hopping_table(5.34, 2.89, 0.0, 8, 128).unwrap();
        for (_, r2, w) in t.entries() {
            if r2 != 0 {
                assert!(w.abs() < 1e-12);
            }
        }
        assert!(anisotropy_report(&t).ratio < 1e-12);
    }

    #[test]
    fn weak_kick_linearizes() {
        // tan u ≈ u: W ≈ (K/2ħ) cos x₁ (1 + ε cos x₂)
        let (k, hbar, eps) = (1e-4, 2.89, 0.3);
        let t = hopping_table(k, hbar, eps, 4, 64).unwrap();
        let a = k / (2.0 * hbar);
        for (r1, r2, w) in t.entries() {
            let expect = match (r1.abs(), r2.abs()) {
                (1, 0) => a / 2.0,
                (1, 1) => a * eps / 4.0,
                _ => 0.0,
            };
            assert!((w - expect).abs() < 1e-12 * a.max(1.0) + 1e-3 * expect.abs(), "{r1},{r2}");
        }
    }

    #[test]
    fn table_symmetry_and_decay() {
        let t = hopping_table(5.34, 2.89, 0.36, DEFAULT_HOPPING_RANGE, 256).unwrap();
        assert!(t.symmetry_violation() < 1e-10);
        assert!(t.max_imag < 1e-10);
        let overall = (1..=t.range).map(|s| t.shell_max(s)).fold(0.0, f64::max);
        assert!(t.shell_max(t.range) < 1e-3 * overall);
        // W_{0,0} and even r₁ vanish
        assert!(t.get(0, 0).abs() < 1e-14 && t.get(2, 1).abs() < 1e-14);
    }

    #[test]
    fn table_converges_under_refinement() {
        let a = hopping_table(5.34, 2.89, 0.36, DEFAULT_HOPPING_RANGE, 128).unwrap();
        let b = hopping_table(5.34, 2.89, 0.36, DEFAULT_HOPPING_RANGE, 256).unwrap();
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn anisotropy_scales_with_modulation() {
        let ratio = |eps| anisotropy_report(&hopping_table(1.0, 2.89, eps, 8, 128).unwrap()).ratio;
        let r = ratio(0.2) / ratio(0.1);
        assert!((r - 2.0).abs() < 0.2, "{r}");
    }

    #[test]
    fn floquet_matrix_is_unitary() {
        let u = floquet_matrix(2.0, 2.89, 0.2, DEFAULT_OMEGA2, 8);
        let id = u.adjoint() * &u;
        for i in 0..64 {
            for j in 0..64 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - Complex64::new(e, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn parity_bases_are_complete() {
        for l in [4, 8] {
            let [even, odd] = parity_bases(l);
            assert_eq!(even.len(), (l / 2 + 1) * l);
            assert_eq!(odd.len(), (l / 2 - 1) * l);
            let mut weight = vec![0.0; l * l];
            for v in even.iter().chain(&odd) {
                for &(i, c) in v {
                    weight[i] += c * c;
                }
            }
            assert!(weight.iter().all(|w| (w - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn block_eigenpairs_match_full_operator() {
        let u = floquet_matrix(2.0, 2.89, 0.2, DEFAULT_OMEGA2, 8);
        let (vals, vecs) = diagonalize_by_parity(&u, 8).unwrap();
        assert_eq!(vals.len(), 64);
        for k in 0..64 {
            let v = vecs.column(k);
            let r = (&u * v - v * vals[k]).norm();
            assert!(r < 1e-12, "{k}: {r}");
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn small_lattice_mapping_holds() {
        let opts = MappingOptions {
            hopping_range: 5,
            quadrature_n: 128,
            n_samples: 40,
            ..MappingOptions::default()
        };
        let rep = verify_mapping(2.0, 2.89, 0.2, DEFAULT_OMEGA2, 16, &opts).unwrap();
        assert_eq!(rep.n_states, 256);
        assert!(rep.samples.iter().all(|s| s.eigen_residual < 1e-9));
        assert!(rep.median_residual < 1e-4, "{}", rep.median_residual);
    }

    #[test]
    fn unmodulated_mapping_reduces_to_chains() {
        let opts = MappingOptions {
            hopping_range: 5,
            quadrature_n: 128,
            n_samples: 32,
            ..MappingOptions::default()
        };
        let rep = verify_mapping(2.0, 2.89, 0.0, DEFAULT_OMEGA2, 16, &opts).unwrap();
        assert!(rep.median_residual < 1e-4, "{}", rep.median_residual);
    }

    #[test]
    fn mapping_rejects_large_lattice() {
        let err = verify_mapping(2.0, 2.89, 0.2, DEFAULT_OMEGA2, 64, &MappingOptions::default());
        assert!(err.is_err());
    }
}
