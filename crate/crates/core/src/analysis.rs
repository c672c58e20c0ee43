//! Localization observables and the scaling-law prediction.

use serde::{Deserialize, Serialize};

use crate::distribution::MomentumDistribution;
use crate::error::{Error, Result};
use crate::stats::{origin_fit, weighted_line_fit};

/// Self-consistent-theory coefficient `π/√32`.
pub const ALPHA: f64 = 0.555_360_367_269_795_8;
pub const NOISE_FLOOR: f64 = 1e-8;
pub const DEFAULT_M_MIN: usize = 3;
pub const DEFAULT_X_MAX: f64 = 4.0;
pub const MIN_SCALING_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub m_min: usize,
    pub noise_floor: f64,
    /// Weight each `ln Π` point by `Π`; otherwise unit weights.
    pub weighted: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            m_min: DEFAULT_M_MIN,
            noise_floor: NOISE_FLOOR,
            weighted: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationFit {
    /// Localization length in lattice sites (units of `2ħk_L`).
    pub p_loc: f64,
    pub stderr: f64,
    pub m_min: usize,
    pub m_max: usize,
    /// R² of `ln Π` linear in `|m|`.
    pub r_squared: f64,
    /// R² of `ln Π` linear in `m²` over the same window and weights.
    pub gaussian_r_squared: f64,
}

impl LocalizationFit {
    pub fn exponential_preferred(&self) -> bool {
        self.r_squared > self.gaussian_r_squared
    }
}

/// `(Π(m) + Π(−m))/2` for `m = 0, 1, …`.
pub fn symmetrized(dist: &MomentumDistribution) -> Vec<f64> {
    (0..dist.half())
        .map(|m| 0.5 * (dist.prob(m) + dist.prob(-m)))
        .collect()
}

pub fn fit_exponential(dist: &MomentumDistribution) -> Result<LocalizationFit> {
    fit_exponential_with(dist, &FitOptions::default())
}

pub fn fit_exponential_with(dist: &MomentumDistribution, opts: &FitOptions) -> Result<LocalizationFit> {
    let m_min = opts.m_min.max(1);
    let sym = symmetrized(dist);
    let m_max = sym
        .iter()
        .rposition(|&p| p > opts.noise_floor)
        .unwrap_or(0);
    if m_max <= m_min + 4 {
        return Err(Error::InsufficientData(format!(
            "exponential fit needs m_max > m_min + 4, got window [{m_min}, {m_max}]"
        )));
    }
    let (mut xs, mut x2s, mut ys, mut ws) = (vec![], vec![], vec![], vec![]);
    for (m, &p) in sym.iter().enumerate().take(m_max + 1).skip(m_min) {
        if p > opts.noise_floor {
            xs.push(m as f64);
            x2s.push((m * m) as f64);
            ys.push(p.ln());
            ws.push(if opts.weighted { p } else { 1.0 });
        }
    }
    if xs.len() < 6 {
        return Err(Error::InsufficientData(format!(
            "only {} sites above the noise floor in [{m_min}, {m_max}]",
            xs.len()
        )));
    }
    let exp = weighted_line_fit(&xs, &ys, &ws)?;
    if exp.slope >= 0.0 {
        return Err(Error::NotLocalized {
            m_min: m_min as i64,
            m_max: m_max as i64,
            slope: exp.slope,
        });
    }
    let gauss = weighted_line_fit(&x2s, &ys, &ws)?;
    Ok(LocalizationFit {
        p_loc: -1.0 / exp.slope,
        stderr: exp.slope_stderr / (exp.slope * exp.slope),
        m_min,
        m_max,
        r_squared: exp.r_squared,
        gaussian_r_squared: gauss.r_squared,
    })
}

/// `½ Σ Π(m) (m+β)²`, in units of `(2ħk_L)²/2`.
pub fn kinetic_energy(dist: &MomentumDistribution, beta: f64) -> f64 {
    0.5 * dist
        .sites()
        .map(|(m, p)| p * (m as f64 + beta).powi(2))
        .sum::<f64>()
}

/// `1/(4Π₀²)`, which equals the kinetic energy of an exponential profile.
pub fn pi0_proxy(pi0: f64) -> Result<f64> {
    if !(pi0 > 0.0 && pi0 <= 1.0) {
        return Err(Error::invalid("pi0", format!("must lie in (0, 1], got {pi0}")));
    }
    Ok(1.0 / (4.0 * pi0 * pi0))
}

/// `p_loc = (K²/4ħ) exp(α ε K²/ħ²)` in scaled momentum units.
pub fn predicted_ploc(k: f64, hbar_eff: f64, epsilon: f64) -> f64 {
    k * k / (4.0 * hbar_eff) * (ALPHA * epsilon * k * k / (hbar_eff * hbar_eff)).exp()
}

/// Same prediction in lattice sites.
pub fn predicted_ploc_sites(k: f64, hbar_eff: f64, epsilon: f64) -> f64 {
    predicted_ploc(k, hbar_eff, epsilon) / hbar_eff
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    /// `εK²/ħ²`.
    pub x: f64,
    /// `E_kin(ε) / E_kin(0)`.
    pub y: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub hbar_eff: f64,
    pub epsilon: f64,
    pub t: usize,
}

/// Builds scaling points from `(ε, E_kin)` pairs at fixed `(K, ħ)` and `t`.
/// The pair with `ε = 0` sets the normalization.
pub fn scaling_points(k: f64, hbar_eff: f64, t: usize, energies: &[(f64, f64)]) -> Result<Vec<ScalingPoint>> {
    let e0 = energies
        .iter()
        .find(|(eps, _)| *eps == 0.0)
        .map(|&(_, e)| e)
        .ok_or_else(|| Error::InsufficientData("no ε = 0 reference energy".into()))?;
    if !(e0 > 0.0) {
        return Err(Error::invalid("E_kin(0)", format!("must be positive, got {e0}")));
    }
    Ok(energies
        .iter()
        .map(|&(epsilon, e)| ScalingPoint {
            x: epsilon * k * k / (hbar_eff * hbar_eff),
            y: e / e0,
            k,
            hbar_eff,
            epsilon,
            t,
        })
        .collect())
}

/// Re-divides every `y` by the `y` of the `x = 0` point.
pub fn normalize_to_origin(points: &[ScalingPoint]) -> Result<Vec<ScalingPoint>> {
    let y0 = points
        .iter()
        .find(|p| p.x == 0.0)
        .map(|p| p.y)
        .ok_or_else(|| Error::InsufficientData("no x = 0 point".into()))?;
    Ok(points.iter().map(|p| ScalingPoint { y: p.y / y0, ..*p }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub stderr: f64,
    pub n_points: usize,
    pub x_max: f64,
    /// `max y / min y` over the fitted points.
    pub y_span: f64,
}

impl ScalingFit {
    /// Relative deviation of the slope from `2α`.
    pub fn deviation_from_prediction(&self) -> f64 {
        self.slope / (2.0 * ALPHA) - 1.0
    }
}

/// Least squares of `ln y` against `x` through the origin, over `x ≤ x_max`.
pub fn scaling_fit(points: &[ScalingPoint], x_max: f64) -> Result<ScalingFit> {
    let used: Vec<&ScalingPoint> = points.iter().filter(|p| p.x <= x_max).collect();
    if used.len() < MIN_SCALING_POINTS || !used.iter().any(|p| p.x == 0.0) {
        return Err(Error::InsufficientData(format!(
            "scaling fit needs at least {MIN_SCALING_POINTS} points with x ≤ {x_max} including x = 0, got {}",
            used.len()
        )));
    }
    if let Some(p) = used.iter().find(|p| !(p.y > 0.0)) {
        return Err(Error::invalid("y", format!("must be positive, got {} at x = {}", p.y, p.x)));
    }
    let x: Vec<f64> = used.iter().map(|p| p.x).collect();
    let y: Vec<f64> = used.iter().map(|p| p.y.ln()).collect();
    let (slope, stderr) = origin_fit(&x, &y)?;
    let (lo, hi) = used
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    Ok(ScalingFit {
        slope,
        stderr,
        n_points: used.len(),
        x_max,
        y_span: hi / lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Provenance;
    use crate::params::SimParams;
    use proptest::prelude::*;

    fn dist_from(n: usize, f: impl Fn(i64) -> f64) -> MomentumDistribution {
        let half = (n / 2) as i64;
        let mut probs: Vec<f64> = (0..n as i64).map(|i| f(i - half)).collect();
        let s: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= s);
        MomentumDistribution {
            probs,
            time: 0,
            meta: Provenance {
                params: SimParams::new(5.34, 2.89, 0.0),
                ensemble: None,
            },
        }
    }

    fn exponential(p_loc: f64) -> MomentumDistribution {
        dist_from(1024, |m| (-(m.abs() as f64) / p_loc).exp())
    }

    #[test]
    fn alpha_value() {
        assert!((ALPHA - std::f64::consts::PI / 32f64.sqrt()).abs() < 1e-16);
        assert!((ALPHA - 0.555_360_367_269_795_8).abs() < 1e-15);
        assert!((2.0 * ALPHA - 1.1107).abs() < 1e-4);
    }

    #[test]
    fn recovers_injected_length() {
        let f = fit_exponential(&exponential(5.0)).unwrap();
        assert!((f.p_loc - 5.0).abs() < 0.05, "{}", f.p_loc);
        assert!(f.exponential_preferred());
        assert_eq!(f.m_min, 3);
        let u = fit_exponential_with(
            &exponential(5.0),
            &FitOptions {
                weighted: false,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!((u.p_loc - 5.0).abs() < 0.05);
    }

    #[test]
    fn gaussian_is_flagged() {
        let d = dist_from(1024, |m| (-((m * m) as f64) / (2.0 * 36.0)).exp());
        let f = fit_exponential(&d).unwrap();
        assert!(!f.exponential_preferred(), "{f:?}");
    }

    #[test]
    fn rising_profile_not_localized() {
        let d = dist_from(64, |m| 1.0 + (m.abs() as f64));
        assert!(matches!(fit_exponential(&d), Err(Error::NotLocalized { .. })));
    }

    #[test]
    fn narrow_profile_is_insufficient() {
        let d = dist_from(64, |m| if m.abs() <= 5 { 1.0 } else { 0.0 });
        assert!(matches!(fit_exponential(&d), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn kinetic_energy_examples() {
        assert_eq!(kinetic_energy(&dist_from(16, |m| (m == 0) as u8 as f64), 0.0), 0.0);
        assert_eq!(kinetic_energy(&dist_from(16, |m| (m.abs() == 2) as u8 as f64), 0.0), 2.0);
        let e = kinetic_energy(&exponential(5.0), 0.0);
        assert!((e / 25.0 - 1.0).abs() < 0.02, "{e}");
    }

    #[test]
    fn proxy_matches_energy_on_exponential() {
        assert_eq!(pi0_proxy(0.5).unwrap(), 1.0);
        assert!((pi0_proxy(0.1).unwrap() - 25.0).abs() < 1e-12);
        assert!(pi0_proxy(0.0).is_err());
        for p_loc in [5.0, 10.0, 20.0] {
            let d = exponential(p_loc);
            let proxy = pi0_proxy(d.prob(0)).unwrap();
            let e = kinetic_energy(&d, 0.0);
            assert!((proxy / e - 1.0).abs() < 0.02, "{p_loc}: {proxy} vs {e}");
        }
    }

    #[test]
    fn prediction_examples() {
        assert!((predicted_ploc(5.34, 2.89, 0.0) - 2.4667).abs() < 1e-4);
        let exponent = ALPHA * 0.36 * 5.34f64.powi(2) / 2.89f64.powi(2);
        assert!((exponent - 0.6826).abs() < 1e-3);
        assert!((predicted_ploc(5.34, 2.89, 0.36) - 4.88).abs() < 0.01);
        assert!((predicted_ploc_sites(5.34, 2.89, 0.0) - 2.4667 / 2.89).abs() < 1e-4);
    }

    #[test]
    fn synthetic_scaling_slope() {
        let energies: Vec<(f64, f64)> = (0..=10)
            .map(|i| {
                let eps = 0.06 * i as f64;
                let x = eps * 5.34f64.powi(2) / 2.89f64.powi(2);
                (eps, 3.0 * (2.0 * ALPHA * x).exp())
            })
            .collect();
        let pts = scaling_points(5.34, 2.89, 1000, &energies).unwrap();
        assert_eq!(pts[0].y, 1.0);
        let fit = scaling_fit(&pts, DEFAULT_X_MAX).unwrap();
        assert!((fit.slope - 2.0 * ALPHA).abs() < 1e-12);
        assert!(fit.deviation_from_prediction().abs() < 1e-12);
    }

    #[test]
    fn scaling_needs_origin_and_points() {
        let pt = |x: f64| ScalingPoint {
            x,
            y: x.exp(),
            k: 1.0,
            hbar_eff: 1.0,
            epsilon: x,
            t: 1,
        };
        let no_origin: Vec<_> = (1..=6).map(|i| pt(i as f64 * 0.5)).collect();
        assert!(scaling_fit(&no_origin, 4.0).is_err());
        let few: Vec<_> = (0..4).map(|i| pt(i as f64)).collect();
        assert!(scaling_fit(&few, 4.0).is_err());
        assert!(scaling_points(1.0, 1.0, 1, &[(0.1, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn fit_is_scale_invariant(c in 1e-3f64..1e3, p_loc in 2.0f64..15.0) {
            let a = exponential(p_loc);
            let mut b = a.clone();
            b.probs.iter_mut().for_each(|p| *p *= c);
            let s: f64 = b.probs.iter().sum();
            b.probs.iter_mut().for_each(|p| *p /= s);
            let (fa, fb) = (fit_exponential(&a).unwrap(), fit_exponential(&b).unwrap());
            prop_assert!((fa.p_loc - fb.p_loc).abs() < 1e-9 * fa.p_loc);
        }

        #[test]
        fn prediction_is_monotone(
            k in 1.0f64..10.0, hbar in 0.5f64..5.0, eps in 0.0f64..0.9, d in 0.01f64..1.0,
        ) {
            prop_assert!(predicted_ploc(k, hbar, eps + d * 0.1) > predicted_ploc(k, hbar, eps));
            prop_assert!(predicted_ploc(k + d, hbar, eps) > predicted_ploc(k, hbar, eps));
            prop_assert!(predicted_ploc(k, hbar + d, eps) < predicted_ploc(k, hbar, eps));
        }

        #[test]
        fn common_factor_cancels(c in 1e-2f64..1e2, slope in 0.2f64..2.0) {
            let pts: Vec<ScalingPoint> = (0..8)
                .map(|i| {
                    let x = 0.5 * i as f64;
                    ScalingPoint { x, y: (slope * x + 0.05 * (i % 3) as f64).exp(), k: 5.34, hbar_eff: 2.89, epsilon: 0.0, t: 1000 }
                })
                .collect();
            let scaled: Vec<ScalingPoint> = pts.iter().map(|p| ScalingPoint { y: p.y * c, ..*p }).collect();
            let a = scaling_fit(&normalize_to_origin(&pts).unwrap(), 4.0).unwrap();
            let b = scaling_fit(&normalize_to_origin(&scaled).unwrap(), 4.0).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-12);
        }
    }
}
