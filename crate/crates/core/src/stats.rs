//! Small regression and distribution-distance helpers.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Weighted coefficient of determination.
    pub r_squared: f64,
}

/// Weighted least squares fit of `y = a + b x`.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n != w.len() {
        return Err(Error::LengthMismatch {
            expected: n,
            got: y.len().min(w.len()),
        });
    }
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "line fit needs at least 3 points, got {n}"
        )));
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(x, w)| w * x).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - xm;
        let dy = y[i] - ym;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = (0..n)
        .map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    // effective sample size keeps the error meaningful for non-unit weights
    let n_eff = sw * sw / w.iter().map(|w| w * w).sum::<f64>();
    let dof = (n_eff - 2.0).max(1.0);
    let sigma2 = ss_res / sw * n_eff / dof;
    let slope_stderr = (sigma2 / (sxx / sw) / n_eff).sqrt();
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    })
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    weighted_line_fit(x, y, &vec![1.0; x.len()])
}

/// Least squares slope of `y = b x` through the origin, with its standard error.
pub fn origin_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::InsufficientData(format!(
            "origin fit needs at least 2 points, got {n}"
        )));
    }
    let sxx: f64 = x.iter().map(|x| x * x).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("all abscissae are zero".into()));
    }
    let slope = x.iter().zip(y).map(|(x, y)| x * y).sum::<f64>() / sxx;
    let ss_res: f64 = x.iter().zip(y).map(|(x, y)| (y - slope * x).powi(2)).sum();
    let stderr = (ss_res / (n as f64 - 1.0) / sxx).sqrt();
    Ok((slope, stderr))
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s: Vec<f64> = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Standard Cauchy CDF.
pub fn cauchy_cdf(x: f64) -> f64 {
    0.5 + x.atan() / std::f64::consts::PI
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = line_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 3.0).abs() < 1e-13);
        assert!(f.slope_stderr < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn noisy_line_stderr_is_plausible() {
        // alternating ±1 residuals around y = 2x over 0..100
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, x)| 2.0 * x + if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let f = line_fit(&x, &y).unwrap();
        // σ ≈ 1, Sxx = 83325 → stderr ≈ 1/√83325 ≈ 3.46e-3
        assert!((f.slope_stderr - 3.46e-3).abs() < 2e-4, "{}", f.slope_stderr);
    }

    #[test]
    fn origin_slope() {
        let (b, e) = origin_fit(&[0.0, 1.0, 2.0], &[0.0, 2.0, 4.0]).unwrap();
        assert_eq!(b, 2.0);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn ks_of_quantiles_is_small() {
        let n = 1000;
        let sample: Vec<f64> = (0..n)
            .map(|i| ((i as f64 + 0.5) / n as f64 - 0.5) * std::f64::consts::PI)
            .map(f64::tan)
            .collect();
        assert!(ks_distance(&sample, cauchy_cdf) <= 0.5 / n as f64 + 1e-12);
        assert_eq!(ks_two_sample(&sample, &sample), 0.0);
        let shifted: Vec<f64> = sample.iter().map(|x| x + 1000.0).collect();
        assert!(ks_two_sample(&sample, &shifted) > 0.99);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
