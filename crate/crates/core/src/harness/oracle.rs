//! Analytic reference curves: a centered Gaussian and the centered maximum
//! of two standard normals with correlation `r`.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCurves {
    pub z: Vec<f64>,
    pub density: Vec<f64>,
    pub g: Vec<f64>,
    /// `P(Z ≥ z)`.
    pub tail: Vec<f64>,
    pub abs_mean: f64,
    pub variance: f64,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn normal_pdf(z: f64, var: f64) -> f64 {
    (-z * z / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

pub fn gaussian_curves(var: f64, grid: &[f64]) -> Result<OracleCurves> {
    if !(var > 0.0) {
        return Err(Error::domain(format!(
            "variance must be positive, got {var}"
        )));
    }
    let sd = var.sqrt();
    let n = std_normal();
    Ok(OracleCurves {
        z: grid.to_vec(),
        density: grid.iter().map(|&z| normal_pdf(z, var)).collect(),
        g: vec![var; grid.len()],
        tail: grid.iter().map(|&z| n.sf(z / sd)).collect(),
        abs_mean: sd * (2.0 / PI).sqrt(),
        variance: var,
    })
}

/// `E max(N₁, N₂) = √((1 − r)/π)` for unit-variance normals with correlation `r`.
pub fn bivariate_max_mean(r: f64) -> f64 {
    ((1.0 - r) / PI).sqrt()
}

/// Density of `max(N₁, N₂) − E max` at `z`: `2φ(m)Φ(m√((1−r)/(1+r)))`, `m = z + E max`.
pub fn bivariate_max_density(r: f64, z: f64) -> f64 {
    let m = z + bivariate_max_mean(r);
    2.0 * normal_pdf(m, 1.0) * std_normal().cdf(m * ((1.0 - r) / (1.0 + r)).sqrt())
}

/// Curves for the centered bivariate maximum. Tail, `E|Z|`, variance and
/// `g(z) = ∫_z^∞ yρ(y)dy / ρ(z)` come from fine trapezoid quadrature.
pub fn bivariate_max_curves(r: f64, grid: &[f64]) -> Result<OracleCurves> {
    if !(r > -1.0 && r < 1.0) {
        return Err(Error::domain(format!(
            "correlation must lie in (-1, 1), got {r}"
        )));
    }
    const LO: f64 = -12.0;
    const HI: f64 = 12.0;
    const STEPS: usize = 240_000;
    let dx = (HI - LO) / STEPS as f64;
    let xs: Vec<f64> = (0..=STEPS).map(|k| LO + dx * k as f64).collect();
    let rho: Vec<f64> = xs.iter().map(|&x| bivariate_max_density(r, x)).collect();
    // suffix integrals of ρ and yρ
    let mut tail = vec![0.0; STEPS + 1];
    let mut first = vec![0.0; STEPS + 1];
    for k in (0..STEPS).rev() {
        tail[k] = tail[k + 1] + 0.5 * dx * (rho[k] + rho[k + 1]);
        first[k] = first[k + 1] + 0.5 * dx * (xs[k] * rho[k] + xs[k + 1] * rho[k + 1]);
    }
    let at = |v: &[f64], z: f64| -> f64 {
        let t = ((z - LO) / dx).clamp(0.0, STEPS as f64);
        let k = (t.floor() as usize).min(STEPS - 1);
        let w = t - k as f64;
        v[k] + w * (v[k + 1] - v[k])
    };
    let abs_mean = 2.0 * at(&first, 0.0);
    let variance: f64 = xs
        .windows(2)
        .zip(rho.windows(2))
        .map(|(x, p)| 0.5 * dx * (x[0] * x[0] * p[0] + x[1] * x[1] * p[1]))
        .sum();
    let density: Vec<f64> = grid.iter().map(|&z| bivariate_max_density(r, z)).collect();
    let g = grid
        .iter()
        .zip(&density)
        .map(|(&z, d)| at(&first, z) / d)
        .collect();
    Ok(OracleCurves {
        z: grid.to_vec(),
        density,
        g,
        tail: grid.iter().map(|&z| at(&tail, z)).collect(),
        abs_mean,
        variance,
    })
}
