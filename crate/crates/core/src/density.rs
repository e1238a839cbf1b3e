//! The density formula `ρ(z) = E|Z| / (2g(z)) · exp(−∫₀ᶻ x/g(x) dx)`, the
//! Gaussian envelopes it implies, and two self-consistency checks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::mean_sd;
use crate::gest::{interpolate, sorted_copy, GEstimate, GSamples};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub z: Vec<f64>,
    /// `NaN` outside the valid region.
    pub rho: Vec<f64>,
    pub valid: Vec<bool>,
    /// Conservative relative standard error of `ρ̂` from the stderr of `ĝ`.
    pub rel_stderr: Vec<f64>,
    pub abs_mean: f64,
    /// `ρ̂` at `z = 0` from the interpolated `ĝ(0)`.
    pub rho_at_zero: f64,
    /// Trapezoid mass over the valid region. Not renormalized.
    pub mass: f64,
    /// Trapezoid mean over the valid region.
    pub mean: f64,
}

impl DensityEstimate {
    pub fn valid_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.z
            .iter()
            .zip(&self.rho)
            .zip(&self.valid)
            .filter(|(_, ok)| **ok)
            .map(|((z, r), _)| (*z, *r))
    }

    pub fn interpolate(&self, x: f64) -> Option<f64> {
        interpolate(&self.z, &self.rho, x).filter(|r| r.is_finite())
    }
}

/// Evaluates the density formula on the unflagged region around 0.
///
/// The inner integral is a cumulative trapezoid started at 0 and run outward
/// in both directions.
pub fn density_from_g(estimate: &GEstimate, abs_mean: f64) -> Result<DensityEstimate> {
    if !(abs_mean > 0.0 && abs_mean.is_finite()) {
        return Err(Error::domain(format!(
            "E|Z| must be positive, got {abs_mean}"
        )));
    }
    let (lo, hi) = estimate.valid_region_around_zero()?;
    let z = &estimate.z;
    let g = &estimate.ghat;
    let n = z.len();
    let f = |k: usize| z[k] / g[k];
    let df = |k: usize| (z[k] * estimate.stderr[k] / (g[k] * g[k])).abs();

    let mut integral = vec![f64::NAN; n];
    let mut integral_sd = vec![f64::NAN; n];
    // cell containing 0: [c, c + 1]
    let c = z.partition_point(|&x| x <= 0.0).clamp(1, n - 1) - 1;
    integral[c] = 0.5 * z[c] * f(c);
    integral[c + 1] = 0.5 * z[c + 1] * f(c + 1);
    integral_sd[c] = 0.5 * z[c].abs() * nan_to_zero(df(c));
    integral_sd[c + 1] = 0.5 * z[c + 1].abs() * nan_to_zero(df(c + 1));
    for k in c + 2..hi {
        let dz = z[k] - z[k - 1];
        integral[k] = integral[k - 1] + 0.5 * dz * (f(k - 1) + f(k));
        integral_sd[k] = integral_sd[k - 1] + 0.5 * dz * nan_to_zero(df(k - 1) + df(k));
    }
    for k in (lo..c).rev() {
        let dz = z[k + 1] - z[k];
        integral[k] = integral[k + 1] - 0.5 * dz * (f(k) + f(k + 1));
        integral_sd[k] = integral_sd[k + 1] + 0.5 * dz * nan_to_zero(df(k) + df(k + 1));
    }

    let mut rho = vec![f64::NAN; n];
    let mut valid = vec![false; n];
    let mut rel_stderr = vec![f64::NAN; n];
    for k in lo..hi {
        rho[k] = abs_mean / (2.0 * g[k]) * (-integral[k]).exp();
        valid[k] = true;
        let rel_g = nan_to_zero(estimate.stderr[k] / g[k]);
        rel_stderr[k] = (rel_g * rel_g + integral_sd[k] * integral_sd[k]).sqrt();
    }
    let g0 = estimate
        .interpolate(0.0)
        .ok_or_else(|| Error::domain("z = 0 lies outside the g grid"))?;

    let (mut mass, mut mean) = (0.0, 0.0);
    for k in lo + 1..hi {
        let dz = z[k] - z[k - 1];
        mass += 0.5 * dz * (rho[k - 1] + rho[k]);
        mean += 0.5 * dz * (z[k - 1] * rho[k - 1] + z[k] * rho[k]);
    }
    Ok(DensityEstimate {
        z: z.clone(),
        rho,
        valid,
        rel_stderr,
        abs_mean,
        rho_at_zero: abs_mean / (2.0 * g0),
        mass,
        mean,
    })
}

fn nan_to_zero(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

/// Pointwise Gaussian envelope of a density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub z: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub sigma_min2: f64,
    pub sigma_max2: f64,
    pub abs_mean: f64,
    pub source: String,
}

/// `(lower, upper)` of the envelope at one point.
pub fn envelope_at(sigma_min2: f64, sigma_max2: f64, abs_mean: f64, z: f64) -> (f64, f64) {
    let lower = abs_mean / (2.0 * sigma_max2) * (-z * z / (2.0 * sigma_min2)).exp();
    let upper = abs_mean / (2.0 * sigma_min2) * (-z * z / (2.0 * sigma_max2)).exp();
    (lower, upper)
}

/// `E|Z|/(2σ_max²) e^{−z²/(2σ_min²)} ≤ ρ(z) ≤ E|Z|/(2σ_min²) e^{−z²/(2σ_max²)}`.
pub fn gaussian_envelope(
    sigma_min2: f64,
    sigma_max2: f64,
    abs_mean: f64,
    grid: &[f64],
) -> Result<Envelope> {
    if !(sigma_min2 > 0.0) {
        return Err(Error::DegenerateEnvelope(sigma_min2));
    }
    if !(sigma_min2 <= sigma_max2) || !sigma_max2.is_finite() {
        return Err(Error::domain(format!(
            "envelope needs sigma_min^2 <= sigma_max^2, got ({sigma_min2}, {sigma_max2})"
        )));
    }
    let (lower, upper) = grid
        .iter()
        .map(|&z| envelope_at(sigma_min2, sigma_max2, abs_mean, z))
        .unzip();
    Ok(Envelope {
        z: grid.to_vec(),
        lower,
        upper,
        sigma_min2,
        sigma_max2,
        abs_mean,
        source: "gaussian".into(),
    })
}

impl Envelope {
    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalityDiagnostic {
    /// Variance of `ĝ(Z)` over the empirical law, corrected for estimation noise.
    pub var_g: f64,
    pub stderr: f64,
    /// `√var_g / Var Z`, a bound on the Kolmogorov distance to `N(0, Var Z)`.
    pub stein_gap_bound: f64,
    /// `var_g` is within three standard errors of zero.
    pub gauss_flag: bool,
    /// Draws whose `z` fell in the unflagged grid range.
    pub used: usize,
}

/// Tests `Var(g(Z)) = 0` using `ĝ` at the sampled `z` values.
pub fn normality_diagnostic(
    samples: &GSamples,
    estimate: &GEstimate,
    var_z: f64,
) -> NormalityDiagnostic {
    let (lo, hi) = estimate
        .valid_region_around_zero()
        .unwrap_or((0, estimate.len()));
    let z = &estimate.z[lo..hi];
    let g = &estimate.ghat[lo..hi];
    let se = &estimate.stderr[lo..hi];
    let mut values = Vec::with_capacity(samples.count());
    let mut noise = Vec::with_capacity(samples.count());
    for &zi in &samples.z {
        if let (Some(gi), Some(si)) = (interpolate(z, g, zi), interpolate(z, se, zi)) {
            values.push(gi);
            noise.push(if si.is_finite() { si * si } else { 0.0 });
        }
    }
    let used = values.len();
    if used < 2 {
        return NormalityDiagnostic {
            var_g: 0.0,
            stderr: f64::INFINITY,
            stein_gap_bound: 0.0,
            gauss_flag: true,
            used,
        };
    }
    let n = used as f64;
    let (gbar, gsd) = mean_sd(values.iter().copied());
    let (noise_mean, _) = mean_sd(noise.iter().copied());
    let var_g = (gsd * gsd - noise_mean).max(0.0);
    let (_, sq_sd) = mean_sd(values.iter().map(|v| (v - gbar).powi(2)));
    let stderr = sq_sd / n.sqrt() + noise_mean;
    NormalityDiagnostic {
        var_g,
        stderr,
        stein_gap_bound: var_g.sqrt() / var_z,
        gauss_flag: var_g <= 3.0 * stderr,
        used,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyIdentityResidual {
    pub z: Vec<f64>,
    /// `φ̂(z) = (1/n) Σ Z_i 1{Z_i ≥ z}`.
    pub phi: Vec<f64>,
    /// `ĝ ρ̂ − φ̂`, `NaN` where `ρ̂` is not valid.
    pub residual: Vec<f64>,
    pub phi0: f64,
    /// `sd(Z·1{Z ≥ 0}) / √n`.
    pub phi0_stderr: f64,
    pub sup_abs: f64,
}

impl KeyIdentityResidual {
    pub fn relative_sup(&self) -> f64 {
        self.sup_abs / self.phi0
    }
}

/// Empirical `φ̂(x) = (1/n) Σ z_i 1{z_i ≥ x}` at each point of `grid`.
pub fn upper_partial_mean(z: &[f64], grid: &[f64]) -> Vec<f64> {
    let sorted = sorted_copy(z);
    let n = sorted.len();
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + sorted[k];
    }
    grid.iter()
        .map(|&x| suffix[sorted.partition_point(|&s| s < x)] / n as f64)
        .collect()
}

/// Residual of `g(z) ρ(z) = ∫_z^∞ y ρ(y) dy` on the density grid.
pub fn key_identity_residual(
    z_samples: &[f64],
    estimate: &GEstimate,
    density: &DensityEstimate,
) -> Result<KeyIdentityResidual> {
    if z_samples.is_empty() {
        return Err(Error::Empty("z samples"));
    }
    if estimate.z != density.z {
        return Err(Error::MalformedGrid(
            "g estimate and density use different grids".into(),
        ));
    }
    let phi = upper_partial_mean(z_samples, &density.z);
    let residual: Vec<f64> = (0..density.z.len())
        .map(|k| {
            if density.valid[k] {
                estimate.ghat[k] * density.rho[k] - phi[k]
            } else {
                f64::NAN
            }
        })
        .collect();
    let sup_abs = residual
        .iter()
        .filter(|r| r.is_finite())
        .fold(0.0, |m: f64, r| m.max(r.abs()));
    let n = z_samples.len() as f64;
    let (pos_mean, pos_sd) = mean_sd(z_samples.iter().map(|&z| if z >= 0.0 { z } else { 0.0 }));
    Ok(KeyIdentityResidual {
        z: density.z.clone(),
        phi,
        residual,
        phi0: pos_mean,
        phi0_stderr: pos_sd / n.sqrt(),
        sup_abs,
    })
}
