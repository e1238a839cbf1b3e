//! Closed-form tail bounds for centered Gaussian functionals.
//!
//! Every function returns the raw value of its bound; [`TailReport`] clips
//! to `[0, 1]` and counts the clip events.

use serde::Serialize;
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use crate::density::DensityEstimate;
use crate::error::{Error, Result};
use crate::gest::GEstimate;
use crate::harness::empirical::{empirical_tails, TailEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `P(Z ≥ z)`.
    Right,
    /// `P(Z ≤ −z)`.
    Left,
    /// `P(|Z| ≥ z)`.
    Both,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Right => "right",
            Side::Left => "left",
            Side::Both => "both",
        }
    }
}

fn positive_z(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("tail bounds need z > 0, got {z}")))
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {x}")))
    }
}

/// `exp(−z²/(2σ_max²))` for either tail, twice that for both.
pub fn classic_bound(sigma_max2: f64, z: f64, side: Side) -> Result<f64> {
    positive_z(z)?;
    positive("sigma_max^2", sigma_max2)?;
    let one = (-z * z / (2.0 * sigma_max2)).exp();
    Ok(match side {
        Side::Right | Side::Left => one,
        Side::Both => 2.0 * one,
    })
}

/// Lower bound on `P(Z ≥ z)` for `Z = max N_i − μ`, from the coordinate of
/// largest variance `σ_max²`:
/// `(μ+z)σ_max / (σ_max² + (μ+z)²) · e^{−(μ+z)²/(2σ_max²)} / √(2π)`.
pub fn handmade_right_lower(mu: f64, sigma_max2: f64, z: f64) -> Result<f64> {
    positive_z(z)?;
    positive("sigma_max^2", sigma_max2)?;
    let x = mu + z;
    if x <= 0.0 {
        return Ok(0.0);
    }
    let s = sigma_max2.sqrt();
    Ok(x * s / (sigma_max2 + x * x) * (-x * x / (2.0 * sigma_max2)).exp() / (2.0 * PI).sqrt())
}

/// Upper bound on `P(Z ≤ −z)` for `Z = max N_i − μ`:
/// `√d / (√(2π)(z − μ)) · e^{−(z−μ)²/(2d)}` with `d = min K_ii`.
pub fn handmade_left_upper(mu: f64, min_diag: f64, z: f64) -> Result<f64> {
    positive_z(z)?;
    positive("min diagonal", min_diag)?;
    if z <= mu {
        return Err(Error::domain(format!(
            "left-tail bound needs z > mu = {mu}, got {z}"
        )));
    }
    let x = z - mu;
    Ok(min_diag.sqrt() / ((2.0 * PI).sqrt() * x) * (-x * x / (2.0 * min_diag)).exp())
}

/// `(right lower, left upper)`.
pub fn handmade_bounds(mu: f64, sigma_max2: f64, min_diag: f64, z: f64) -> Result<(f64, f64)> {
    Ok((
        handmade_right_lower(mu, sigma_max2, z)?,
        handmade_left_upper(mu, min_diag, z)?,
    ))
}

/// Tail bounds obtained by integrating the density envelope; the same pair
/// bounds either tail. The upper value is clipped at 1.
pub fn integrated_envelope_tails(
    sigma_min2: f64,
    sigma_max2: f64,
    abs_mean: f64,
    z: f64,
) -> Result<(f64, f64)> {
    positive_z(z)?;
    positive("sigma_min^2", sigma_min2)?;
    positive("sigma_max^2", sigma_max2)?;
    let lower = abs_mean * sigma_min2 / (2.0 * sigma_max2) * z / (sigma_min2 + z * z)
        * (-z * z / (2.0 * sigma_min2)).exp();
    let upper =
        abs_mean * sigma_max2 / (2.0 * sigma_min2) / z * (-z * z / (2.0 * sigma_max2)).exp();
    Ok((lower, upper.min(1.0)))
}

/// `P(Z ≥ z) ≤ exp(−z²/(2αz + 2β))` when `g(Z) ≤ αZ + β`.
pub fn concentration_upper(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    positive_z(z)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("alpha must be >= 0, got {alpha}")));
    }
    positive("beta", beta)?;
    Ok((-z * z / (2.0 * alpha * z + 2.0 * beta)).exp())
}

/// Constants for `Z = ∫₀ᵀ B_t² dt − E(·)` with `B` an fBm of index `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FbmQuadraticParams {
    pub hurst: f64,
    pub horizon: f64,
    /// `H + 1/2`.
    pub c_h: f64,
    /// `T^{2H+1} / c_H`.
    pub alpha: f64,
    /// `T^{4H+2} / (2c_H²)`.
    pub beta: f64,
    /// `T^{2H+1} / (2H+1)`, the mean of the uncentered functional.
    pub mu_q: f64,
    /// `1/(2H+2)`, variance of `∫₀¹ B_t dt`.
    pub sigma_q2: f64,
    /// `T^{2H+1}`: `Z_T` has the law of `scale · Z_1`.
    pub scale: f64,
}

pub fn fbm_quadratic_params(hurst: f64, horizon: f64) -> Result<FbmQuadraticParams> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::domain(format!(
            "Hurst index must lie in (0, 1), got {hurst}"
        )));
    }
    positive("T", horizon)?;
    let c_h = hurst + 0.5;
    let scale = horizon.powf(2.0 * hurst + 1.0);
    Ok(FbmQuadraticParams {
        hurst,
        horizon,
        c_h,
        alpha: scale / c_h,
        beta: scale * scale / (2.0 * c_h * c_h),
        mu_q: scale / (2.0 * hurst + 1.0),
        sigma_q2: 1.0 / (2.0 * hurst + 2.0),
        scale,
    })
}

/// `exp(−c_H² z² / (2c_H T^{2H+1} z + T^{4H+2}))`.
pub fn fbm_quadratic_upper(hurst: f64, horizon: f64, z: f64) -> Result<f64> {
    let p = fbm_quadratic_params(hurst, horizon)?;
    positive_z(z)?;
    Ok((-p.c_h * p.c_h * z * z / (2.0 * p.c_h * p.scale * z + p.scale * p.scale)).exp())
}

/// `σ√(z+μ)/(σ² + z + μ) · e^{−(z+μ)/(2σ²)}` in units of `Z_1`, applied at
/// `z / T^{2H+1}`.
pub fn fbm_quadratic_lower(hurst: f64, horizon: f64, z: f64) -> Result<f64> {
    let p = fbm_quadratic_params(hurst, horizon)?;
    positive_z(z)?;
    let mu = 1.0 / (2.0 * hurst + 1.0);
    let x = z / p.scale + mu;
    let s2 = p.sigma_q2;
    Ok(s2.sqrt() * x.sqrt() / (s2 + x) * (-x / (2.0 * s2)).exp())
}

/// `½(1 − 1/β) E|Z| z⁻¹ e^{−z²/(2σ_min²)}` for `z ≥ α_thr`.
pub fn thm42_lower(
    sigma_min2: f64,
    abs_mean: f64,
    beta_exp: f64,
    alpha_thr: f64,
    z: f64,
) -> Result<f64> {
    positive_z(z)?;
    positive("sigma_min^2", sigma_min2)?;
    positive("threshold", alpha_thr)?;
    if !(beta_exp > 1.0) {
        return Err(Error::domain(format!(
            "exponent must exceed 1, got {beta_exp}"
        )));
    }
    if z < alpha_thr {
        return Err(Error::domain(format!(
            "z = {z} lies below the threshold {alpha_thr}"
        )));
    }
    Ok(0.5 * (1.0 - 1.0 / beta_exp) * abs_mean / z * (-z * z / (2.0 * sigma_min2)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IvBound {
    pub value: f64,
    pub numerator: f64,
    /// `∫_z^∞ e^{−y²/(2σ_min²)} g(y) dy`.
    pub denominator: f64,
    /// Part of the denominator beyond the grid, where `ĝ` is held at its last value.
    pub extrapolated_mass: f64,
}

/// Lower bound
/// `(E|Z|/2) σ_min⁴ z² / (σ_min² + z²)² · e^{−z²/σ_min²} / ∫_z^∞ e^{−y²/(2σ_min²)} g(y) dy`.
pub fn general_lb_iv(
    estimate: &GEstimate,
    sigma_min2: f64,
    abs_mean: f64,
    z: f64,
) -> Result<IvBound> {
    positive_z(z)?;
    positive("sigma_min^2", sigma_min2)?;
    let (lo, hi) = estimate.valid_region_around_zero()?;
    let zs = &estimate.z[lo..hi];
    let gs = &estimate.ghat[lo..hi];
    let last = zs.len() - 1;
    if z < zs[0] || z > zs[last] {
        return Err(Error::domain(format!(
            "z = {z} lies outside the valid g grid"
        )));
    }
    let weight = |y: f64| (-y * y / (2.0 * sigma_min2)).exp();
    let k0 = zs.partition_point(|&x| x <= z);
    let g_at = estimate.interpolate(z).expect("z inside grid");
    let mut denominator = 0.0;
    let (mut y_prev, mut f_prev) = (z, weight(z) * g_at);
    for k in k0..=last {
        let f = weight(zs[k]) * gs[k];
        denominator += 0.5 * (zs[k] - y_prev) * (f + f_prev);
        y_prev = zs[k];
        f_prev = f;
    }
    let s = sigma_min2.sqrt();
    let extrapolated_mass = gs[last] * s * (PI / 2.0).sqrt() * erfc(zs[last] / (s * SQRT_2));
    denominator += extrapolated_mass;
    if !(denominator > 0.0) {
        return Err(Error::domain(format!(
            "non-positive denominator {denominator}"
        )));
    }
    let s4 = sigma_min2 * sigma_min2;
    let numerator =
        0.5 * abs_mean * s4 * z * z / (sigma_min2 + z * z).powi(2) * (-z * z / sigma_min2).exp();
    Ok(IvBound {
        value: numerator / denominator,
        numerator,
        denominator,
        extrapolated_mass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HViolation {
    pub z: f64,
    pub h: f64,
    pub h_next: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HCheck {
    pub pass: bool,
    pub checked: usize,
    pub violations: Vec<HViolation>,
}

/// Checks that `h(x) = x^{1+β} ρ̂(x)` is non-increasing above `α_thr`, up to
/// twice the relative stderr of `ρ̂`.
pub fn h_monotonicity_check(
    density: &DensityEstimate,
    beta_exp: f64,
    alpha_thr: f64,
) -> Result<HCheck> {
    let points: Vec<(f64, f64, f64)> = density
        .z
        .iter()
        .zip(&density.rho)
        .zip(&density.rel_stderr)
        .zip(&density.valid)
        .filter(|(((z, _), _), ok)| **ok && **z >= alpha_thr)
        .map(|(((z, r), se), _)| (*z, z.powf(1.0 + beta_exp) * r, *se))
        .collect();
    if points.len() < 2 {
        return Err(Error::domain(format!(
            "fewer than two valid grid points above the threshold {alpha_thr}"
        )));
    }
    let mut violations = Vec::new();
    for w in points.windows(2) {
        let tol = 2.0 * if w[0].2.is_finite() { w[0].2 } else { 0.0 };
        if w[1].1 > w[0].1 * (1.0 + tol) {
            violations.push(HViolation {
                z: w[0].0,
                h: w[0].1,
                h_next: w[1].1,
                tol,
            });
        }
    }
    Ok(HCheck {
        pass: violations.is_empty(),
        checked: points.len() - 1,
        violations,
    })
}

/// Empirical check of `g(Z) ≤ αZ + β` on the draws `(z_i, v_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub draws: usize,
    pub violations: usize,
    pub fraction: f64,
    /// At most 0.1% of draws violate the inequality.
    pub verified: bool,
}

pub const HYPOTHESIS_TOLERANCE: f64 = 1e-3;

pub fn concentration_hypothesis(z: &[f64], v: &[f64], alpha: f64, beta: f64) -> HypothesisCheck {
    let violations = z
        .iter()
        .zip(v)
        .filter(|(z, v)| {
            let rhs = alpha * **z + beta;
            **v > rhs + 1e-12 * rhs.abs().max(1.0)
        })
        .count();
    let fraction = if z.is_empty() {
        0.0
    } else {
        violations as f64 / z.len() as f64
    };
    HypothesisCheck {
        draws: z.len(),
        violations,
        fraction,
        verified: fraction <= HYPOTHESIS_TOLERANCE,
    }
}

/// Inputs for a [`TailReport`]; bounds whose constants are missing are skipped.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TailBoundParams {
    pub sigma_min2: Option<f64>,
    pub sigma_max2: Option<f64>,
    pub abs_mean: f64,
    /// `E(max N_i)` for maxima.
    pub mu: Option<f64>,
    /// `min K_ii` and `max K_ii` for maxima.
    pub min_diag: Option<f64>,
    pub max_diag: Option<f64>,
    /// `(α, β)` with `g(Z) ≤ αZ + β` and whether the draws support it.
    pub concentration: Option<(f64, f64, bool)>,
    /// `(β_exp, α_thr, h-check passed)`.
    pub thm42: Option<(f64, f64, bool)>,
    pub fbm_quadratic: Option<FbmQuadraticParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundColumn {
    pub name: String,
    pub kind: BoundKind,
    /// Clipped to `[0, 1]`; `NaN` where the bound is not defined.
    pub values: Vec<f64>,
    pub clipped: usize,
    pub hypothesis_verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub side: Side,
    pub z: Vec<f64>,
    pub empirical: Vec<TailEstimate>,
    pub bounds: Vec<BoundColumn>,
}

impl TailReport {
    pub fn clip_events(&self) -> usize {
        self.bounds.iter().map(|b| b.clipped).sum()
    }

    pub fn column(&self, name: &str) -> Option<&BoundColumn> {
        self.bounds.iter().find(|b| b.name == name)
    }

    /// Evaluates every applicable bound on `grid` next to the empirical tail.
    pub fn build(
        params: &TailBoundParams,
        z_samples: &[f64],
        grid: &[f64],
        side: Side,
        estimate: Option<&GEstimate>,
    ) -> Result<TailReport> {
        if z_samples.is_empty() {
            return Err(Error::Empty("z samples"));
        }
        if let Some(z) = grid.iter().find(|z| !(**z > 0.0)) {
            return Err(Error::domain(format!(
                "tail grid must be positive, found {z}"
            )));
        }
        let empirical = empirical_tails(z_samples, grid, side);
        let mut bounds = Vec::new();
        let mut push =
            |name: &str, kind: BoundKind, verified: bool, f: &dyn Fn(f64) -> Result<f64>| {
                let mut clipped = 0;
                let values = grid
                    .iter()
                    .map(|&z| match f(z) {
                        Ok(v) if !(0.0..=1.0).contains(&v) => {
                            clipped += 1;
                            v.clamp(0.0, 1.0)
                        }
                        Ok(v) => v,
                        Err(_) => f64::NAN,
                    })
                    .collect();
                if clipped > 0 {
                    log::debug!("{name}: {clipped} values clipped to [0, 1]");
                }
                bounds.push(BoundColumn {
                    name: name.to_string(),
                    kind,
                    values,
                    clipped,
                    hypothesis_verified: verified,
                });
            };

        let p = params;
        if let Some(smax) = p.sigma_max2 {
            push("classic_upper", BoundKind::Upper, true, &|z| {
                classic_bound(smax, z, side)
            });
        }
        if let (Some(smin), Some(smax), true) = (p.sigma_min2, p.sigma_max2, side != Side::Both) {
            let a = p.abs_mean;
            push("integrated_lower", BoundKind::Lower, true, &|z| {
                integrated_envelope_tails(smin, smax, a, z).map(|b| b.0)
            });
            push("integrated_upper", BoundKind::Upper, true, &|z| {
                integrated_envelope_tails(smin, smax, a, z).map(|b| b.1)
            });
        }
        match side {
            Side::Right => {
                if let (Some(mu), Some(d)) = (p.mu, p.max_diag) {
                    push("handmade_lower", BoundKind::Lower, true, &|z| {
                        handmade_right_lower(mu, d, z)
                    });
                }
                if let Some((alpha, beta, ok)) = p.concentration {
                    push("concentration_upper", BoundKind::Upper, ok, &|z| {
                        concentration_upper(alpha, beta, z)
                    });
                }
                if let Some(q) = p.fbm_quadratic {
                    push("fbm_quadratic_lower", BoundKind::Lower, true, &|z| {
                        fbm_quadratic_lower(q.hurst, q.horizon, z)
                    });
                }
                if let (Some(smin), Some((b, thr, ok))) = (p.sigma_min2, p.thm42) {
                    let a = p.abs_mean;
                    push("thm42_lower", BoundKind::Lower, ok, &|z| {
                        thm42_lower(smin, a, b, thr, z)
                    });
                }
                if let (Some(smin), Some(est)) = (p.sigma_min2, estimate) {
                    let a = p.abs_mean;
                    push("iv_lower", BoundKind::Lower, true, &|z| {
                        general_lb_iv(est, smin, a, z).map(|b| b.value)
                    });
                }
            }
            Side::Left => {
                if let (Some(mu), Some(d)) = (p.mu, p.min_diag) {
                    push("handmade_upper", BoundKind::Upper, true, &|z| {
                        handmade_left_upper(mu, d, z)
                    });
                }
            }
            Side::Both => {}
        }
        Ok(TailReport {
            side,
            z: grid.to_vec(),
            empirical,
            bounds,
        })
    }
}
