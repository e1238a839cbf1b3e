use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gest::{silverman_bandwidth, sorted_copy};
use crate::tails::Side;

/// Normal quantile of the 95% Wilson interval.
pub const WILSON_Z: f64 = 1.96;

/// Tail fraction with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

pub fn wilson(successes: usize, n: usize) -> TailEstimate {
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    TailEstimate {
        p,
        lo: (centre - half).max(0.0),
        hi: (centre + half).min(1.0),
        n,
    }
}

/// Fraction of samples `≥ z`.
pub fn empirical_tail(samples: &[f64], z: f64) -> Result<TailEstimate> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    Ok(wilson(
        samples.iter().filter(|s| **s >= z).count(),
        samples.len(),
    ))
}

/// Tail fractions on a grid of positive thresholds.
pub fn empirical_tails(samples: &[f64], grid: &[f64], side: Side) -> Vec<TailEstimate> {
    let s = sorted_copy(samples);
    let n = s.len();
    grid.iter()
        .map(|&z| {
            let right = n - s.partition_point(|&x| x < z);
            let left = s.partition_point(|&x| x <= -z);
            let k = match side {
                Side::Right => right,
                Side::Left => left,
                Side::Both => right + left,
            };
            wilson(k, n)
        })
        .collect()
}

/// Gaussian kernel density estimate with its pointwise diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KdeEstimate {
    pub z: Vec<f64>,
    pub density: Vec<f64>,
    /// Pointwise standard error `√(f̂ R(K) / (n h))`.
    pub stderr: Vec<f64>,
    /// Finite-difference `|f̂′|` and `|f̂″|` on the grid.
    pub slope: Vec<f64>,
    pub curvature: Vec<f64>,
    pub bandwidth: f64,
}

/// `R(K) = ∫K²` for the standard Gaussian kernel.
const KERNEL_ROUGHNESS: f64 = 0.282_094_791_773_878_14;

/// Gaussian KDE on `grid`. `None` selects Silverman's bandwidth.
pub fn kde_density(samples: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Result<KdeEstimate> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => {
            return Err(Error::domain(format!(
                "bandwidth must be positive, got {h}"
            )))
        }
        None => silverman_bandwidth(samples),
    };
    if !(h > 0.0) {
        return Err(Error::domain(
            "zero-variance samples: bandwidth is not positive",
        ));
    }
    let s = sorted_copy(samples);
    let n = s.len() as f64;
    let norm = 1.0 / (n * h * (2.0 * PI).sqrt());
    let density: Vec<f64> = grid
        .iter()
        .map(|&g| {
            let lo = s.partition_point(|&x| x < g - 8.0 * h);
            let hi = s.partition_point(|&x| x <= g + 8.0 * h);
            s[lo..hi]
                .iter()
                .map(|x| {
                    let t = (x - g) / h;
                    (-0.5 * t * t).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    let stderr = density
        .iter()
        .map(|f| (f * KERNEL_ROUGHNESS / (n * h)).sqrt())
        .collect();
    let (slope, curvature) = derivatives(grid, &density);
    Ok(KdeEstimate {
        z: grid.to_vec(),
        density,
        stderr,
        slope,
        curvature,
        bandwidth: h,
    })
}

fn derivatives(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    if n < 3 {
        return (vec![0.0; n], vec![0.0; n]);
    }
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for k in 1..n - 1 {
        let (hl, hr) = (x[k] - x[k - 1], x[k + 1] - x[k]);
        d1[k] = ((y[k + 1] - y[k - 1]) / (hl + hr)).abs();
        d2[k] = (2.0 * ((y[k + 1] - y[k]) / hr - (y[k] - y[k - 1]) / hl) / (hl + hr)).abs();
    }
    d1[0] = ((y[1] - y[0]) / (x[1] - x[0])).abs();
    d1[n - 1] = ((y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2])).abs();
    d2[0] = d2[1];
    d2[n - 1] = d2[n - 2];
    (d1, d2)
}

/// Trapezoid integral of `y` over `x`.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}
