//! Monte Carlo estimation of `g(z) = E(⟨DZ, −DL⁻¹Z⟩ | Z = z)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{mean_sd, Functional, FunctionalSpec};
use crate::model::{CouplingMode, GaussianModel};
use crate::rng;

/// Grid points with fewer effective observations are flagged.
pub const MIN_EFFECTIVE_COUNT: f64 = 20.0;
/// Regression needs at least this many draws.
pub const MIN_REGRESSION_DRAWS: usize = 100;
/// Clamp floor relative to the sample variance of `Z`.
pub const FLOOR_FRACTION: f64 = 1e-6;
/// Kernel window half-width in bandwidths.
const WINDOW: f64 = 8.0;

/// Draws `(z_i, v_i)` of the centered functional and its Mehler integrand.
#[derive(Debug, Clone, PartialEq)]
pub struct GSamples {
    pub z: Vec<f64>,
    pub v: Vec<f64>,
    /// Centering subtracted from the raw values.
    pub mu: f64,
    pub seed: u64,
    pub functional: &'static str,
}

/// `mean(v)` against the sample variance of `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub mean_v: f64,
    pub var_z: f64,
    /// Standard error of `mean(v) − var_z` from the paired differences.
    pub stderr: f64,
}

impl IdentityCheck {
    pub fn deviation(&self) -> f64 {
        (self.mean_v - self.var_z).abs() / self.stderr
    }
}

impl GSamples {
    pub fn count(&self) -> usize {
        self.z.len()
    }

    pub fn var_z(&self) -> f64 {
        let (_, sd) = mean_sd(self.z.iter().copied());
        sd * sd
    }

    pub fn sd_z(&self) -> f64 {
        mean_sd(self.z.iter().copied()).1
    }

    /// Uncentered functional values.
    pub fn raw(&self) -> impl Iterator<Item = f64> + '_ {
        self.z.iter().map(move |z| z + self.mu)
    }

    pub fn identity_check(&self) -> IdentityCheck {
        let n = self.z.len() as f64;
        let (zbar, _) = mean_sd(self.z.iter().copied());
        let (mean_v, _) = mean_sd(self.v.iter().copied());
        let sq = self.z.iter().map(|z| (z - zbar).powi(2));
        let (_, diff_sd) = mean_sd(self.v.iter().zip(sq).map(|(v, s)| v - s));
        IdentityCheck {
            mean_v,
            var_z: self.var_z(),
            stderr: diff_sd / n.sqrt(),
        }
    }
}

/// Draws `count` samples with `u ~ Exp(1)`.
pub fn draw_g_samples(
    spec: &FunctionalSpec,
    model: &GaussianModel,
    count: usize,
    seed: u64,
) -> Result<GSamples> {
    draw_g_samples_with(spec, model, count, seed, CouplingMode::Exponential)
}

/// As [`draw_g_samples`] with an explicit coupling mode. The quadratic
/// functional ignores the coupling: its integrand is exact on `x` alone.
pub fn draw_g_samples_with(
    spec: &FunctionalSpec,
    model: &GaussianModel,
    count: usize,
    seed: u64,
    mode: CouplingMode,
) -> Result<GSamples> {
    if count == 0 {
        return Err(Error::domain("g sample count must be at least 1"));
    }
    if let CouplingMode::Stratified { strata } = mode {
        if strata == 0 {
            return Err(Error::domain(
                "stratified coupling needs at least one stratum",
            ));
        }
    }
    let functional = &spec.functional;
    functional.validate(model)?;
    if count < 10_000 {
        log::warn!("only {count} g draws; at least 10^4 are recommended");
    }
    let mu = spec.centering.mu;
    let chunks = rng::par_chunks(
        count,
        seed,
        |rng, start, len| -> Result<(Vec<f64>, Vec<f64>)> {
            if *functional == Functional::FbmQuadratic {
                let xs = model.sample_block(rng, len);
                let raw = functional.evaluate_block(model, &xs)?;
                let v = functional.quadratic_g_block(model, &xs)?;
                Ok((raw.into_iter().map(|r| r - mu).collect(), v))
            } else {
                let block = model.coupled_block(rng, len, start, mode);
                let raw = functional.evaluate_block(model, &block.x)?;
                let v = functional.mehler_block(model, &block)?;
                Ok((raw.into_iter().map(|r| r - mu).collect(), v))
            }
        },
    );
    let mut z = Vec::with_capacity(count);
    let mut v = Vec::with_capacity(count);
    for c in chunks {
        let (zc, vc) = c?;
        z.extend(zc);
        v.extend(vc);
    }
    Ok(GSamples {
        z,
        v,
        mu,
        seed,
        functional: functional.name(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regression {
    /// Gaussian-kernel Nadaraya–Watson.
    #[default]
    NadarayaWatson,
    /// Plain average over the `⌈√n⌉` nearest draws.
    Knn,
}

/// How the evaluation grid of `ĝ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum GridPolicy {
    /// `points` values over the 0.5%–99.5% sample quantiles.
    Quantile {
        points: usize,
    },
    Fixed {
        lo: f64,
        hi: f64,
        points: usize,
    },
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Quantile { points: 401 }
    }
}

/// Type-7 quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|k| {
            if k + 1 == points {
                hi
            } else {
                lo + step * k as f64
            }
        })
        .collect()
}

/// Builds the evaluation grid for a set of `z` draws.
pub fn z_grid(z: &[f64], policy: GridPolicy) -> Result<Vec<f64>> {
    let (lo, hi, points) = match policy {
        GridPolicy::Quantile { points } => {
            if z.is_empty() {
                return Err(Error::Empty("z samples"));
            }
            let s = sorted_copy(z);
            (
                quantile_sorted(&s, 0.005),
                quantile_sorted(&s, 0.995),
                points,
            )
        }
        GridPolicy::Fixed { lo, hi, points } => (lo, hi, points),
    };
    if points < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::MalformedGrid(format!(
            "need at least two points on a proper range, got {points} on [{lo}, {hi}]"
        )));
    }
    Ok(linspace(lo, hi, points))
}

/// Regressed `ĝ` on a grid, with per-point diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GEstimate {
    pub z: Vec<f64>,
    pub ghat: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Effective number of observations `(Σw)²/Σw²`.
    pub count: Vec<f64>,
    pub flagged: Vec<bool>,
    pub clamped: Vec<bool>,
    pub bandwidth: f64,
    pub floor: f64,
    pub method: Regression,
}

impl GEstimate {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|f| **f).count()
    }

    /// Linear interpolation of `ĝ`; `None` outside the grid.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        interpolate(&self.z, &self.ghat, x)
    }

    /// Index range `[lo, hi)` of the unflagged run containing the grid cell of 0.
    pub fn valid_region_around_zero(&self) -> Result<(usize, usize)> {
        let n = self.z.len();
        if n < 2 || !(self.z[0] <= 0.0 && 0.0 <= self.z[n - 1]) {
            return Err(Error::domain("z = 0 lies outside the g grid"));
        }
        if self.flagged.iter().all(|f| *f) {
            return Err(Error::AllFlagged);
        }
        let cell = self.z.partition_point(|&x| x <= 0.0).clamp(1, n - 1) - 1;
        if self.flagged[cell] || self.flagged[cell + 1] {
            return Err(Error::domain("g estimate is flagged at z = 0"));
        }
        let mut lo = cell;
        while lo > 0 && !self.flagged[lo - 1] {
            lo -= 1;
        }
        let mut hi = cell + 2;
        while hi < n && !self.flagged[hi] {
            hi += 1;
        }
        Ok((lo, hi))
    }
}

pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return None;
    }
    if n == 1 {
        return Some(ys[0]);
    }
    let k = xs.partition_point(|&g| g <= x).clamp(1, n - 1) - 1;
    let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    Some(ys[k] + t * (ys[k + 1] - ys[k]))
}

/// Silverman's rule `1.06 σ̂ n^{−1/5}`.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let (_, sd) = mean_sd(values.iter().copied());
    1.06 * sd * (values.len() as f64).powf(-0.2)
}

/// Nadaraya–Watson regression of `v` on `z` over `grid`.
pub fn regress_g(samples: &GSamples, grid: &[f64], bandwidth: Option<f64>) -> Result<GEstimate> {
    regress_g_with(samples, grid, Regression::NadarayaWatson, bandwidth)
}

pub fn regress_g_with(
    samples: &GSamples,
    grid: &[f64],
    method: Regression,
    bandwidth: Option<f64>,
) -> Result<GEstimate> {
    let n = samples.count();
    if n < MIN_REGRESSION_DRAWS {
        return Err(Error::domain(format!(
            "regression needs at least {MIN_REGRESSION_DRAWS} draws, got {n}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Empty("regression grid"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::MalformedGrid(
            "regression grid must be strictly increasing".into(),
        ));
    }
    let mut pairs: Vec<(f64, f64)> = samples
        .z
        .iter()
        .copied()
        .zip(samples.v.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let zs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let vs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let floor = FLOOR_FRACTION * samples.var_z();

    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => {
            return Err(Error::domain(format!(
                "bandwidth must be positive, got {h}"
            )))
        }
        None => silverman_bandwidth(&samples.z),
    };
    if !(h > 0.0) {
        return Err(Error::domain(
            "zero-variance z draws: bandwidth is not positive",
        ));
    }

    let points: Vec<(f64, f64, f64, f64)> = match method {
        Regression::NadarayaWatson => grid.iter().map(|&g| nw_point(&zs, &vs, g, h)).collect(),
        Regression::Knn => {
            let k = (n as f64).sqrt().ceil() as usize;
            grid.iter().map(|&g| knn_point(&zs, &vs, g, k)).collect()
        }
    };
    let bandwidth = match method {
        Regression::NadarayaWatson => h,
        Regression::Knn => points.iter().map(|p| p.3).sum::<f64>() / points.len() as f64,
    };

    let mut est = GEstimate {
        z: grid.to_vec(),
        ghat: Vec::with_capacity(grid.len()),
        stderr: Vec::with_capacity(grid.len()),
        count: Vec::with_capacity(grid.len()),
        flagged: Vec::with_capacity(grid.len()),
        clamped: Vec::with_capacity(grid.len()),
        bandwidth,
        floor,
        method,
    };
    let mut clamps = 0;
    for (g, se, neff, _) in points {
        let clamped = !(g >= floor);
        if clamped {
            clamps += 1;
        }
        est.ghat.push(if clamped { floor } else { g });
        est.stderr.push(se);
        est.count.push(neff);
        est.flagged.push(clamped || neff < MIN_EFFECTIVE_COUNT);
        est.clamped.push(clamped);
    }
    if clamps > 0 {
        log::warn!("{clamps} grid points of g clamped at the floor {floor:e}");
    }
    Ok(est)
}

/// `(ĝ, stderr, effective count, radius)` at one grid point.
fn nw_point(zs: &[f64], vs: &[f64], g: f64, h: f64) -> (f64, f64, f64, f64) {
    let lo = zs.partition_point(|&z| z < g - WINDOW * h);
    let hi = zs.partition_point(|&z| z <= g + WINDOW * h);
    let mut sw = 0.0;
    let mut sw2 = 0.0;
    let mut swv = 0.0;
    let weights: Vec<f64> = zs[lo..hi]
        .iter()
        .map(|z| {
            let t = (z - g) / h;
            (-0.5 * t * t).exp()
        })
        .collect();
    for (w, v) in weights.iter().zip(&vs[lo..hi]) {
        sw += w;
        sw2 += w * w;
        swv += w * v;
    }
    if !(sw > 0.0) {
        return (f64::NAN, f64::NAN, 0.0, h);
    }
    let ghat = swv / sw;
    let resid: f64 = weights
        .iter()
        .zip(&vs[lo..hi])
        .map(|(w, v)| w * w * (v - ghat).powi(2))
        .sum();
    (ghat, resid.sqrt() / sw, sw * sw / sw2, h)
}

fn knn_point(zs: &[f64], vs: &[f64], g: f64, k: usize) -> (f64, f64, f64, f64) {
    let n = zs.len();
    let k = k.min(n);
    let mut right = zs.partition_point(|&z| z < g);
    let mut left = right;
    while right - left < k {
        let take_left = if left == 0 {
            false
        } else if right == n {
            true
        } else {
            g - zs[left - 1] <= zs[right] - g
        };
        if take_left {
            left -= 1;
        } else {
            right += 1;
        }
    }
    let radius = (g - zs[left]).abs().max((zs[right - 1] - g).abs());
    let (mean, sd) = mean_sd(vs[left..right].iter().copied());
    (mean, sd / (k as f64).sqrt(), k as f64, radius)
}

/// The `q` and `1 − q` quantiles of `ĝ` over unflagged grid points.
pub fn g_range(estimate: &GEstimate, q: f64) -> Result<(f64, f64)> {
    if !(0.0..=0.5).contains(&q) {
        return Err(Error::domain(format!(
            "quantile level must lie in [0, 0.5], got {q}"
        )));
    }
    let values: Vec<f64> = estimate
        .ghat
        .iter()
        .zip(&estimate.flagged)
        .filter(|(_, f)| !**f)
        .map(|(g, _)| *g)
        .collect();
    if values.is_empty() {
        return Err(Error::AllFlagged);
    }
    let s = sorted_copy(&values);
    Ok((quantile_sorted(&s, q), quantile_sorted(&s, 1.0 - q)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::center_and_absmean;
    use crate::model::{build_model, ModelSpec};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn matrix_model(entries: &[f64], n: usize) -> GaussianModel {
        build_model(ModelSpec::Matrix(DMatrix::from_row_slice(n, n, entries))).unwrap()
    }

    fn synthetic(z: Vec<f64>, v: Vec<f64>) -> GSamples {
        GSamples {
            z,
            v,
            mu: 0.0,
            seed: 0,
            functional: "synthetic",
        }
    }

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn gaussian_draws_have_v_equal_to_variance() {
        let m = matrix_model(&[2.0], 1);
        let spec = center_and_absmean(Functional::VectorMax, &m, 5000, 1).unwrap();
        let s = draw_g_samples(&spec, &m, 20_000, 2).unwrap();
        assert!(s.v.iter().all(|v| *v == 2.0));
        let c = s.identity_check();
        assert!((c.mean_v - c.var_z).abs() < 3.0 * c.stderr);
    }

    #[test]
    fn independent_max_integrand_is_zero_or_one() {
        let m = matrix_model(&[1.0, 0.0, 0.0, 1.0], 2);
        let spec = center_and_absmean(Functional::VectorMax, &m, 2000, 1).unwrap();
        let s = draw_g_samples(&spec, &m, 3000, 9).unwrap();
        assert!(s.v.iter().all(|v| *v == 0.0 || *v == 1.0));
        assert!(s.v.contains(&0.0));
    }

    #[test]
    fn draws_are_reproducible_and_prefix_stable() {
        let m = matrix_model(&[1.0, 0.3, 0.3, 1.0], 2);
        let spec = center_and_absmean(Functional::VectorMax, &m, 2000, 1).unwrap();
        let a = draw_g_samples(&spec, &m, 3000, 5).unwrap();
        let b = draw_g_samples(&spec, &m, 3000, 5).unwrap();
        assert_eq!(a, b);
        let long = draw_g_samples(&spec, &m, 6000, 5).unwrap();
        assert_eq!(&long.z[..3000], &a.z[..]);
        assert_eq!(&long.v[..3000], &a.v[..]);
    }

    #[test]
    fn constant_integrand_regresses_to_constant() {
        let z = normals(5000, 3);
        let s = synthetic(z, vec![0.7; 5000]);
        let grid = z_grid(&s.z, GridPolicy::default()).unwrap();
        let est = regress_g(&s, &grid, None).unwrap();
        for g in &est.ghat {
            assert!((g - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_integrand_recovered_on_interquartile_range() {
        // frozen oracle: 1 + 0.8 z plus unit-variance noise
        let a = 0.8;
        let z = normals(50_000, 4);
        let noise = normals(50_000, 5);
        let v = z.iter().zip(&noise).map(|(z, e)| 1.0 + a * z + e).collect();
        let s = synthetic(z, v);
        let grid = linspace(-0.674, 0.674, 41);
        let est = regress_g(&s, &grid, None).unwrap();
        let mut outside = 0;
        for k in 0..grid.len() {
            let dev = (est.ghat[k] - 1.0 - a * grid[k]).abs();
            if dev > 2.0 * est.stderr[k] {
                outside += 1;
            }
        }
        // curvature-free target: NW bias is O(h²·f′/f) only
        assert!(outside <= 4, "{outside} of 41 points beyond 2 stderr");
    }

    #[test]
    fn standard_normal_g_is_one() {
        let m = matrix_model(&[1.0], 1);
        let spec = center_and_absmean(Functional::VectorMax, &m, 5000, 1).unwrap();
        let s = draw_g_samples(&spec, &m, 50_000, 2).unwrap();
        let est = regress_g(&s, &linspace(-2.0, 2.0, 81), None).unwrap();
        assert!(est.ghat.iter().all(|g| (g - 1.0).abs() <= 0.05));
        assert_eq!(g_range(&est, 0.05).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn correlated_max_range_within_kernel_entries() {
        let m = matrix_model(&[1.0, 0.5, 0.5, 1.0], 2);
        let spec = center_and_absmean(Functional::VectorMax, &m, 5000, 1).unwrap();
        let s = draw_g_samples(&spec, &m, 40_000, 2).unwrap();
        let grid = z_grid(&s.z, GridPolicy::default()).unwrap();
        let est = regress_g(&s, &grid, None).unwrap();
        let (lo, hi) = g_range(&est, 0.0).unwrap();
        let se = est.stderr.iter().copied().fold(0.0, f64::max);
        assert!(lo >= 0.5 - 2.0 * se && hi <= 1.0 + 2.0 * se, "({lo}, {hi})");
        let (lo2, hi2) = g_range(&est, 0.1).unwrap();
        assert!(lo <= lo2 && hi2 <= hi);
    }

    #[test]
    fn knn_agrees_with_kernel_regression() {
        let z = normals(20_000, 6);
        let v = z.iter().map(|z| 1.0 + 0.2 * z).collect();
        let s = synthetic(z, v);
        let grid = linspace(-1.0, 1.0, 21);
        let nw = regress_g(&s, &grid, None).unwrap();
        let knn = regress_g_with(&s, &grid, Regression::Knn, None).unwrap();
        for k in 0..grid.len() {
            assert!((nw.ghat[k] - knn.ghat[k]).abs() < 0.02);
        }
        assert!(knn.count.iter().all(|c| *c == 142.0));
    }

    #[test]
    fn sparse_points_are_flagged_and_negatives_clamped() {
        let z = normals(1000, 7);
        let v = z.iter().map(|z| -z.abs() - 1.0).collect();
        let s = synthetic(z, v);
        let est = regress_g(&s, &linspace(-10.0, 10.0, 21), Some(0.1)).unwrap();
        assert!(est.flagged[0] && est.flagged[20]);
        assert!(est.clamped.iter().any(|c| *c));
        assert!(est.ghat.iter().all(|g| *g >= est.floor));
        assert!(matches!(g_range(&est, 0.1), Err(Error::AllFlagged)));
    }

    #[test]
    fn regression_preconditions() {
        let s = synthetic(vec![0.0; 50], vec![1.0; 50]);
        assert!(regress_g(&s, &[0.0], None).is_err());
        let s = synthetic(normals(200, 1), vec![1.0; 200]);
        assert!(regress_g(&s, &[0.0], Some(0.0)).is_err());
        assert!(regress_g(&s, &[1.0, 0.0], None).is_err());
    }

    #[test]
    fn quantile_grid_covers_central_mass() {
        let z = normals(10_000, 8);
        let grid = z_grid(&z, GridPolicy::default()).unwrap();
        assert_eq!(grid.len(), 401);
        let s = sorted_copy(&z);
        assert_eq!(grid[0], quantile_sorted(&s, 0.005));
        assert_eq!(grid[400], quantile_sorted(&s, 0.995));
    }
}
