//! Centered Gaussian vectors and discretized Gaussian processes.
//!
//! A [`GaussianModel`] is either an explicit covariance matrix or a kernel
//! evaluated on a [`ProcessGrid`]. Sampling goes through a cached Cholesky
//! factor; draws are produced in column blocks so the factor is applied with
//! one matrix product per chunk.

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Relative symmetry tolerance for covariance entries.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest diagonal jitter, relative to `trace / n`, before Cholesky gives up.
pub const JITTER_CAP: f64 = 1e-10;

/// Covariance of fractional Brownian motion, `½(t^{2H} + s^{2H} − |t−s|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if s < 0.0 || t < 0.0 {
        return Err(Error::domain(format!(
            "fBm times must be nonnegative, got ({s}, {t})"
        )));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2)))
}

pub(crate) fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "Hurst index must lie in (0, 1), got {hurst}"
        )))
    }
}

/// Strictly increasing sample times with trapezoid quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessGrid {
    times: Vec<f64>,
    weights: Vec<f64>,
}

impl ProcessGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::MalformedGrid(format!(
                "need at least two times, got {}",
                times.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::MalformedGrid("non-finite time".into()));
        }
        if let Some(k) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::MalformedGrid(format!(
                "times must be strictly increasing (t[{k}] = {}, t[{}] = {})",
                times[k],
                k + 1,
                times[k + 1]
            )));
        }
        let m = times.len();
        let mut weights = vec![0.0; m];
        for k in 0..m - 1 {
            let half = 0.5 * (times[k + 1] - times[k]);
            weights[k] += half;
            weights[k + 1] += half;
        }
        Ok(Self { times, weights })
    }

    /// `points` equally spaced times covering `[start, end]`.
    pub fn uniform(start: f64, end: f64, points: usize) -> Result<Self> {
        if points < 2 || !(end > start) {
            return Err(Error::MalformedGrid(format!(
                "uniform grid needs points >= 2 and end > start (got {points} points on [{start}, {end}])"
            )));
        }
        let step = (end - start) / (points - 1) as f64;
        let mut times: Vec<f64> = (0..points).map(|k| start + k as f64 * step).collect();
        times[points - 1] = end;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.end() - self.start()
    }
}

/// Symmetric positive-definite matrix together with its lower Cholesky factor.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
    factor: DMatrix<f64>,
    jitter: f64,
}

impl CovarianceMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 {
            return Err(Error::Empty("covariance matrix"));
        }
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: entries.ncols(),
            });
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if !a.is_finite() || (a - b).abs() > SYMMETRY_TOL * a.abs().max(1.0) {
                    return Err(Error::NotSymmetric { i, j, a, b });
                }
            }
        }
        for i in 0..n {
            let d = entries[(i, i)];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NonPositiveDiagonal { index: i, value: d });
            }
        }

        let cap = JITTER_CAP * entries.trace() / n as f64;
        for jitter in [0.0, cap * 1e-6, cap * 1e-4, cap * 1e-2, cap] {
            let mut m = entries.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(m) {
                let factor = chol.l();
                if factor.iter().all(|x| x.is_finite()) {
                    if jitter > 0.0 {
                        log::warn!("covariance needed diagonal jitter {jitter:e} for Cholesky");
                    }
                    return Ok(Self {
                        entries,
                        factor,
                        jitter,
                    });
                }
            }
        }
        Err(Error::NotPositiveDefinite { cap })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Lower-triangular `L` with `L Lᵀ = K + jitter·I`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn jitter_applied(&self) -> f64 {
        self.jitter
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Fbm {
        hurst: f64,
    },
    /// Covariance values `R(t_i, t_j)` tabulated on the grid.
    Tabulated(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Matrix(DMatrix<f64>),
    Grid { grid: ProcessGrid, kernel: Kernel },
}

/// How the Ornstein–Uhlenbeck time `u` of a coupled pair is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingMode {
    /// `u ~ Exp(1)`.
    #[default]
    Exponential,
    /// Draw `j` takes `u` uniformly from the `(j mod strata)`-th equal-mass
    /// stratum of Exp(1).
    Stratified { strata: usize },
}

impl CouplingMode {
    pub(crate) fn draw_u<R: Rng>(self, rng: &mut R, index: usize) -> f64 {
        match self {
            CouplingMode::Exponential => rng.sample(Exp1),
            CouplingMode::Stratified { strata } => {
                let s = (index % strata) as f64;
                let p = (s + rng.random::<f64>()) / strata as f64;
                -(-p).ln_1p()
            }
        }
    }
}

/// `x` and its Mehler partner `x_u = e^{−u}x + √(1−e^{−2u}) x′`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub u: f64,
    pub x: Vec<f64>,
    pub x_u: Vec<f64>,
}

/// A column block of coupled draws: column `j` of `x` and `x_u` form a pair.
#[derive(Debug, Clone)]
pub struct CoupledBlock {
    pub u: Vec<f64>,
    pub x: DMatrix<f64>,
    pub x_u: DMatrix<f64>,
}

/// Builds `x_u` from `x` and an independent copy. `u = 0` returns `x` unchanged.
pub fn mehler_combine(u: f64, x: &[f64], x_prime: &[f64]) -> Vec<f64> {
    if u == 0.0 {
        return x.to_vec();
    }
    let a = (-u).exp();
    let b = (-(-2.0 * u).exp_m1()).sqrt();
    x.iter()
        .zip(x_prime)
        .map(|(xi, pi)| a * xi + b * pi)
        .collect()
}

#[derive(Debug, Clone)]
pub struct GaussianModel {
    spec: ModelSpec,
    /// Covariance of every coordinate, including a pinned origin.
    kernel: DMatrix<f64>,
    /// Covariance of the free coordinates.
    covariance: CovarianceMatrix,
    pinned_origin: bool,
}

/// Assembles the covariance, validates it and caches the Cholesky factor.
///
/// For grid models whose first time carries an identically zero row of the
/// kernel (fBm started at `t = 0`), that coordinate is pinned to zero and the
/// remaining coordinates are factorized.
pub fn build_model(spec: ModelSpec) -> Result<GaussianModel> {
    let kernel = match &spec {
        ModelSpec::Matrix(k) => k.clone(),
        ModelSpec::Grid { grid, kernel } => match kernel {
            Kernel::Fbm { hurst } => {
                check_hurst(*hurst)?;
                if grid.start() < 0.0 {
                    return Err(Error::MalformedGrid("fBm grid must start at t >= 0".into()));
                }
                let t = grid.times();
                let m = t.len();
                let mut k = DMatrix::zeros(m, m);
                for i in 0..m {
                    for j in 0..=i {
                        let r = fbm_covariance(t[i], t[j], *hurst)?;
                        k[(i, j)] = r;
                        k[(j, i)] = r;
                    }
                }
                k
            }
            Kernel::Tabulated(k) => {
                if k.nrows() != grid.len() || k.ncols() != grid.len() {
                    return Err(Error::DimensionMismatch {
                        expected: grid.len(),
                        got: k.nrows(),
                    });
                }
                k.clone()
            }
        },
    };

    let dim = kernel.nrows();
    let pinned_origin = matches!(spec, ModelSpec::Grid { .. })
        && dim > 1
        && (0..dim).all(|j| kernel[(0, j)] == 0.0 && kernel[(j, 0)] == 0.0);
    let free = if pinned_origin {
        kernel.view((1, 1), (dim - 1, dim - 1)).into_owned()
    } else {
        kernel.clone()
    };
    let covariance = CovarianceMatrix::new(free)?;

    if let ModelSpec::Grid { .. } = spec {
        let degenerate = degenerate_increments(&kernel);
        if !degenerate.is_empty() {
            log::warn!(
                "{} grid pairs have E|X_t - X_s|^2 ~ 0; argmax may be ill-defined (first: {:?})",
                degenerate.len(),
                degenerate[0]
            );
        }
    }

    Ok(GaussianModel {
        spec,
        kernel,
        covariance,
        pinned_origin,
    })
}

/// Pairs `(s, t)` of coordinates whose difference has (numerically) zero variance.
pub fn degenerate_increments(kernel: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = kernel.nrows();
    let scale = (0..n)
        .map(|i| kernel[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..i {
            let d = kernel[(i, i)] + kernel[(j, j)] - 2.0 * kernel[(i, j)];
            if d <= 1e-14 * scale {
                out.push((j, i));
            }
        }
    }
    out
}

impl GaussianModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.kernel.nrows()
    }

    /// Full covariance `R(t_i, t_j)` (or `K_ij`).
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn covariance(&self) -> &CovarianceMatrix {
        &self.covariance
    }

    pub fn jitter_applied(&self) -> f64 {
        self.covariance.jitter_applied()
    }

    pub fn pinned_origin(&self) -> bool {
        self.pinned_origin
    }

    pub fn grid(&self) -> Option<&ProcessGrid> {
        match &self.spec {
            ModelSpec::Grid { grid, .. } => Some(grid),
            ModelSpec::Matrix(_) => None,
        }
    }

    pub fn hurst(&self) -> Option<f64> {
        match &self.spec {
            ModelSpec::Grid {
                kernel: Kernel::Fbm { hurst },
                ..
            } => Some(*hurst),
            _ => None,
        }
    }

    fn free_dim(&self) -> usize {
        self.covariance.dim()
    }

    pub(crate) fn fill_normals<R: Rng>(&self, rng: &mut R, column: &mut [f64]) {
        for w in column.iter_mut() {
            *w = rng.sample(StandardNormal);
        }
    }

    /// Maps a block of standard normals (free_dim × k) to model draws (dim × k).
    pub fn correlate(&self, normals: &DMatrix<f64>) -> DMatrix<f64> {
        let x = self.covariance.factor() * normals;
        if self.pinned_origin {
            x.insert_row(0, 0.0)
        } else {
            x
        }
    }

    /// `k` independent draws as columns of a `dim × k` matrix.
    pub fn sample_block<R: Rng>(&self, rng: &mut R, k: usize) -> DMatrix<f64> {
        let n = self.free_dim();
        let mut w = DMatrix::zeros(n, k);
        for j in 0..k {
            let col = &mut w.as_mut_slice()[j * n..(j + 1) * n];
            self.fill_normals(rng, col);
        }
        self.correlate(&w)
    }

    /// `k` coupled draws. Per draw the generator is consumed in the order
    /// `u`, `x`, `x′`, so blocks of different sizes share prefixes.
    pub fn coupled_block<R: Rng>(
        &self,
        rng: &mut R,
        k: usize,
        first_index: usize,
        mode: CouplingMode,
    ) -> CoupledBlock {
        let n = self.free_dim();
        let mut u = Vec::with_capacity(k);
        let mut w = DMatrix::zeros(n, k);
        let mut w_prime = DMatrix::zeros(n, k);
        for j in 0..k {
            u.push(mode.draw_u(rng, first_index + j));
            self.fill_normals(rng, &mut w.as_mut_slice()[j * n..(j + 1) * n]);
            self.fill_normals(rng, &mut w_prime.as_mut_slice()[j * n..(j + 1) * n]);
        }
        let x = self.correlate(&w);
        let x_prime = self.correlate(&w_prime);
        let dim = self.dim();
        let mut x_u = DMatrix::zeros(dim, k);
        for j in 0..k {
            let combined = mehler_combine(
                u[j],
                &x.as_slice()[j * dim..(j + 1) * dim],
                &x_prime.as_slice()[j * dim..(j + 1) * dim],
            );
            x_u.as_mut_slice()[j * dim..(j + 1) * dim].copy_from_slice(&combined);
        }
        CoupledBlock { u, x, x_u }
    }

    /// `count` draws of `N(0, K)`, deterministic in `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if count == 0 {
            return Err(Error::domain("sample count must be at least 1"));
        }
        let dim = self.dim();
        let blocks = rng::par_chunks(count, seed, |rng, _, len| self.sample_block(rng, len));
        Ok(blocks
            .iter()
            .flat_map(|b| {
                b.as_slice()
                    .chunks(dim)
                    .map(<[f64]>::to_vec)
                    .collect::<Vec<_>>()
            })
            .collect())
    }

    /// One coupled pair with `u ~ Exp(1)`.
    pub fn sample_coupled(&self, seed: u64) -> CoupledPair {
        let mut rng = rng::chunk_rng(seed, 0);
        let b = self.coupled_block(&mut rng, 1, 0, CouplingMode::Exponential);
        CoupledPair {
            u: b.u[0],
            x: b.x.as_slice().to_vec(),
            x_u: b.x_u.as_slice().to_vec(),
        }
    }

    /// One coupled pair at a fixed `u`.
    pub fn sample_coupled_at(&self, u: f64, seed: u64) -> Result<CoupledPair> {
        if !(u >= 0.0) {
            return Err(Error::domain(format!(
                "coupling time must be >= 0, got {u}"
            )));
        }
        let mut rng = rng::chunk_rng(seed, 0);
        let n = self.free_dim();
        let mut w = DMatrix::zeros(n, 2);
        self.fill_normals(&mut rng, w.as_mut_slice());
        let xs = self.correlate(&w);
        let dim = self.dim();
        let x = xs.as_slice()[..dim].to_vec();
        let x_u = mehler_combine(u, &x, &xs.as_slice()[dim..]);
        Ok(CoupledPair { u, x, x_u })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fbm_covariance_examples() {
        assert!((fbm_covariance(1.0, 2.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(2.0, 2.0, 0.75).unwrap() - 2f64.powf(1.5)).abs() < 1e-12);
        assert!((fbm_covariance(1.0, 2.0, 0.75).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fbm_covariance_rejects_bad_hurst() {
        assert!(matches!(
            fbm_covariance(1.0, 1.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            fbm_covariance(1.0, 1.0, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn identity_builds_without_jitter() {
        let m = build_model(ModelSpec::Matrix(DMatrix::identity(2, 2))).unwrap();
        assert_eq!(m.jitter_applied(), 0.0);
        assert_eq!(m.dim(), 2);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            build_model(ModelSpec::Matrix(k)),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            build_model(ModelSpec::Matrix(k)),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn fbm_grids_factorize() {
        for points in [64, 512] {
            let grid = ProcessGrid::uniform(1.0, 2.0, points).unwrap();
            let m = build_model(ModelSpec::Grid {
                grid,
                kernel: Kernel::Fbm { hurst: 0.75 },
            })
            .unwrap();
            assert!(!m.pinned_origin());
            assert!(m.jitter_applied() <= JITTER_CAP * m.kernel().trace() / points as f64);
        }
    }

    #[test]
    fn fbm_from_origin_pins_first_coordinate() {
        let grid = ProcessGrid::uniform(0.0, 1.0, 65).unwrap();
        let m = build_model(ModelSpec::Grid {
            grid,
            kernel: Kernel::Fbm { hurst: 0.5 },
        })
        .unwrap();
        assert!(m.pinned_origin());
        let xs = m.sample(10, 1).unwrap();
        assert!(xs.iter().all(|x| x.len() == 65 && x[0] == 0.0));
    }

    #[test]
    fn malformed_grids_are_rejected() {
        assert!(ProcessGrid::new(vec![0.0, 0.0, 1.0]).is_err());
        assert!(ProcessGrid::new(vec![1.0]).is_err());
        assert!(ProcessGrid::uniform(1.0, 1.0, 5).is_err());
    }

    #[test]
    fn trapezoid_weights_sum_to_span() {
        let g = ProcessGrid::new(vec![0.0, 0.1, 0.5, 0.6, 2.0]).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-15);
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let m = build_model(ModelSpec::Matrix(k)).unwrap();
        let a = m.sample(1000, 99).unwrap();
        let b = m.sample(1000, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, m.sample(1000, 100).unwrap());
    }

    #[test]
    fn identity_sample_covariance_within_clt_envelope() {
        let m = build_model(ModelSpec::Matrix(DMatrix::identity(3, 3))).unwrap();
        let n = 100_000;
        let xs = m.sample(n, 5).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let c: f64 = xs.iter().map(|x| x[i] * x[j]).sum::<f64>() / n as f64;
                let target = if i == j { 1.0 } else { 0.0 };
                // off-diagonal: 3/sqrt(n) ~ 0.0095; diagonal: 3*sqrt(2)/sqrt(n)
                assert!((c - target).abs() < 0.02, "cov[{i}][{j}] = {c}");
            }
        }
    }

    #[test]
    fn brownian_increments_have_variance_delta() {
        let grid = ProcessGrid::uniform(0.5, 1.5, 11).unwrap();
        let m = build_model(ModelSpec::Grid {
            grid,
            kernel: Kernel::Fbm { hurst: 0.5 },
        })
        .unwrap();
        let n = 50_000;
        let xs = m.sample(n, 11).unwrap();
        let var: f64 = xs.iter().map(|x| (x[6] - x[5]).powi(2)).sum::<f64>() / n as f64;
        // Δ = 0.1, stderr ≈ 0.1·sqrt(2/n)
        assert!(
            (var - 0.1).abs() < 4.0 * 0.1 * (2.0 / n as f64).sqrt(),
            "{var}"
        );
    }

    #[test]
    fn forced_zero_coupling_is_identity() {
        let k = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let m = build_model(ModelSpec::Matrix(k)).unwrap();
        let p = m.sample_coupled_at(0.0, 3).unwrap();
        assert_eq!(p.x, p.x_u);
        let negzero = mehler_combine(0.0, &[-0.0, 1.0], &[5.0, 5.0]);
        assert_eq!(negzero[0].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn coupled_correlation_matches_exp_minus_u() {
        let m = build_model(ModelSpec::Matrix(DMatrix::identity(1, 1))).unwrap();
        let u = 0.7;
        let n = 40_000;
        let mut sxy = 0.0;
        for s in 0..n {
            let p = m.sample_coupled_at(u, s).unwrap();
            sxy += p.x[0] * p.x_u[0];
        }
        let corr = sxy / n as f64;
        assert!(
            (corr - (-u).exp()).abs() < 4.0 / (n as f64).sqrt(),
            "{corr}"
        );
    }

    #[test]
    fn coupled_draws_have_positive_u() {
        let m = build_model(ModelSpec::Matrix(DMatrix::identity(2, 2))).unwrap();
        let p = m.sample_coupled(1);
        assert!(p.u >= 0.0);
        assert_eq!(p.x.len(), 2);
    }

    #[test]
    fn stratified_u_covers_every_stratum() {
        let mode = CouplingMode::Stratified { strata: 16 };
        let mut rng = rng::chunk_rng(1, 0);
        for j in 0..64 {
            let u = mode.draw_u(&mut rng, j);
            let p = -(-u).exp_m1(); // CDF of Exp(1)
            let s = (j % 16) as f64;
            assert!(p >= s / 16.0 && p <= (s + 1.0) / 16.0);
        }
    }

    proptest! {
        #[test]
        fn fbm_covariance_is_symmetric(s in 0.0f64..5.0, t in 0.0f64..5.0, h in 0.01f64..0.99) {
            let a = fbm_covariance(s, t, h).unwrap();
            let b = fbm_covariance(t, s, h).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
            let d = fbm_covariance(t, t, h).unwrap();
            prop_assert!((d - t.powf(2.0 * h)).abs() <= 1e-12 * d.max(1.0));
        }

        #[test]
        fn fbm_kernel_is_positive_definite_on_random_grids(
            mut ts in proptest::collection::vec(0.05f64..4.0, 2..24),
            h in 0.1f64..0.9,
        ) {
            ts.sort_by(f64::total_cmp);
            ts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            prop_assume!(ts.len() >= 2);
            let grid = ProcessGrid::new(ts).unwrap();
            let spec = ModelSpec::Grid { grid, kernel: Kernel::Fbm { hurst: h } };
            prop_assert!(build_model(spec).is_ok());
        }
    }
}
