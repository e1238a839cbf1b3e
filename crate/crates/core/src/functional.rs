//! The four Gaussian functionals and their Mehler integrands.
//!
//! | variant            | raw value                 | integrand `⟨Φ(x), Φ(x_u)⟩`          |
//! |--------------------|---------------------------|--------------------------------------|
//! | `VectorMax`        | `max_i x_i`               | `K[I₀, I_u]`                         |
//! | `ProcessSup`       | `max_k x(t_k)`            | `R(τ₀, τ_u)`                         |
//! | `MonotoneIntegral` | `Σ w_k f(x_k)`            | `Σ w_k w_l f′(x_k) f′(x_u,l) R_kl`   |
//! | `FbmQuadratic`     | `Σ w_k x_k²`              | exact: `2 Σ w_k w_l x_k x_l R_kl`    |

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoupledBlock, CoupledPair, GaussianModel, Kernel, ModelSpec};
use crate::rng;

/// Slack allowed when checking `α ≤ f′ ≤ β` at sampled points.
const DERIVATIVE_TOL: f64 = 1e-12;

/// Scalar `f` with `α ≤ f′ ≤ β` for the monotone integral functional.
#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneFn {
    /// `f(x) = slope·x`.
    Linear { slope: f64 },
    /// `f(x) = αx + (β−α)(log(1+eˣ) − log 2)`, so `f′ = α + (β−α)·sigmoid(x)`.
    SigmoidRamp { alpha: f64, beta: f64 },
    /// Piecewise-linear interpolation of `(xs, ys)`, extrapolated with the end slopes.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl MonotoneFn {
    pub fn sigmoid_ramp(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && alpha <= beta) {
            return Err(Error::domain(format!(
                "sigmoid ramp needs finite alpha <= beta, got ({alpha}, {beta})"
            )));
        }
        Ok(MonotoneFn::SigmoidRamp { alpha, beta })
    }

    pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::domain(
                "tabulated function needs at least two (x, y) knots of equal length",
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("tabulated knots must be strictly increasing"));
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::domain("tabulated values must be finite"));
        }
        Ok(MonotoneFn::Tabulated { xs, ys })
    }

    fn segment(xs: &[f64], x: f64) -> usize {
        xs.partition_point(|&k| k <= x).clamp(1, xs.len() - 1) - 1
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            MonotoneFn::Linear { slope } => slope * x,
            MonotoneFn::SigmoidRamp { alpha, beta } => {
                alpha * x + (beta - alpha) * (softplus(x) - std::f64::consts::LN_2)
            }
            MonotoneFn::Tabulated { xs, ys } => {
                let k = Self::segment(xs, x);
                let slope = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
                ys[k] + slope * (x - xs[k])
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            MonotoneFn::Linear { slope } => *slope,
            MonotoneFn::SigmoidRamp { alpha, beta } => alpha + (beta - alpha) * sigmoid(x),
            MonotoneFn::Tabulated { xs, ys } => {
                let k = Self::segment(xs, x);
                (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])
            }
        }
    }

    /// `(α, β)` with `α ≤ f′ ≤ β` everywhere.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        match self {
            MonotoneFn::Linear { slope } => (*slope, *slope),
            MonotoneFn::SigmoidRamp { alpha, beta } => (*alpha, *beta),
            MonotoneFn::Tabulated { xs, ys } => xs
                .windows(2)
                .zip(ys.windows(2))
                .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    (lo.min(s), hi.max(s))
                }),
        }
    }
}

/// Which monotone-functional envelope `sigma_bounds` reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    /// `(α² σ_min² T², β² σ_max² T²)` from the kernel range on the interval.
    #[default]
    Continuous,
    /// `(Σ α_i α_j K_ij, Σ β_i β_j K_ij)` with `α_i = α w_i`, exact for the
    /// discretized functional.
    Finite,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Functional {
    VectorMax,
    ProcessSup,
    MonotoneIntegral {
        f: MonotoneFn,
        bounds: BoundForm,
    },
    /// `∫₀ᵀ B_t² dt` for fBm on a grid starting at 0; `H`, `T` come from the model.
    FbmQuadratic,
}

impl Functional {
    pub fn name(&self) -> &'static str {
        match self {
            Functional::VectorMax => "vector_max",
            Functional::ProcessSup => "process_sup",
            Functional::MonotoneIntegral { .. } => "monotone_integral",
            Functional::FbmQuadratic => "fbm_quadratic",
        }
    }

    /// Checks that the model carries what this functional needs.
    pub fn validate(&self, model: &GaussianModel) -> Result<()> {
        match self {
            Functional::VectorMax => Ok(()),
            Functional::ProcessSup | Functional::MonotoneIntegral { .. } => model
                .grid()
                .map(|_| ())
                .ok_or_else(|| Error::Unsupported(format!("{} needs a grid model", self.name()))),
            Functional::FbmQuadratic => fbm_quadratic_setup(model).map(|_| ()),
        }
    }

    /// Uncentered value of the functional on one path.
    pub fn evaluate(&self, model: &GaussianModel, path: &[f64]) -> Result<f64> {
        check_dim(model, path)?;
        Ok(match self {
            Functional::VectorMax | Functional::ProcessSup => path[argmax_index(path)?],
            Functional::MonotoneIntegral { f, .. } => {
                let w = weights(model, self)?;
                w.iter().zip(path).map(|(wk, xk)| wk * f.value(*xk)).sum()
            }
            Functional::FbmQuadratic => {
                let w = weights(model, self)?;
                w.iter().zip(path).map(|(wk, xk)| wk * xk * xk).sum()
            }
        })
    }

    pub(crate) fn evaluate_block(
        &self,
        model: &GaussianModel,
        xs: &DMatrix<f64>,
    ) -> Result<Vec<f64>> {
        let dim = model.dim();
        xs.as_slice()
            .chunks(dim)
            .map(|col| self.evaluate(model, col))
            .collect()
    }

    /// The Mehler integrand `⟨Φ_Z(x), Φ_Z(x_u)⟩` for one coupled pair.
    pub fn mehler_inner(&self, model: &GaussianModel, pair: &CoupledPair) -> Result<f64> {
        check_dim(model, &pair.x)?;
        check_dim(model, &pair.x_u)?;
        match self {
            Functional::VectorMax | Functional::ProcessSup => {
                let i0 = argmax_index(&pair.x)?;
                let iu = argmax_index(&pair.x_u)?;
                Ok(model.kernel()[(i0, iu)])
            }
            Functional::MonotoneIntegral { f, .. } => {
                let w = weights(model, self)?;
                let a = weighted_derivative(f, w, &pair.x)?;
                let b = weighted_derivative(f, w, &pair.x_u)?;
                Ok(quadratic_form(model.kernel(), &a, &b))
            }
            Functional::FbmQuadratic => Err(Error::Unsupported(
                "fbm_quadratic uses the exact second-chaos integrand (quadratic_g_exact)".into(),
            )),
        }
    }

    pub(crate) fn mehler_block(
        &self,
        model: &GaussianModel,
        block: &CoupledBlock,
    ) -> Result<Vec<f64>> {
        let dim = model.dim();
        let k = block.u.len();
        match self {
            Functional::VectorMax | Functional::ProcessSup => (0..k)
                .map(|j| {
                    let i0 = argmax_index(&block.x.as_slice()[j * dim..(j + 1) * dim])?;
                    let iu = argmax_index(&block.x_u.as_slice()[j * dim..(j + 1) * dim])?;
                    Ok(model.kernel()[(i0, iu)])
                })
                .collect(),
            Functional::MonotoneIntegral { f, .. } => {
                let w = weights(model, self)?;
                let mut a = DMatrix::zeros(dim, k);
                let mut b = DMatrix::zeros(dim, k);
                for j in 0..k {
                    let r = j * dim..(j + 1) * dim;
                    a.as_mut_slice()[r.clone()].copy_from_slice(&weighted_derivative(
                        f,
                        w,
                        &block.x.as_slice()[r.clone()],
                    )?);
                    b.as_mut_slice()[r.clone()].copy_from_slice(&weighted_derivative(
                        f,
                        w,
                        &block.x_u.as_slice()[r],
                    )?);
                }
                Ok(column_forms(model.kernel(), &a, &b))
            }
            Functional::FbmQuadratic => Err(Error::Unsupported(
                "fbm_quadratic uses the exact second-chaos integrand (quadratic_g_exact)".into(),
            )),
        }
    }

    /// Exact `⟨DZ, −DL⁻¹Z⟩ = ½‖DZ‖² = 2 ∬ B_s B_t R(s,t) ds dt` for the
    /// quadratic functional.
    pub fn quadratic_g_exact(&self, model: &GaussianModel, path: &[f64]) -> Result<f64> {
        if *self != Functional::FbmQuadratic {
            return Err(Error::Unsupported(format!(
                "quadratic_g_exact is defined for fbm_quadratic, not {}",
                self.name()
            )));
        }
        check_dim(model, path)?;
        let w = weights(model, self)?;
        let a: Vec<f64> = w.iter().zip(path).map(|(wk, xk)| wk * xk).collect();
        Ok(2.0 * quadratic_form(model.kernel(), &a, &a))
    }

    pub(crate) fn quadratic_g_block(
        &self,
        model: &GaussianModel,
        xs: &DMatrix<f64>,
    ) -> Result<Vec<f64>> {
        if *self != Functional::FbmQuadratic {
            return Err(Error::Unsupported(
                "quadratic_g_exact needs fbm_quadratic".into(),
            ));
        }
        let w = weights(model, self)?;
        let dim = model.dim();
        let mut a = xs.clone();
        for col in a.as_mut_slice().chunks_mut(dim) {
            for (x, wk) in col.iter_mut().zip(w) {
                *x *= wk;
            }
        }
        Ok(column_forms(model.kernel(), &a, &a)
            .into_iter()
            .map(|v| 2.0 * v)
            .collect())
    }
}

fn check_dim(model: &GaussianModel, path: &[f64]) -> Result<()> {
    if path.len() == model.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: path.len(),
        })
    }
}

fn weights<'a>(model: &'a GaussianModel, functional: &Functional) -> Result<&'a [f64]> {
    model
        .grid()
        .map(|g| g.weights())
        .ok_or_else(|| Error::Unsupported(format!("{} needs a grid model", functional.name())))
}

fn weighted_derivative(f: &MonotoneFn, w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = f.derivative_bounds();
    w.iter()
        .zip(x)
        .map(|(wk, xk)| {
            let d = f.derivative(*xk);
            if d < lo - DERIVATIVE_TOL || d > hi + DERIVATIVE_TOL {
                return Err(Error::domain(format!(
                    "f'({xk}) = {d} outside its declared bounds [{lo}, {hi}]"
                )));
            }
            Ok(wk * d)
        })
        .collect()
}

fn quadratic_form(r: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut total = 0.0;
    for j in 0..n {
        if b[j] == 0.0 {
            continue;
        }
        let col = &r.as_slice()[j * n..(j + 1) * n];
        let inner: f64 = col.iter().zip(a).map(|(rij, ai)| rij * ai).sum();
        total += inner * b[j];
    }
    total
}

/// `aⱼᵀ R bⱼ` for every column `j`.
fn column_forms(r: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let rb = r * b;
    let n = r.nrows();
    a.as_slice()
        .chunks(n)
        .zip(rb.as_slice().chunks(n))
        .map(|(aj, rbj)| aj.iter().zip(rbj).map(|(x, y)| x * y).sum())
        .collect()
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax_index(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::Empty("argmax of an empty vector"));
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// `(H, T)` of an fBm model on `[0, T]`.
pub fn fbm_quadratic_setup(model: &GaussianModel) -> Result<(f64, f64)> {
    match model.spec() {
        ModelSpec::Grid {
            grid,
            kernel: Kernel::Fbm { hurst },
        } if grid.start() == 0.0 => Ok((*hurst, grid.end())),
        _ => Err(Error::Unsupported(
            "fbm_quadratic needs an fBm model on a grid starting at t = 0".into(),
        )),
    }
}

/// Monte Carlo centering constants, estimated once and frozen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Centering {
    pub mu: f64,
    pub mu_stderr: f64,
    pub abs_mean: f64,
    pub abs_mean_stderr: f64,
    pub var: f64,
    pub var_stderr: f64,
    pub count: usize,
}

/// A functional with its frozen centering.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSpec {
    pub functional: Functional,
    pub centering: Centering,
}

/// Minimum number of draws for [`center_and_absmean`].
pub const MIN_CENTERING_DRAWS: usize = 1000;

/// Estimates `E(raw)`, `E|Z|` and `Var Z` by plain Monte Carlo.
pub fn center_and_absmean(
    functional: Functional,
    model: &GaussianModel,
    count: usize,
    seed: u64,
) -> Result<FunctionalSpec> {
    if count < MIN_CENTERING_DRAWS {
        return Err(Error::domain(format!(
            "centering needs at least {MIN_CENTERING_DRAWS} draws, got {count}"
        )));
    }
    functional.validate(model)?;
    let raw: Vec<f64> = rng::par_chunks(count, seed, |rng, _, len| {
        let xs = model.sample_block(rng, len);
        functional.evaluate_block(model, &xs)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .concat();

    let n = raw.len() as f64;
    let (mu, mu_sd) = mean_sd(raw.iter().copied());
    let (abs_mean, abs_sd) = mean_sd(raw.iter().map(|r| (r - mu).abs()));
    let (var, var_sd) = mean_sd(raw.iter().map(|r| (r - mu).powi(2)));
    let centering = Centering {
        mu,
        mu_stderr: mu_sd / n.sqrt(),
        abs_mean,
        abs_mean_stderr: abs_sd / n.sqrt(),
        var: var * n / (n - 1.0),
        var_stderr: var_sd / n.sqrt(),
        count,
    };

    if functional == Functional::FbmQuadratic {
        let (h, t) = fbm_quadratic_setup(model)?;
        let expected = t.powf(2.0 * h + 1.0) / (2.0 * h + 1.0);
        if (centering.mu - expected).abs() > 4.0 * centering.mu_stderr {
            log::warn!(
                "quadratic centering {} deviates from T^(2H+1)/(2H+1) = {expected} by more than 4 stderr",
                centering.mu
            );
        }
    }
    Ok(FunctionalSpec {
        functional,
        centering,
    })
}

pub(crate) fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0.0;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for v in values {
        n += 1.0;
        let d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    let var = if n > 1.0 { m2 / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Constants `(σ_min², σ_max²)` of the Gaussian density envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaBounds {
    pub min: f64,
    pub max: f64,
    pub source: &'static str,
}

/// `(α² σ_min² T², β² σ_max² T²)` for a monotone integral over an interval of length `T`.
pub fn monotone_continuous_bounds(
    alpha: f64,
    beta: f64,
    r_min: f64,
    r_max: f64,
    span: f64,
) -> (f64, f64) {
    (
        alpha * alpha * r_min * span * span,
        beta * beta * r_max * span * span,
    )
}

/// `(Σ αᵢαⱼKᵢⱼ, Σ βᵢβⱼKᵢⱼ)` for a finite monotone functional.
pub fn monotone_finite_bounds(alphas: &[f64], betas: &[f64], k: &DMatrix<f64>) -> (f64, f64) {
    (
        quadratic_form(k, alphas, alphas),
        quadratic_form(k, betas, betas),
    )
}

/// Envelope constants for a functional on a model.
///
/// Errors with [`Error::DegenerateEnvelope`] when the lower constant is not
/// positive; g estimation is still meaningful in that case.
pub fn sigma_bounds(model: &GaussianModel, functional: &Functional) -> Result<SigmaBounds> {
    let k = model.kernel();
    let n = k.nrows();
    let entry_min = k.iter().copied().fold(f64::INFINITY, f64::min);
    let diag_max = (0..n).map(|i| k[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    let bounds = match functional {
        Functional::VectorMax => SigmaBounds {
            min: entry_min,
            max: diag_max,
            source: "max of a Gaussian vector",
        },
        Functional::ProcessSup => SigmaBounds {
            min: entry_min,
            max: k.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            source: "supremum of a Gaussian process",
        },
        Functional::MonotoneIntegral { f, bounds } => {
            let (alpha, beta) = f.derivative_bounds();
            if alpha < 0.0 {
                return Err(Error::DegenerateEnvelope(alpha));
            }
            let grid = model
                .grid()
                .ok_or_else(|| Error::Unsupported("monotone_integral needs a grid".into()))?;
            match bounds {
                BoundForm::Continuous => {
                    let r_max = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let (min, max) =
                        monotone_continuous_bounds(alpha, beta, entry_min, r_max, grid.span());
                    SigmaBounds {
                        min,
                        max,
                        source: "monotone functional, continuous",
                    }
                }
                BoundForm::Finite => {
                    if entry_min < 0.0 {
                        return Err(Error::DegenerateEnvelope(entry_min));
                    }
                    let a: Vec<f64> = grid.weights().iter().map(|w| alpha * w).collect();
                    let b: Vec<f64> = grid.weights().iter().map(|w| beta * w).collect();
                    let (min, max) = monotone_finite_bounds(&a, &b, k);
                    SigmaBounds {
                        min,
                        max,
                        source: "monotone functional, finite",
                    }
                }
            }
        }
        Functional::FbmQuadratic => return Err(Error::DegenerateEnvelope(0.0)),
    };
    if bounds.min > 0.0 {
        Ok(bounds)
    } else {
        Err(Error::DegenerateEnvelope(bounds.min))
    }
}
