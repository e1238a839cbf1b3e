//! TOML experiment configs.
//!
//! ```toml
//! [model]
//! type = "fbm"          # matrix | fbm | tabulated
//! hurst = 0.75
//! start = 1.0
//! end = 2.0
//! points = 512
//!
//! [functional]
//! kind = "process_sup"  # vector_max | process_sup | monotone_integral | fbm_quadratic
//!
//! [mc]
//! samples = 100000
//! seed = 11
//!
//! [grid]                # optional; default 401 points over the 0.5%-99.5% quantiles
//! [tails]               # optional
//! [output]              # optional
//! ```
//!
//! Relative paths resolve against the directory of the config file.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use super::io::{read_matrix_csv, read_pairs_csv};
use crate::error::{Error, Result};
use crate::functional::{BoundForm, Functional, MonotoneFn, MIN_CENTERING_DRAWS};
use crate::gest::{GridPolicy, Regression};
use crate::model::{CouplingMode, Kernel, ModelSpec, ProcessGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSection {
    /// Covariance given inline (`entries`) or as a headerless CSV (`path`).
    Matrix {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entries: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
    },
    Fbm {
        hurst: f64,
        start: f64,
        end: f64,
        points: usize,
    },
    /// Kernel matrix from CSV on `times`, or on a uniform grid over `[start, end]`.
    Tabulated {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        times: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalSection {
    VectorMax,
    ProcessSup,
    MonotoneIntegral {
        /// `linear`, `sigmoid_ramp` or `tabulated`.
        function: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slope: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
        /// Two-column CSV `(x, f(x))` with a header row.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default)]
        bounds: BoundForm,
    },
    FbmQuadratic,
}

fn default_points() -> usize {
    401
}

fn default_tail_points() -> usize {
    48
}

fn default_beta_exp() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub samples: usize,
    pub seed: u64,
    /// Draws for the centering constants; defaults to `samples`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centering_samples: Option<usize>,
    /// Number of equal-mass strata for the coupling time; absent means plain `Exp(1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strata: Option<usize>,
    #[serde(default)]
    pub regression: Regression,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            lo: None,
            hi: None,
            points: default_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailsSection {
    /// Defaults to `0.1 σ̂_Z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_min: Option<f64>,
    /// Defaults to `3 σ̂_Z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_max: Option<f64>,
    #[serde(default = "default_tail_points")]
    pub points: usize,
    #[serde(default = "default_beta_exp")]
    pub beta_exp: f64,
    /// Defaults to `2 σ̂_Z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_thr: Option<f64>,
}

impl Default for TailsSection {
    fn default() -> Self {
        TailsSection {
            z_min: None,
            z_max: None,
            points: default_tail_points(),
            beta_exp: default_beta_exp(),
            alpha_thr: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out(),
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub functional: FunctionalSection,
    pub mc: McSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub tails: TailsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses and validates config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn centering_samples(&self) -> usize {
        self.mc.centering_samples.unwrap_or(self.mc.samples)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc.samples < MIN_CENTERING_DRAWS {
            return Err(Error::Config(format!(
                "mc.samples must be at least {MIN_CENTERING_DRAWS}, got {}",
                self.mc.samples
            )));
        }
        if self.centering_samples() < MIN_CENTERING_DRAWS {
            return Err(Error::Config(format!(
                "mc.centering_samples must be at least {MIN_CENTERING_DRAWS}"
            )));
        }
        if self.mc.strata == Some(0) {
            return Err(Error::Config("mc.strata must be positive".into()));
        }
        if let Some(h) = self.mc.bandwidth {
            if !(h > 0.0) {
                return Err(Error::Config(format!(
                    "mc.bandwidth must be positive, got {h}"
                )));
            }
        }
        match (self.grid.lo, self.grid.hi) {
            (Some(lo), Some(hi)) if !(lo < 0.0 && 0.0 < hi) => {
                return Err(Error::Config(format!(
                    "grid range [{lo}, {hi}] must contain 0 in its interior"
                )));
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(Error::Config(
                    "grid.lo and grid.hi must be given together".into(),
                ));
            }
            _ => {}
        }
        if self.grid.points < 3 {
            return Err(Error::Config("grid.points must be at least 3".into()));
        }
        if self.tails.points < 2 || !(self.tails.beta_exp > 1.0) {
            return Err(Error::Config(
                "tails need at least 2 points and beta_exp > 1".into(),
            ));
        }
        if let (Some(a), Some(b)) = (self.tails.z_min, self.tails.z_max) {
            if !(0.0 < a && a < b) {
                return Err(Error::Config(format!(
                    "tail range [{a}, {b}] must satisfy 0 < z_min < z_max"
                )));
            }
        }
        for p in self.referenced_files() {
            let full = self.resolve(&p);
            if !full.is_file() {
                return Err(Error::Config(format!(
                    "referenced file {} does not exist",
                    full.display()
                )));
            }
        }
        Ok(())
    }

    fn referenced_files(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        match &self.model {
            ModelSection::Matrix { path: Some(p), .. }
            | ModelSection::Tabulated { path: p, .. } => out.push(p.clone()),
            _ => {}
        }
        if let FunctionalSection::MonotoneIntegral { path: Some(p), .. } = &self.functional {
            out.push(p.clone());
        }
        out
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        Ok(match &self.model {
            ModelSection::Matrix { entries, path } => {
                let m = match (entries, path) {
                    (Some(rows), None) => {
                        let n = rows.len();
                        if n == 0 || rows.iter().any(|r| r.len() != n) {
                            return Err(Error::Config(
                                "model.entries must be a non-empty square matrix".into(),
                            ));
                        }
                        DMatrix::from_row_iterator(n, n, rows.iter().flatten().copied())
                    }
                    (None, Some(p)) => read_matrix_csv(&self.resolve(p))?,
                    _ => {
                        return Err(Error::Config(
                            "matrix model needs exactly one of `entries` or `path`".into(),
                        ))
                    }
                };
                ModelSpec::Matrix(m)
            }
            ModelSection::Fbm {
                hurst,
                start,
                end,
                points,
            } => ModelSpec::Grid {
                grid: ProcessGrid::uniform(*start, *end, *points)?,
                kernel: Kernel::Fbm { hurst: *hurst },
            },
            ModelSection::Tabulated {
                path,
                times,
                start,
                end,
            } => {
                let k = read_matrix_csv(&self.resolve(path))?;
                let grid = match (times, start, end) {
                    (Some(t), None, None) => ProcessGrid::new(t.clone())?,
                    (None, Some(a), Some(b)) => ProcessGrid::uniform(*a, *b, k.nrows())?,
                    _ => {
                        return Err(Error::Config(
                            "tabulated model needs either `times` or both `start` and `end`".into(),
                        ))
                    }
                };
                ModelSpec::Grid {
                    grid,
                    kernel: Kernel::Tabulated(k),
                }
            }
        })
    }

    pub fn functional(&self) -> Result<Functional> {
        Ok(match &self.functional {
            FunctionalSection::VectorMax => Functional::VectorMax,
            FunctionalSection::ProcessSup => Functional::ProcessSup,
            FunctionalSection::FbmQuadratic => Functional::FbmQuadratic,
            FunctionalSection::MonotoneIntegral {
                function,
                slope,
                alpha,
                beta,
                path,
                bounds,
            } => {
                let missing =
                    |k: &str| Error::Config(format!("functional.{k} is required for `{function}`"));
                let f = match function.as_str() {
                    "linear" => MonotoneFn::Linear {
                        slope: slope.ok_or_else(|| missing("slope"))?,
                    },
                    "sigmoid_ramp" => MonotoneFn::sigmoid_ramp(
                        alpha.ok_or_else(|| missing("alpha"))?,
                        beta.ok_or_else(|| missing("beta"))?,
                    )?,
                    "tabulated" => {
                        let p = path.as_ref().ok_or_else(|| missing("path"))?;
                        let (xs, ys) = read_pairs_csv(&self.resolve(p))?;
                        MonotoneFn::tabulated(xs, ys)?
                    }
                    other => {
                        return Err(Error::Config(format!(
                            "unknown monotone function `{other}`"
                        )))
                    }
                };
                Functional::MonotoneIntegral { f, bounds: *bounds }
            }
        })
    }

    pub fn grid_policy(&self) -> GridPolicy {
        match (self.grid.lo, self.grid.hi) {
            (Some(lo), Some(hi)) => GridPolicy::Fixed {
                lo,
                hi,
                points: self.grid.points,
            },
            _ => GridPolicy::Quantile {
                points: self.grid.points,
            },
        }
    }

    pub fn coupling_mode(&self) -> CouplingMode {
        match self.mc.strata {
            Some(strata) => CouplingMode::Stratified { strata },
            None => CouplingMode::Exponential,
        }
    }

    /// Canonical TOML of the effective config.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`Self::canonical`] with the output section reset, so
    /// the hash names the experiment rather than where it was written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        Sha256::digest(c.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
