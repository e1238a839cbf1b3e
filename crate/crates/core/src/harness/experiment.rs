//! The staged pipeline behind every CLI subcommand.

use serde::Serialize;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, Format};
use super::empirical::{kde_density, KdeEstimate};
use super::io::{write_columns, write_g_samples, write_json, write_rows, Column};
use super::validate::{
    containment_report, tail_checks, BoundSet, CheckRecord, Observed, Provenance, SlackPolicy,
    ValidationReport, Verdict,
};
use crate::density::{
    density_from_g, gaussian_envelope, key_identity_residual, normality_diagnostic,
    DensityEstimate, Envelope, KeyIdentityResidual, NormalityDiagnostic,
};
use crate::error::{Error, Result, StageExt};
use crate::functional::{
    center_and_absmean, fbm_quadratic_setup, sigma_bounds, Functional, FunctionalSpec, SigmaBounds,
};
use crate::gest::{
    draw_g_samples_with, linspace, regress_g_with, z_grid, GEstimate, GSamples, IdentityCheck,
};
use crate::model::{build_model, GaussianModel};
use crate::rng::derive_seed;
use crate::tails::{
    concentration_hypothesis, fbm_quadratic_params, h_monotonicity_check, HCheck, HypothesisCheck,
    Side, TailBoundParams, TailReport,
};

/// Allowed deviation of the key identity, relative to `φ̂(0)`.
pub const KEY_IDENTITY_TOLERANCE: f64 = 0.05;
/// Accepted trapezoid mass of `ρ̂` over its valid region.
pub const MASS_RANGE: (f64, f64) = (0.95, 1.05);
/// Accepted `|∫zρ̂|`, in units of `σ̂_Z`.
pub const MEAN_TOLERANCE: f64 = 0.05;

/// Model and centered functional, ready for sampling.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub model: GaussianModel,
    pub spec: FunctionalSpec,
    pub provenance: Provenance,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let model = config.model_spec().and_then(build_model).stage("model")?;
    let functional = config.functional().stage("functional")?;
    let spec = center_and_absmean(
        functional,
        &model,
        config.centering_samples(),
        derive_seed(config.mc.seed, "centering"),
    )
    .stage("centering")?;
    if model.jitter_applied() > 0.0 {
        log::info!(
            "covariance needed diagonal jitter {:e}",
            model.jitter_applied()
        );
    }
    Ok(Prepared {
        provenance: Provenance {
            config_hash: config.hash(),
            seed: config.mc.seed,
            version: crate::VERSION.to_string(),
        },
        config: config.clone(),
        model,
        spec,
    })
}

#[derive(Debug, Clone)]
pub struct GStage {
    pub samples: GSamples,
    pub estimate: GEstimate,
}

pub fn estimate_g(p: &Prepared) -> Result<GStage> {
    let cfg = &p.config;
    let samples = draw_g_samples_with(
        &p.spec,
        &p.model,
        cfg.mc.samples,
        derive_seed(cfg.mc.seed, "g_samples"),
        cfg.coupling_mode(),
    )
    .stage("sampling")?;
    let estimate = z_grid(&samples.z, cfg.grid_policy())
        .and_then(|grid| regress_g_with(&samples, &grid, cfg.mc.regression, cfg.mc.bandwidth))
        .stage("regression")?;
    log::info!(
        "g estimated on {} points, {} flagged, bandwidth {:.4}",
        estimate.len(),
        estimate.flagged_count(),
        estimate.bandwidth
    );
    Ok(GStage { samples, estimate })
}

/// Draws of `v` against the exact pathwise bound `v ≤ α(raw − μ_Q) + β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathwiseCheck {
    pub alpha: f64,
    pub beta: f64,
    pub check: HypothesisCheck,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub density: DensityEstimate,
    pub sigma: Option<SigmaBounds>,
    pub envelope: Option<Envelope>,
    pub kde: KdeEstimate,
    pub normality: NormalityDiagnostic,
    pub identity: IdentityCheck,
    pub key_identity: KeyIdentityResidual,
    pub hcheck: Option<HCheck>,
    pub pathwise: Option<PathwiseCheck>,
    pub tails_right: TailReport,
    pub tails_left: TailReport,
    pub tail_params: TailBoundParams,
    pub notes: Vec<String>,
}

fn tail_grid(cfg: &ExperimentConfig, sd: f64) -> Vec<f64> {
    let lo = cfg.tails.z_min.unwrap_or(0.1 * sd);
    let hi = cfg.tails.z_max.unwrap_or(3.0 * sd);
    linspace(lo, hi, cfg.tails.points)
}

fn pathwise_check(model: &GaussianModel, samples: &GSamples) -> Result<PathwiseCheck> {
    let (h, t) = fbm_quadratic_setup(model)?;
    let q = fbm_quadratic_params(h, t)?;
    let z_exact: Vec<f64> = samples.raw().map(|r| r - q.mu_q).collect();
    Ok(PathwiseCheck {
        alpha: q.alpha,
        beta: q.beta,
        check: concentration_hypothesis(&z_exact, &samples.v, q.alpha, q.beta),
    })
}

pub fn analyze(p: &Prepared, g: &GStage) -> Result<Analysis> {
    let cfg = &p.config;
    let c = p.spec.centering;
    let est = &g.estimate;
    let mut notes = Vec::new();

    let density = density_from_g(est, c.abs_mean).stage("density")?;
    let sigma = match sigma_bounds(&p.model, &p.spec.functional) {
        Ok(s) => Some(s),
        Err(e @ (Error::DegenerateEnvelope(_) | Error::Unsupported(_))) => {
            notes.push(format!("no Gaussian envelope: {e}"));
            None
        }
        Err(e) => return Err(e).stage("envelope"),
    };
    let envelope = sigma
        .map(|s| {
            gaussian_envelope(s.min, s.max, c.abs_mean, &est.z).map(|e| e.with_source(s.source))
        })
        .transpose()
        .stage("envelope")?;
    let kde = kde_density(&g.samples.z, &est.z, None).stage("kde")?;
    let var_z = g.samples.var_z();
    let normality = normality_diagnostic(&g.samples, est, var_z);
    let identity = g.samples.identity_check();
    let key_identity = key_identity_residual(&g.samples.z, est, &density).stage("key_identity")?;

    let sd = var_z.sqrt();
    let beta_exp = cfg.tails.beta_exp;
    let alpha_thr = cfg.tails.alpha_thr.unwrap_or(2.0 * sd);
    let hcheck = match h_monotonicity_check(&density, beta_exp, alpha_thr) {
        Ok(h) => Some(h),
        Err(e) => {
            notes.push(format!("h-monotonicity not checked: {e}"));
            None
        }
    };

    let pathwise = match p.spec.functional {
        Functional::FbmQuadratic => Some(pathwise_check(&p.model, &g.samples).stage("pathwise")?),
        _ => None,
    };

    let k = p.model.kernel();
    let diag = (0..k.nrows()).map(|i| k[(i, i)]);
    let is_max = matches!(
        p.spec.functional,
        Functional::VectorMax | Functional::ProcessSup
    );
    let tail_params = TailBoundParams {
        sigma_min2: sigma.map(|s| s.min),
        sigma_max2: sigma.map(|s| s.max),
        abs_mean: c.abs_mean,
        mu: is_max.then_some(c.mu),
        min_diag: is_max.then(|| diag.clone().fold(f64::INFINITY, f64::min)),
        max_diag: is_max.then(|| diag.fold(f64::NEG_INFINITY, f64::max)),
        concentration: pathwise.map(|w| (w.alpha, w.beta, w.check.verified)),
        thm42: match (&sigma, &hcheck) {
            (Some(_), Some(h)) => Some((beta_exp, alpha_thr, h.pass)),
            _ => None,
        },
        fbm_quadratic: match p.spec.functional {
            Functional::FbmQuadratic => {
                let (h, t) = fbm_quadratic_setup(&p.model)?;
                Some(fbm_quadratic_params(h, t)?)
            }
            _ => None,
        },
    };
    let grid = tail_grid(cfg, sd);
    let tails_right = TailReport::build(&tail_params, &g.samples.z, &grid, Side::Right, Some(est))
        .stage("tails")?;
    let tails_left = TailReport::build(&tail_params, &g.samples.z, &grid, Side::Left, Some(est))
        .stage("tails")?;

    Ok(Analysis {
        density,
        sigma,
        envelope,
        kde,
        normality,
        identity,
        key_identity,
        hcheck,
        pathwise,
        tails_right,
        tails_left,
        tail_params,
        notes,
    })
}

/// Pointwise check of unflagged `ĝ` against `[σ_min², σ_max²]`; within two
/// standard errors outside the range is soft.
fn g_range_records(est: &GEstimate, s: &SigmaBounds) -> Vec<CheckRecord> {
    (0..est.len())
        .filter(|&k| !est.flagged[k])
        .map(|k| {
            let g = est.ghat[k];
            let slack = 2.0 * est.stderr[k];
            let verdict = if s.min <= g && g <= s.max {
                Verdict::Pass
            } else if s.min - slack <= g && g <= s.max + slack {
                Verdict::Soft
            } else {
                Verdict::Hard
            };
            CheckRecord {
                check: "g_range".into(),
                z: est.z[k],
                observed: g,
                lower: s.min,
                upper: s.max,
                slack,
                verdict,
            }
        })
        .collect()
}

pub fn validate(p: &Prepared, g: &GStage, a: &Analysis) -> Result<ValidationReport> {
    let policy = SlackPolicy::default();
    let c = p.spec.centering;
    let mut report = ValidationReport {
        provenance: Some(p.provenance.clone()),
        ..Default::default()
    };
    for n in &a.notes {
        report.note(n.clone());
    }

    let id = a.identity;
    report.scalar("identity", id.mean_v, id.var_z, id.stderr, 3.0);

    let ki = &a.key_identity;
    report.range(
        "key_identity",
        f64::NAN,
        ki.sup_abs,
        0.0,
        KEY_IDENTITY_TOLERANCE * ki.phi0,
    );
    let half = 0.5 * c.abs_mean;
    let se = (ki.phi0_stderr.powi(2) + (0.5 * c.abs_mean_stderr).powi(2)).sqrt();
    report.scalar("phi0", ki.phi0, half, se, 3.0);
    report.range(
        "density_mass",
        f64::NAN,
        a.density.mass,
        MASS_RANGE.0,
        MASS_RANGE.1,
    );
    let mean_tol = MEAN_TOLERANCE * g.samples.sd_z();
    report.range(
        "density_mean",
        f64::NAN,
        a.density.mean,
        -mean_tol,
        mean_tol,
    );

    if let (Some(env), Some(s)) = (&a.envelope, &a.sigma) {
        let bounds = BoundSet::from_envelope(env, c.abs_mean_stderr);
        report.extend(containment_report(
            "kde_envelope",
            &Observed::from_kde(&a.kde, &policy),
            &bounds,
            &policy,
        )?);
        report.extend(containment_report(
            "density_envelope",
            &Observed::from_density(&a.density, &policy),
            &bounds,
            &policy,
        )?);
        report.records.extend(g_range_records(&g.estimate, s));
    }

    if let Some(w) = &a.pathwise {
        report.range("pathwise", f64::NAN, w.check.violations as f64, 0.0, 0.0);
    }
    if let Some(h) = &a.hcheck {
        if !h.pass {
            report.note(format!(
                "h-monotonicity fails at {} of {} steps; thm42 bound marked unverified",
                h.violations.len(),
                h.checked
            ));
        }
    }
    report.extend(tail_checks(&a.tails_right));
    report.extend(tail_checks(&a.tails_left));
    Ok(report)
}

/// How far a run goes; each stage writes its own artifacts plus those of the
/// stages before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    G,
    Density,
    Bounds,
    Tails,
    Validate,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub prepared: Prepared,
    pub g: GStage,
    pub analysis: Option<Analysis>,
    pub report: Option<ValidationReport>,
}

impl Outcome {
    /// Exit status for the CLI: hard failures give `false`.
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_none_or(|r| r.aggregate_pass())
    }
}

pub fn run_until(config: &ExperimentConfig, stage: Stage) -> Result<Outcome> {
    let prepared = prepare(config)?;
    let g = estimate_g(&prepared)?;
    let analysis = if stage > Stage::G {
        Some(analyze(&prepared, &g)?)
    } else {
        None
    };
    let report = match (&analysis, stage) {
        (Some(a), Stage::Validate) => Some(validate(&prepared, &g, a).stage("validation")?),
        _ => None,
    };
    Ok(Outcome {
        prepared,
        g,
        analysis,
        report,
    })
}

/// Runs the full pipeline and writes every artifact to the configured output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome> {
    let outcome = run_until(config, Stage::Validate)?;
    write_outcome(
        &outcome,
        &config.output_dir(),
        config.output.format,
        Stage::Validate,
    )
    .stage("output")?;
    Ok(outcome)
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    provenance: &'a Provenance,
    functional: &'static str,
    samples: usize,
    centering: crate::functional::Centering,
    identity: IdentityCheck,
    bandwidth: f64,
    grid_points: usize,
    flagged: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    analysis: Option<AnalysisSummary<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    validation: Option<ValidationSummary<'a>>,
}

#[derive(Debug, Serialize)]
struct AnalysisSummary<'a> {
    density_mass: f64,
    density_mean: f64,
    rho_at_zero: f64,
    sigma: Option<SigmaBounds>,
    normality: NormalityDiagnostic,
    key_identity_sup: f64,
    phi0: f64,
    phi0_stderr: f64,
    hcheck: Option<&'a HCheck>,
    pathwise: Option<PathwiseCheck>,
    tail_clips: usize,
    tail_params: &'a TailBoundParams,
}

#[derive(Debug, Serialize)]
struct ValidationSummary<'a> {
    pass: bool,
    hard_failures: usize,
    soft_notes: usize,
    checks: Vec<super::validate::CheckSummary>,
    notes: &'a [String],
}

fn file(dir: &Path, name: &str, format: Format) -> PathBuf {
    dir.join(match format {
        Format::Csv => format!("{name}.csv"),
        Format::Json => format!("{name}.json"),
    })
}

fn write_tails(path: &Path, t: &TailReport, format: Format) -> Result<()> {
    if format == Format::Json {
        return write_json(path, t);
    }
    let p: Vec<f64> = t.empirical.iter().map(|e| e.p).collect();
    let lo: Vec<f64> = t.empirical.iter().map(|e| e.lo).collect();
    let hi: Vec<f64> = t.empirical.iter().map(|e| e.hi).collect();
    let mut cols = vec![
        ("z", Column::Real(&t.z)),
        ("empirical", Column::Real(&p)),
        ("ci_lo", Column::Real(&lo)),
        ("ci_hi", Column::Real(&hi)),
    ];
    for b in &t.bounds {
        cols.push((b.name.as_str(), Column::Real(&b.values)));
    }
    write_columns(path, &cols)
}

/// Writes the artifacts of every stage up to `stage`, plus `summary.json`.
pub fn write_outcome(o: &Outcome, dir: &Path, format: Format, stage: Stage) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = format == Format::Json;
    let est = &o.g.estimate;
    if json {
        #[derive(Serialize)]
        struct Draws<'a> {
            z: &'a [f64],
            v: &'a [f64],
        }
        write_json(
            &file(dir, "g_samples", format),
            &Draws {
                z: &o.g.samples.z,
                v: &o.g.samples.v,
            },
        )?;
        write_json(&file(dir, "g_estimate", format), est)?;
    } else {
        write_g_samples(&file(dir, "g_samples", format), &o.g.samples)?;
        write_columns(
            &file(dir, "g_estimate", format),
            &[
                ("z", Column::Real(&est.z)),
                ("ghat", Column::Real(&est.ghat)),
                ("stderr", Column::Real(&est.stderr)),
                ("count", Column::Real(&est.count)),
                ("flagged", Column::Flag(&est.flagged)),
                ("clamped", Column::Flag(&est.clamped)),
            ],
        )?;
    }

    if let Some(a) = &o.analysis {
        let d = &a.density;
        if json {
            write_json(&file(dir, "density", format), d)?;
            write_json(&file(dir, "key_identity", format), &a.key_identity)?;
        } else {
            write_columns(
                &file(dir, "density", format),
                &[
                    ("z", Column::Real(&d.z)),
                    ("rho", Column::Real(&d.rho)),
                    ("valid", Column::Flag(&d.valid)),
                    ("rel_stderr", Column::Real(&d.rel_stderr)),
                ],
            )?;
            let ki = &a.key_identity;
            write_columns(
                &file(dir, "key_identity", format),
                &[
                    ("z", Column::Real(&ki.z)),
                    ("phi", Column::Real(&ki.phi)),
                    ("residual", Column::Real(&ki.residual)),
                ],
            )?;
        }
        if stage >= Stage::Bounds {
            if let Some(env) = &a.envelope {
                if json {
                    write_json(&file(dir, "envelope", format), env)?;
                } else {
                    write_columns(
                        &file(dir, "envelope", format),
                        &[
                            ("z", Column::Real(&env.z)),
                            ("lower", Column::Real(&env.lower)),
                            ("upper", Column::Real(&env.upper)),
                        ],
                    )?;
                }
            }
            let k = &a.kde;
            if json {
                write_json(&file(dir, "kde", format), k)?;
            } else {
                write_columns(
                    &file(dir, "kde", format),
                    &[
                        ("z", Column::Real(&k.z)),
                        ("density", Column::Real(&k.density)),
                        ("stderr", Column::Real(&k.stderr)),
                        ("slope", Column::Real(&k.slope)),
                        ("curvature", Column::Real(&k.curvature)),
                    ],
                )?;
            }
        }
        if stage >= Stage::Tails {
            write_tails(&file(dir, "tails_right", format), &a.tails_right, format)?;
            write_tails(&file(dir, "tails_left", format), &a.tails_left, format)?;
        }
    }
    if let Some(r) = &o.report {
        if json {
            write_json(&file(dir, "validation", format), r)?;
        } else {
            write_rows(&file(dir, "validation", format), &r.records)?;
        }
    }

    let c = o.prepared.spec.centering;
    let summary = Summary {
        provenance: &o.prepared.provenance,
        functional: o.g.samples.functional,
        samples: o.g.samples.count(),
        centering: c,
        identity: o.g.samples.identity_check(),
        bandwidth: est.bandwidth,
        grid_points: est.len(),
        flagged: est.flagged_count(),
        analysis: o.analysis.as_ref().map(|a| AnalysisSummary {
            density_mass: a.density.mass,
            density_mean: a.density.mean,
            rho_at_zero: a.density.rho_at_zero,
            sigma: a.sigma,
            normality: a.normality,
            key_identity_sup: a.key_identity.sup_abs,
            phi0: a.key_identity.phi0,
            phi0_stderr: a.key_identity.phi0_stderr,
            hcheck: a.hcheck.as_ref(),
            pathwise: a.pathwise,
            tail_clips: a.tails_right.clip_events() + a.tails_left.clip_events(),
            tail_params: &a.tail_params,
        }),
        validation: o.report.as_ref().map(|r| ValidationSummary {
            pass: r.aggregate_pass(),
            hard_failures: r.hard_failures(),
            soft_notes: r.soft_notes(),
            checks: r.summary(),
            notes: &r.notes,
        }),
    };
    write_json(&dir.join("summary.json"), &summary)
}
