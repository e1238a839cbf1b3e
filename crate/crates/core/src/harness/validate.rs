use serde::Serialize;

use super::empirical::KdeEstimate;
use crate::density::{DensityEstimate, Envelope};
use crate::error::{Error, Result};
use crate::tails::{BoundKind, TailReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// Outside the bound but within statistical slack.
    Soft,
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub z: f64,
    pub observed: f64,
    /// `NaN` when the check has no lower side.
    pub lower: f64,
    /// `NaN` when the check has no upper side.
    pub upper: f64,
    /// Half-width of the allowance used for the soft verdict.
    pub slack: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub records: Vec<CheckRecord>,
    pub notes: Vec<String>,
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckSummary {
    pub check: String,
    pub points: usize,
    pub soft: usize,
    pub hard: usize,
}

impl ValidationReport {
    pub fn hard_failures(&self) -> usize {
        self.count(Verdict::Hard)
    }

    pub fn soft_notes(&self) -> usize {
        self.count(Verdict::Soft)
    }

    fn count(&self, v: Verdict) -> usize {
        self.records.iter().filter(|r| r.verdict == v).count()
    }

    /// True iff no record is a hard failure.
    pub fn aggregate_pass(&self) -> bool {
        self.hard_failures() == 0
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.records.extend(other.records);
        self.notes.extend(other.notes);
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    pub fn records_for<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a CheckRecord> + 'a {
        self.records.iter().filter(move |r| r.check == check)
    }

    /// Per-check counts in first-seen order.
    pub fn summary(&self) -> Vec<CheckSummary> {
        let mut out: Vec<CheckSummary> = Vec::new();
        for r in &self.records {
            let idx = match out.iter().position(|s| s.check == r.check) {
                Some(i) => i,
                None => {
                    out.push(CheckSummary {
                        check: r.check.clone(),
                        points: 0,
                        soft: 0,
                        hard: 0,
                    });
                    out.len() - 1
                }
            };
            let s = &mut out[idx];
            s.points += 1;
            match r.verdict {
                Verdict::Soft => s.soft += 1,
                Verdict::Hard => s.hard += 1,
                Verdict::Pass => {}
            }
        }
        out
    }

    /// Records a scalar comparison `|observed − target| ≤ k · stderr`.
    pub fn scalar(&mut self, check: &str, observed: f64, target: f64, stderr: f64, k: f64) {
        let slack = k * stderr;
        let verdict = if (observed - target).abs() <= slack {
            Verdict::Pass
        } else {
            Verdict::Hard
        };
        self.records.push(CheckRecord {
            check: check.into(),
            z: f64::NAN,
            observed,
            lower: target - slack,
            upper: target + slack,
            slack,
            verdict,
        });
    }

    /// Records `lower ≤ observed ≤ upper` with no slack.
    pub fn range(&mut self, check: &str, z: f64, observed: f64, lower: f64, upper: f64) {
        let ok = !(observed < lower) && !(observed > upper);
        self.records.push(CheckRecord {
            check: check.into(),
            z,
            observed,
            lower,
            upper,
            slack: 0.0,
            verdict: if ok { Verdict::Pass } else { Verdict::Hard },
        });
    }
}

/// Allowances for comparing a noisy curve against exact bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlackPolicy {
    /// Multiplier on standard errors.
    pub ci_z: f64,
    /// Multiplier on `h|f′|` in the KDE bias allowance.
    pub bias_factor: f64,
    /// Adds `h²|f″|` to the KDE bias allowance.
    pub curvature: bool,
}

impl Default for SlackPolicy {
    fn default() -> Self {
        SlackPolicy {
            ci_z: 3.0,
            bias_factor: 2.0,
            curvature: true,
        }
    }
}

/// A curve with a per-point allowance.
#[derive(Debug, Clone, PartialEq)]
pub struct Observed {
    pub z: Vec<f64>,
    pub value: Vec<f64>,
    pub slack: Vec<f64>,
}

impl Observed {
    pub fn exact(z: &[f64], value: &[f64]) -> Self {
        Observed {
            z: z.to_vec(),
            value: value.to_vec(),
            slack: vec![0.0; z.len()],
        }
    }

    /// KDE with slack `ci_z·se + bias_factor·h|f′| (+ h²|f″|)`.
    pub fn from_kde(kde: &KdeEstimate, policy: &SlackPolicy) -> Self {
        let h = kde.bandwidth;
        let slack = (0..kde.z.len())
            .map(|k| {
                let mut s = policy.ci_z * kde.stderr[k] + policy.bias_factor * h * kde.slope[k];
                if policy.curvature {
                    s += h * h * kde.curvature[k];
                }
                s
            })
            .collect();
        Observed {
            z: kde.z.clone(),
            value: kde.density.clone(),
            slack,
        }
    }

    /// Valid points of `ρ̂` with slack `ci_z · rel_stderr · ρ̂`.
    pub fn from_density(d: &DensityEstimate, policy: &SlackPolicy) -> Self {
        let keep: Vec<usize> = (0..d.z.len()).filter(|&k| d.valid[k]).collect();
        Observed {
            z: keep.iter().map(|&k| d.z[k]).collect(),
            value: keep.iter().map(|&k| d.rho[k]).collect(),
            slack: keep
                .iter()
                .map(|&k| policy.ci_z * d.rel_stderr[k] * d.rho[k])
                .collect(),
        }
    }
}

/// Pointwise bounds; `NaN` marks a missing side.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSet {
    pub z: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Relative standard error of the bounds themselves.
    pub rel_stderr: f64,
}

impl BoundSet {
    /// Envelope bounds, uncertain through the estimated `E|Z|`.
    pub fn from_envelope(env: &Envelope, abs_mean_stderr: f64) -> Self {
        BoundSet {
            z: env.z.clone(),
            lower: env.lower.clone(),
            upper: env.upper.clone(),
            rel_stderr: abs_mean_stderr / env.abs_mean,
        }
    }

    /// Restricts to the points of `z` (which must be a subset, in order).
    fn aligned(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut lower = Vec::with_capacity(z.len());
        let mut upper = Vec::with_capacity(z.len());
        let mut j = 0;
        for &x in z {
            while j < self.z.len() && self.z[j] != x {
                j += 1;
            }
            if j == self.z.len() {
                return Err(Error::MalformedGrid(format!(
                    "bound grid has no point at z = {x}"
                )));
            }
            lower.push(self.lower[j]);
            upper.push(self.upper[j]);
        }
        Ok((lower, upper))
    }
}

/// Compares a curve against pointwise bounds. A point outside the bounds is
/// a soft note when within the combined slack and a hard failure otherwise.
pub fn containment_report(
    check: &str,
    observed: &Observed,
    bounds: &BoundSet,
    policy: &SlackPolicy,
) -> Result<ValidationReport> {
    let (lower, upper) = bounds.aligned(&observed.z)?;
    let mut report = ValidationReport::default();
    for k in 0..observed.z.len() {
        let obs = observed.value[k];
        let (lo, up) = (lower[k], upper[k]);
        let inside = !(obs < lo) && !(obs > up);
        let (bound, side_slack) = if obs < lo {
            (lo, policy.ci_z * bounds.rel_stderr * lo)
        } else {
            (up, policy.ci_z * bounds.rel_stderr * up)
        };
        let slack = observed.slack[k] + side_slack.abs();
        let verdict = if inside {
            Verdict::Pass
        } else if (obs - bound).abs() <= slack {
            Verdict::Soft
        } else {
            Verdict::Hard
        };
        report.records.push(CheckRecord {
            check: check.into(),
            z: observed.z[k],
            observed: obs,
            lower: lo,
            upper: up,
            slack,
            verdict,
        });
    }
    Ok(report)
}

/// Checks each bound column of a tail report against the Wilson interval.
///
/// Upper bounds pass when `p̂ ≤ U` and are soft when `ci_lo ≤ U`; lower bounds
/// pass when `L ≤ p̂` and are soft when `L ≤ ci_hi`. Columns whose hypothesis
/// is not verified never produce hard failures.
pub fn tail_checks(report: &TailReport) -> ValidationReport {
    let mut out = ValidationReport::default();
    for col in &report.bounds {
        let check = format!("tail_{}_{}", report.side.name(), col.name);
        if !col.hypothesis_verified {
            out.note(format!(
                "{check}: hypothesis not verified; violations reported as soft"
            ));
        }
        for (k, &b) in col.values.iter().enumerate() {
            if !b.is_finite() {
                continue;
            }
            let e = report.empirical[k];
            let (pass, soft) = match col.kind {
                BoundKind::Upper => (e.p <= b, e.lo <= b),
                BoundKind::Lower => (b <= e.p, b <= e.hi),
            };
            let mut verdict = if pass {
                Verdict::Pass
            } else if soft {
                Verdict::Soft
            } else {
                Verdict::Hard
            };
            if verdict == Verdict::Hard && !col.hypothesis_verified {
                verdict = Verdict::Soft;
            }
            let (lower, upper) = match col.kind {
                BoundKind::Upper => (f64::NAN, b),
                BoundKind::Lower => (b, f64::NAN),
            };
            out.records.push(CheckRecord {
                check: check.clone(),
                z: report.z[k],
                observed: e.p,
                lower,
                upper,
                slack: 0.5 * (e.hi - e.lo),
                verdict,
            });
        }
    }
    out
}
