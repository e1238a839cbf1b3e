//! End-to-end acceptance checks on the bundled configs. Prints one line per
//! criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mdens_core::gest::{linspace, GEstimate, Regression};
use mdens_core::harness::experiment::{estimate_g, run_experiment, Outcome};
use mdens_core::harness::oracle::{bivariate_max_density, normal_pdf};
use mdens_core::tails::{
    classic_bound, concentration_upper, fbm_quadratic_params, fbm_quadratic_upper, general_lb_iv,
    h_monotonicity_check, integrated_envelope_tails, thm42_lower,
};
use mdens_core::{ExperimentConfig, Side, Verdict};
use statrs::distribution::{ContinuousCDF, Normal};

const CONFIGS: [&str; 7] = [
    "gaussian_1d",
    "bivariate_max",
    "bivariate_max_corr",
    "fbm_sup",
    "fbm_quadratic",
    "fbm_quadratic_h05",
    "monotone_integral",
];

struct Run {
    outcome: Outcome,
    elapsed: Duration,
    dir: tempfile::TempDir,
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.cfg"))
}

fn load(name: &str, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_file(&config_path(name)).expect("bundled config loads");
    cfg.output.dir = out.to_path_buf();
    cfg
}

fn run(name: &str) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load(name, dir.path());
    let t = Instant::now();
    let outcome = run_experiment(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
    Run {
        outcome,
        elapsed: t.elapsed(),
        dir,
    }
}

/// Hard failures among records whose check id starts with `prefix`.
fn hard(o: &Outcome, prefix: &str) -> usize {
    let r = o.report.as_ref().unwrap();
    r.records
        .iter()
        .filter(|c| c.check.starts_with(prefix) && c.verdict == Verdict::Hard)
        .count()
}

fn count(o: &Outcome, prefix: &str) -> usize {
    o.report
        .as_ref()
        .unwrap()
        .records
        .iter()
        .filter(|c| c.check.starts_with(prefix))
        .count()
}

struct Verdicts(Vec<(usize, String, bool, String)>);

impl Verdicts {
    fn record(&mut self, id: usize, name: &str, parts: Vec<(bool, String)>) {
        let pass = parts.iter().all(|p| p.0);
        let detail = parts
            .iter()
            .map(|(ok, d)| format!("{}{d}", if *ok { "" } else { "FAILED " }))
            .collect::<Vec<_>>()
            .join("; ");
        println!(
            "criterion {id} [{name}]: {} ({detail})",
            if pass { "PASS" } else { "FAIL" }
        );
        self.0.push((id, name.into(), pass, detail));
    }
}

fn gaussian_exactness(runs: &BTreeMap<&str, Run>) -> Vec<(bool, String)> {
    let r = &runs["gaussian_1d"];
    let a = r.outcome.analysis.as_ref().unwrap();
    let d = &a.density;
    let mut sup = 0.0f64;
    let mut covered = (f64::INFINITY, f64::NEG_INFINITY);
    for (z, rho) in d.valid_points() {
        if (-3.0..=3.0).contains(&z) {
            sup = sup.max((rho - normal_pdf(z, 1.0)).abs());
            covered = (covered.0.min(z), covered.1.max(z));
        }
    }
    let full = covered.0 <= -3.0 + 1e-9 && covered.1 >= 3.0 - 1e-9;
    let est = &r.outcome.g.estimate;
    let gdev = (0..est.len())
        .filter(|&k| (-2.0..=2.0).contains(&est.z[k]))
        .map(|k| (est.ghat[k] - 1.0).abs())
        .fold(0.0, f64::max);
    let n = &a.normality;
    vec![
        (
            sup <= 0.02 && full,
            format!(
                "density sup-error {sup:.4} on [{:.2}, {:.2}] <= 0.02",
                covered.0, covered.1
            ),
        ),
        (
            gdev <= 0.05,
            format!("max |g-1| on [-2,2] {gdev:.4} <= 0.05"),
        ),
        (
            n.gauss_flag,
            format!("Var g = {:.2e} vs 3 stderr {:.2e}", n.var_g, 3.0 * n.stderr),
        ),
        (
            r.elapsed < Duration::from_secs(60),
            format!("runtime {:.1}s < 60s", r.elapsed.as_secs_f64()),
        ),
    ]
}

fn bivariate(runs: &BTreeMap<&str, Run>) -> Vec<(bool, String)> {
    let ind = runs["bivariate_max"].outcome.analysis.as_ref().unwrap();
    let sup = ind
        .density
        .valid_points()
        .map(|(z, rho)| (rho - bivariate_max_density(0.0, z)).abs())
        .fold(0.0, f64::max);
    let corr = &runs["bivariate_max_corr"].outcome;
    let s = corr.analysis.as_ref().unwrap().sigma.unwrap();
    let grid = &corr.g.estimate.z;
    vec![
        (
            sup <= 0.03,
            format!("K=I2 density sup-error {sup:.4} <= 0.03"),
        ),
        (
            s.min == 0.5 && s.max == 1.0,
            format!("envelope variances ({}, {})", s.min, s.max),
        ),
        (
            grid[0] == -2.5 && grid[grid.len() - 1] == 2.5 && hard(corr, "kde_envelope") == 0,
            format!(
                "KDE hard failures {} of {} on [-2.5, 2.5]",
                hard(corr, "kde_envelope"),
                count(corr, "kde_envelope")
            ),
        ),
        (
            hard(corr, "g_range") == 0,
            format!(
                "g outside [0.5, 1] by > 2 stderr at {} of {} points",
                hard(corr, "g_range"),
                count(corr, "g_range")
            ),
        ),
    ]
}

fn fbm_sup(runs: &BTreeMap<&str, Run>) -> Vec<(bool, String)> {
    let r = &runs["fbm_sup"];
    let o = &r.outcome;
    let s = o.analysis.as_ref().unwrap().sigma.unwrap();
    let (lo, hi) = (1.0f64, 2.0f64.powf(1.5));
    let tails = ["tail_right_integrated", "tail_left_integrated"];
    let tail_hard: usize = tails.iter().map(|t| hard(o, t)).sum();
    let tail_n: usize = tails.iter().map(|t| count(o, t)).sum();
    let tz = &o.analysis.as_ref().unwrap().tails_right.z;
    vec![
        (
            (s.min - lo).abs() < 1e-12 && (s.max - hi).abs() < 1e-12,
            format!("envelope variances ({:.4}, {:.4})", s.min, s.max),
        ),
        (
            hard(o, "kde_envelope") == 0,
            format!(
                "KDE hard failures {} of {}",
                hard(o, "kde_envelope"),
                count(o, "kde_envelope")
            ),
        ),
        (
            tail_hard == 0 && tz[0] == 0.25 && tz[tz.len() - 1] == 2.5,
            format!("integrated-tail hard failures {tail_hard} of {tail_n} on [0.25, 2.5]"),
        ),
        (
            r.elapsed < Duration::from_secs(300),
            format!("runtime {:.1}s < 300s", r.elapsed.as_secs_f64()),
        ),
    ]
}

fn fbm_quadratic(runs: &BTreeMap<&str, Run>) -> Vec<(bool, String)> {
    let mut parts = Vec::new();
    for name in ["fbm_quadratic_h05", "fbm_quadratic"] {
        let o = &runs[name].outcome;
        let a = o.analysis.as_ref().unwrap();
        let q = a.tail_params.fbm_quadratic.unwrap();
        let col = a.tails_right.column("concentration_upper").unwrap();
        let display_match = a.tails_right.z.iter().zip(&col.values).all(|(&z, &u)| {
            (u - (-q.c_h * q.c_h * z * z / (2.0 * q.c_h * z + 1.0)).exp()).abs() < 1e-14
        });
        let w = a.pathwise.unwrap();
        parts.push((
            display_match && hard(o, "tail_right_concentration_upper") == 0,
            format!(
                "H={}: upper-bound hard failures {}",
                q.hurst,
                hard(o, "tail_right_concentration_upper")
            ),
        ));
        parts.push((
            hard(o, "tail_right_fbm_quadratic_lower") == 0,
            format!(
                "H={}: lower-bound hard failures {}",
                q.hurst,
                hard(o, "tail_right_fbm_quadratic_lower")
            ),
        ));
        parts.push((
            w.check.violations == 0,
            format!(
                "H={}: pathwise violations {} of {}",
                q.hurst, w.check.violations, w.check.draws
            ),
        ));
    }
    parts
}

fn identities(runs: &BTreeMap<&str, Run>) -> Vec<(bool, String)> {
    let mut parts = Vec::new();
    for name in [
        "bivariate_max",
        "fbm_sup",
        "monotone_integral",
        "fbm_quadratic",
        "fbm_quadratic_h05",
    ] {
        let o = &runs[name].outcome;
        let a = o.analysis.as_ref().unwrap();
        let id = a.identity;
        let ki = &a.key_identity;
        let c = o.prepared.spec.centering;
        let se = (ki.phi0_stderr.powi(2) + (0.5 * c.abs_mean_stderr).powi(2)).sqrt();
        let phi_dev = (ki.phi0 - 0.5 * c.abs_mean).abs() / se;
        let ok = id.deviation() <= 3.0 && ki.relative_sup() <= 0.05 && phi_dev <= 3.0;
        parts.push((
            ok,
            format!(
                "{name}: identity {:.2} se, key residual {:.4} phi(0), phi(0) {:.2} se",
                id.deviation(),
                ki.relative_sup(),
                phi_dev
            ),
        ));
    }
    parts
}

fn bound_algebra() -> Vec<(bool, String)> {
    let zs = linspace(0.05, 8.0, 160);
    let mut worst = 0.0f64;
    for s2 in [0.25, 1.0, 2.0, 7.5] {
        for &z in &zs {
            let a = concentration_upper(0.0, s2, z).unwrap();
            let b = classic_bound(s2, z, Side::Right).unwrap();
            worst = worst.max((a - b).abs() / b.max(f64::MIN_POSITIVE));
        }
    }
    let mut worst_q = 0.0f64;
    for h in [0.1, 0.3, 0.5, 0.75, 0.9] {
        for t in [0.5, 1.0, 2.0, 3.0] {
            let p = fbm_quadratic_params(h, t).unwrap();
            for &z in &zs {
                let a = concentration_upper(p.alpha, p.beta, z).unwrap();
                let b = fbm_quadratic_upper(h, t, z).unwrap();
                worst_q = worst_q.max((a - b).abs() / b.max(f64::MIN_POSITIVE));
            }
        }
    }
    let mut ordered = true;
    let mut sets = 0;
    for (smin, smax) in [
        (0.5, 1.0),
        (1.0, 2.0f64.powf(1.5)),
        (1.0, 1.0),
        (0.1, 3.0),
        (2.0, 2.5),
    ] {
        for a in [0.2, 0.5, 0.8, 1.5] {
            for &z in &zs {
                let (lo, up) = integrated_envelope_tails(smin, smax, a, z).unwrap();
                ordered &= lo <= up;
                sets += 1;
            }
        }
    }
    vec![
        (
            worst <= 4.0 * f64::EPSILON,
            format!("alpha=0 vs classic max rel diff {worst:.1e}"),
        ),
        (
            worst_q <= 1e-12,
            format!("quadratic params vs closed form max rel diff {worst_q:.1e}"),
        ),
        (
            ordered,
            format!("integrated lower <= upper on {sets} cases"),
        ),
    ]
}

fn thm42(runs: &BTreeMap<&str, Run>) -> Vec<(bool, String)> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let abs_mean = (2.0 / std::f64::consts::PI).sqrt();
    let a = runs["gaussian_1d"].outcome.analysis.as_ref().unwrap();
    let h = h_monotonicity_check(&a.density, 2.0, 2.0).unwrap();
    let below = linspace(2.0, 4.0, 41)
        .iter()
        .all(|&z| thm42_lower(1.0, abs_mean, 2.0, 2.0, z).unwrap() <= normal.sf(z));
    let grid = linspace(-10.0, 10.0, 2001);
    let n = grid.len();
    let unit = GEstimate {
        z: grid,
        ghat: vec![1.0; n],
        stderr: vec![0.0; n],
        count: vec![1e6; n],
        flagged: vec![false; n],
        clamped: vec![false; n],
        bandwidth: 0.1,
        floor: 1e-6,
        method: Regression::NadarayaWatson,
    };
    let iv = general_lb_iv(&unit, 1.0, abs_mean, 1.0).unwrap().value;
    vec![
        (
            h.pass,
            format!(
                "h-monotonicity on estimated density: {} violations in {} steps",
                h.violations.len(),
                h.checked
            ),
        ),
        (below, "branch (ii) bound <= N(0,1) tail on [2, 4]".into()),
        (
            (iv - 0.0923).abs() <= 1e-3 && iv <= normal.sf(1.0),
            format!(
                "inequality (iv) at z=1: {iv:.5} vs 0.0923, tail {:.5}",
                normal.sf(1.0)
            ),
        ),
    ]
}

fn reproducibility(runs: &BTreeMap<&str, Run>) -> Vec<(bool, String)> {
    let mut parts = Vec::new();
    for name in CONFIGS {
        let first = &runs[name];
        let again = run(name);
        let mut differing = Vec::new();
        for e in std::fs::read_dir(first.dir.path()).unwrap() {
            let file = e.unwrap().file_name();
            let x = std::fs::read(first.dir.path().join(&file)).unwrap();
            let y = std::fs::read(again.dir.path().join(&file)).unwrap_or_default();
            if x != y {
                differing.push(file.to_string_lossy().into_owned());
            }
        }
        parts.push((
            differing.is_empty(),
            format!("{name}: rerun differs in {differing:?}"),
        ));

        // doubling: same seed and centering, so the first n draws are shared;
        // same grid and bandwidth, so both runs estimate the same smoothed g
        let base = &first.outcome.g.estimate;
        let mut p = first.outcome.prepared.clone();
        p.config.mc.samples *= 2;
        p.config.grid.lo = Some(base.z[0]);
        p.config.grid.hi = Some(base.z[base.len() - 1]);
        p.config.grid.points = base.len();
        p.config.mc.bandwidth = Some(base.bandwidth);
        let doubled = estimate_g(&p).unwrap().estimate;
        let mut compared = 0;
        let mut worst = 0.0f64;
        let mut outside = 0;
        for k in 0..base.len() {
            if base.flagged[k] || doubled.flagged[k] {
                continue;
            }
            compared += 1;
            let dev = (doubled.ghat[k] - base.ghat[k]).abs() / base.stderr[k];
            worst = worst.max(dev);
            if dev >= 2.0 {
                outside += 1;
            }
        }
        parts.push((
            outside == 0,
            format!("{name}: doubling moves g by >= 2 stderr at {outside} of {compared} points (max {worst:.2})"),
        ));
    }
    parts
}

fn main() -> ExitCode {
    let t = Instant::now();
    let runs: BTreeMap<&str, Run> = CONFIGS.iter().map(|&c| (c, run(c))).collect();
    let mut v = Verdicts(Vec::new());
    v.record(1, "gaussian exactness", gaussian_exactness(&runs));
    v.record(2, "bivariate max oracle", bivariate(&runs));
    v.record(3, "fbm supremum", fbm_sup(&runs));
    v.record(4, "fbm quadratic", fbm_quadratic(&runs));
    v.record(5, "identity suite", identities(&runs));
    v.record(6, "bound algebra", bound_algebra());
    v.record(7, "threshold lower bounds", thm42(&runs));
    v.record(8, "reproducibility", reproducibility(&runs));
    let failed: Vec<usize> = v.0.iter().filter(|c| !c.2).map(|c| c.0).collect();
    println!(
        "acceptance: {} of {} criteria pass ({:.1}s)",
        v.0.len() - failed.len(),
        v.0.len(),
        t.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
