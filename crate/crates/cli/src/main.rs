use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mdens_core::gest::linspace;
use mdens_core::harness::config::Format;
use mdens_core::harness::experiment::{run_until, write_outcome, Outcome, Stage};
use mdens_core::harness::io::{write_columns, write_json, Column};
use mdens_core::harness::oracle::{bivariate_max_curves, gaussian_curves, OracleCurves};
use mdens_core::ExperimentConfig;

/// Monte Carlo densities and tail bounds for functionals of Gaussian processes.
#[derive(Debug, Parser)]
#[command(name = "mdens", version)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `mc.samples`.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; overrides `output.format`.
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw the Mehler integrand and regress g.
    Gfun,
    /// Estimate the density from g.
    Density,
    /// Density envelopes and the KDE reference.
    Bounds,
    /// Empirical tails against every applicable bound.
    Tails,
    /// Full pipeline with a validation report.
    Validate,
    /// Analytic reference curves.
    Oracle {
        #[arg(long, value_enum, default_value = "gaussian")]
        kind: OracleKind,
        /// Variance of the Gaussian case.
        #[arg(long, default_value_t = 1.0)]
        variance: f64,
        /// Correlation of the bivariate-max case.
        #[arg(long, default_value_t = 0.0)]
        corr: f64,
        #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 161)]
        points: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleKind {
    Gaussian,
    BivariateMax,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_deref()
        .context("--config is required for this subcommand")?;
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Some(n) = cli.samples {
        cfg.mc.samples = n;
        cfg.mc.centering_samples = cfg.mc.centering_samples.map(|c| c.min(n));
    }
    if let Some(out) = &cli.out {
        // relative to the working directory, not the config file
        cfg.output.dir = std::env::current_dir()?.join(out);
    }
    if let Some(f) = cli.format {
        cfg.output.format = f.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Prints the run summary; a closed stdout (e.g. piped into `head`) is not an error.
fn report(o: &Outcome, dir: &Path) {
    let mut out = std::io::stdout().lock();
    let s = &o.g.samples;
    let e = &o.g.estimate;
    let _ = writeln!(
        out,
        "{}: {} draws, {} grid points ({} flagged), bandwidth {:.4}",
        s.functional,
        s.count(),
        e.len(),
        e.flagged_count(),
        e.bandwidth
    );
    if let Some(a) = &o.analysis {
        let _ = writeln!(
            out,
            "density: mass {:.4}, rho(0) {:.4}, key identity sup {:.2e}",
            a.density.mass, a.density.rho_at_zero, a.key_identity.sup_abs
        );
    }
    if let Some(r) = &o.report {
        for c in r.summary() {
            let _ = writeln!(
                out,
                "  {:<40} points {:>5}  soft {:>4}  hard {:>4}",
                c.check, c.points, c.soft, c.hard
            );
        }
        for n in &r.notes {
            let _ = writeln!(out, "  note: {n}");
        }
        let _ = writeln!(
            out,
            "validation: {} ({} hard, {} soft)",
            if r.aggregate_pass() { "PASS" } else { "FAIL" },
            r.hard_failures(),
            r.soft_notes()
        );
    }
    let _ = writeln!(out, "artifacts in {}", dir.display());
}

fn oracle(
    cli: &Cli,
    kind: OracleKind,
    variance: f64,
    corr: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<()> {
    if points < 2 || lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        bail!("oracle grid needs at least two points on lo < hi");
    }
    let grid = linspace(lo, hi, points);
    let curves: OracleCurves = match kind {
        OracleKind::Gaussian => gaussian_curves(variance, &grid)?,
        OracleKind::BivariateMax => bivariate_max_curves(corr, &grid)?,
    };
    let format = cli.format.map(Format::from).unwrap_or_default();
    let cols = [
        ("z", Column::Real(&curves.z)),
        ("density", Column::Real(&curves.density)),
        ("g", Column::Real(&curves.g)),
        ("tail", Column::Real(&curves.tail)),
    ];
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            match format {
                Format::Csv => write_columns(&dir.join("oracle.csv"), &cols)?,
                Format::Json => write_json(&dir.join("oracle.json"), &curves)?,
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            match format {
                Format::Csv => {
                    writeln!(out, "z,density,g,tail")?;
                    for k in 0..grid.len() {
                        writeln!(
                            out,
                            "{},{},{},{}",
                            curves.z[k], curves.density[k], curves.g[k], curves.tail[k]
                        )?;
                    }
                }
                Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&curves)?)?,
            }
        }
    }
    eprintln!(
        "E|Z| = {:.10}, Var Z = {:.10}",
        curves.abs_mean, curves.variance
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    let stage = match &cli.command {
        Command::Gfun => Stage::G,
        Command::Density => Stage::Density,
        Command::Bounds => Stage::Bounds,
        Command::Tails => Stage::Tails,
        Command::Validate => Stage::Validate,
        Command::Oracle {
            kind,
            variance,
            corr,
            lo,
            hi,
            points,
        } => {
            oracle(cli, *kind, *variance, *corr, *lo, *hi, *points)?;
            return Ok(true);
        }
    };
    let cfg = load_config(cli)?;
    let outcome = run_until(&cfg, stage)?;
    let dir = cfg.output_dir();
    write_outcome(&outcome, &dir, cfg.output.format, stage)?;
    report(&outcome, &dir);
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
