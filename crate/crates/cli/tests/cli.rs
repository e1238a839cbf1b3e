use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mdens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdens"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

const QUADRATIC: &str = r#"
[model]
type = "fbm"
hurst = 0.5
start = 0.0
end = 1.0
points = 64

[functional]
kind = "fbm_quadratic"

[mc]
samples = 20000
seed = 4
bandwidth = 0.5
"#;

#[test]
fn oracle_prints_csv() {
    let out = mdens(&[
        "oracle",
        "--kind",
        "bivariate-max",
        "--corr",
        "0.5",
        "--lo",
        "-2",
        "--hi",
        "2",
        "--points",
        "5",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "z,density,g,tail");
    assert_eq!(lines.len(), 6);
    let mid: Vec<f64> = lines[3].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(mid[0], 0.0);
    assert!(mid[2] > 0.5 && mid[2] < 1.0);
}

#[test]
fn oracle_json_to_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdens(&[
        "oracle",
        "--format",
        "json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("oracle.json")).unwrap();
    assert!(text.contains("\"abs_mean\""));
}

#[test]
fn validate_gaussian_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdens(&[
        "validate",
        "--config",
        &config("gaussian_1d.cfg"),
        "--samples",
        "50000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("validation: PASS"));
    for f in [
        "g_samples.csv",
        "g_estimate.csv",
        "density.csv",
        "envelope.csv",
        "kde.csv",
        "tails_right.csv",
        "tails_left.csv",
        "key_identity.csv",
        "validation.csv",
        "summary.json",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let header = std::fs::read_to_string(dir.path().join("g_estimate.csv")).unwrap();
    assert!(header.starts_with("z,ghat,stderr,count,flagged,clamped\n"));
}

#[test]
fn gfun_writes_only_g_artifacts_in_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdens(&[
        "gfun",
        "--config",
        &config("bivariate_max.cfg"),
        "--samples",
        "5000",
        "--seed",
        "3",
        "--format",
        "json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("g_estimate.json").is_file());
    assert!(!dir.path().join("density.json").exists());
    let summary = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 3"));
}

#[test]
fn hard_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("q.cfg");
    std::fs::write(&cfg, QUADRATIC).unwrap();
    let out = mdens(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("validation: FAIL"));
}

#[test]
fn missing_matrix_file_is_an_error_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.cfg");
    std::fs::write(
        &cfg,
        "[model]\ntype = \"matrix\"\npath = \"absent.csv\"\n[functional]\nkind = \"vector_max\"\n[mc]\nsamples = 1000\nseed = 1\n",
    )
    .unwrap();
    let out = mdens(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(mdens(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mdens(&["validate"]).status.code(), Some(1));
    assert_eq!(
        mdens(&[
            "validate",
            "--config",
            &config("gaussian_1d.cfg"),
            "--samples",
            "10"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(mdens(&["--help"]).status.code(), Some(0));
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = mdens(&[
            "tails",
            "--config",
            &config("bivariate_max_corr.cfg"),
            "--samples",
            "20000",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for f in [
        "g_samples.csv",
        "density.csv",
        "tails_right.csv",
        "summary.json",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}
