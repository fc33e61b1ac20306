use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mixcascade::{build_mixed, GeneratorF64, MixedMeasureF64, ResourceLimits, TrialStream};
use tempfile::TempDir;

const SMALL: &str = r#"
[run]
chi_list = [0.0, 1.0]
j_max = 5
trials = 4
master_seed = 11

[histogram]
j_list = [3, 4, 5]
trials = 2

[clt]
j_list = [2, 3, 4]
trials = 8
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixcascade"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, text: &str) -> String {
    let path = dir.path().join("exp.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

/// Data rows of a CSV, skipping the provenance and header lines.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "svg" || e == "bin"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn spectrum_reports_critical_exponent() {
    let out = TempDir::new().unwrap();
    let o = run(out.path(), &["spectrum", "--seed", "1", "--reproducible"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out.path().join("spectrum_chi1_exponents.csv"));
    let p_plus: f64 = r[0][2].parse().unwrap();
    assert_eq!(format!("{p_plus:.6}"), "4.472136");
    assert!(String::from_utf8_lossy(&o.stdout).contains("p_plus=4.472136"));
    assert!(out.path().join("legendre.svg").exists() && out.path().join("besov.svg").exists());
}

#[test]
fn fit_counting_row_is_exact() {
    let out = TempDir::new().unwrap();
    let cfg = TempDir::new().unwrap();
    let config = write_config(&cfg, "[run]\nchi_list = [0.0]\ntrials = 3\n");
    let o = run(out.path(), &["fit", "--config", &config, "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.path().join("fit_chi0.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_sha256="));
    assert_eq!(lines.next().unwrap(), "p,tau_hat_mean,tau_hat_rms,stderr,trials,j_min,j_max,chi,family");
    // p = 0 counts cells: log2 S grows by exactly one per level
    assert_eq!(lines.next().unwrap(), "0,-1,0,0,3,0,6,0,lognormal");
    let p1 = rows(&out.path().join("fit_chi0.csv")).into_iter().find(|r| r[0] == "1").unwrap();
    assert_eq!(p1[1], "0");
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = TempDir::new().unwrap();
    let config = write_config(&cfg, SMALL);
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for cmd in ["simulate", "fit", "histogram", "clt", "report"] {
        for dir in [&a, &b] {
            let o = run(dir.path(), &[cmd, "--config", &config, "--reproducible"]);
            assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    let sa = snapshot(a.path());
    assert!(sa.len() > 20);
    assert_eq!(sa, snapshot(b.path()));
}

#[test]
fn worker_count_does_not_change_outputs() {
    let cfg = TempDir::new().unwrap();
    let config = write_config(&cfg, SMALL);
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for cmd in ["fit", "histogram", "clt"] {
        assert!(run(a.path(), &[cmd, "--config", &config, "--workers", "1", "--reproducible"]).status.success());
        assert!(run(b.path(), &[cmd, "--config", &config, "--workers", "3", "--reproducible"]).status.success());
    }
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
}

#[test]
fn plots_carry_timestamp_unless_reproducible() {
    let out = TempDir::new().unwrap();
    assert!(run(out.path(), &["spectrum", "--seed", "1"]).status.success());
    assert!(fs::read_to_string(out.path().join("besov.svg")).unwrap().contains("generated at unix time"));
    assert!(run(out.path(), &["spectrum", "--seed", "1", "--reproducible"]).status.success());
    assert!(!fs::read_to_string(out.path().join("besov.svg")).unwrap().contains("generated"));
}

#[test]
fn simulate_dump_matches_direct_build() {
    let out = TempDir::new().unwrap();
    let cfg = TempDir::new().unwrap();
    let config = write_config(&cfg, "[run]\nchi_list = [0.5]\nj_max = 4\ndelta_levels = 2\nmaster_seed = 3\n");
    assert!(run(out.path(), &["simulate", "--config", &config]).status.success());
    let bytes = fs::read(out.path().join("measure_chi0.5_trial0.bin")).unwrap();
    let loaded = MixedMeasureF64::read_dump(&bytes[..], &ResourceLimits::default()).unwrap();
    let g = GeneratorF64::log_normal(0.2).unwrap();
    let direct: MixedMeasureF64 =
        build_mixed(&g, 10, 4, 0.5, 2, TrialStream::new(3, 0), &ResourceLimits::default()).unwrap();
    assert_eq!(loaded.pool_size(), 4);
    assert_eq!(loaded.delta_levels(), 2);
    for (x, y) in loaded.pool().iter().zip(direct.pool()) {
        assert_eq!(x.masses(), y.masses());
    }
    let manifest = rows(&out.path().join("simulate.csv"));
    assert_eq!(manifest[0][..7], ["measure_chi0.5_trial0.bin", "0.5", "0", "10", "6", "2", "4"]);
}

#[test]
fn config_errors_exit_2() {
    let out = TempDir::new().unwrap();
    let cfg = TempDir::new().unwrap();
    let o = run(out.path(), &["fit"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    let config = write_config(&cfg, "[run]\nmaster_seed = 1\ntrails = 4\n");
    let o = run(out.path(), &["fit", "--config", &config]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("trails") && err.contains("line 3"), "{err}");

    let o = run(out.path(), &["fit", "--seed", "1", "--profile", "huge"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_builds_exit_3_before_writing() {
    let out = TempDir::new().unwrap();
    let cfg = TempDir::new().unwrap();
    let config = write_config(&cfg, "[run]\nmaster_seed = 1\nj_max = 20\ndelta_levels = 20\n");
    for cmd in ["simulate", "fit"] {
        let o = run(out.path(), &[cmd, "--config", &config]);
        assert_eq!(o.status.code(), Some(3), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(snapshot(out.path()).is_empty());
}
