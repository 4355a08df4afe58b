//! End-to-end checks of the command-line interface: exit codes, artifact
//! layout and byte-for-byte determinism of repeated runs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_signorini"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary spawns")
}

const SMALL_RUN: &str = r#"
scenario = "flat-2d"
[grid]
m = 65
[solver]
omega = 1.9
[profile]
r_max = 0.4
rho = 0.9
count = 12
q = 180
[growth]
r_lo = 0.1
r_hi = 0.4
"#;

#[test]
fn list_shows_the_registry() {
    let out = run(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["tent-1d", "flat-2d", "curved-2d", "varcoef-2d", "flat-3d"] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn run_writes_artifacts_and_reports_success() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL_RUN).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for name in ["solution.bin", "solution.meta.txt", "profile.csv", "fits.csv", "report.txt"] {
        assert!(out_dir.join(name).exists(), "missing artifact {name}");
    }
    let profile = fs::read_to_string(out_dir.join("profile.csv")).unwrap();
    assert!(profile.starts_with("r,F,G,branch,Phi,d_r\n"));
    let fits = fs::read_to_string(out_dir.join("fits.csv")).unwrap();
    assert!(fits.starts_with("name,exponent,constant,residual,r_lo,r_hi\n"));
    let report = fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert!(report.contains("status: ok"), "{report}");
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL_RUN).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = run(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for name in ["solution.bin", "profile.csv", "fits.csv", "report.txt"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "artifact {name} differs between identical runs"
        );
    }
}

fn run_config_expecting(dir: &Path, text: &str, code: i32) {
    let cfg = dir.join("bad.toml");
    fs::write(&cfg, text).unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(code), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn configuration_problems_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    // Unknown scenario name.
    run_config_expecting(dir.path(), "scenario = \"no-such\"\n", 2);
    // Unknown key.
    run_config_expecting(dir.path(), "scenario = \"tent-1d\"\nbogus = 1\n", 2);
    // Invalid solver parameter.
    run_config_expecting(dir.path(), "scenario = \"tent-1d\"\n[solver]\nomega = 2.5\n", 2);
    // Missing file.
    let out = run(&["run", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_acceptance_tag_exits_with_code_two() {
    let out = run(&["accept", "--only=no-such-tag"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("known tags"), "{err}");
}

#[test]
fn tagged_acceptance_prints_one_line_per_criterion() {
    let out = run(&["accept", "--only=oracle"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.iter().any(|l| l.contains("[ 1] oracle-consistency") && l.contains("PASS")));
    assert!(lines.iter().any(|l| l.contains("[ 2] oracle-frequency") && l.contains("PASS")));
    assert!(lines.last().unwrap().contains("2 of 2 criteria passed"));
}
