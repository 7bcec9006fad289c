//! End-to-end tests of the command-line interface: flag handling, report
//! files, and the exit-code contract (0 success, 2 band failure, 1 error).

use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llstar-cli"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn temp_path(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("llstar-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn study_writes_reports_and_exits_zero() {
    let out = temp_path("ii_p0.csv");
    let result = run(&[
        "study",
        "--case",
        "ii",
        "--p",
        "0",
        "--levels",
        "1..3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0));
    let stdout = String::from_utf8(result.stdout).unwrap();
    assert!(stdout.contains("summary:"), "stdout was: {stdout}");

    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "level,h,ndof,err_u,err_sigma,err_lambda_h1,rate_u,rate_sigma,rate_lambda_h1"
    );
    assert_eq!(lines.len(), 4);
    // 16 significant digits: the level-1 mesh size is exactly 0.5.
    assert_eq!(lines[1].split(',').nth(1).unwrap(), "5.000000000000000e-1");

    let json = std::fs::read_to_string(out.with_extension("json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["case"], "case_ii");
    assert_eq!(v["p"], 0);
    assert_eq!(v["levels"][0], 1);
    assert_eq!(v["levels"][1], 3);
    assert_eq!(v["pass"], true);
}

#[test]
fn quad_degree_override_is_accepted() {
    let out = temp_path("quad.csv");
    let result = run(&[
        "study",
        "--case",
        "ii",
        "--p",
        "0",
        "--levels",
        "1..3",
        "--out",
        out.to_str().unwrap(),
        "--quad-degree",
        "8",
    ]);
    assert_eq!(result.status.code(), Some(0));
}

#[test]
fn unconfirmable_band_exits_two() {
    // A single level yields no observed rate, so a case with an expected
    // band cannot pass.
    let out = temp_path("single.csv");
    let result = run(&[
        "study",
        "--case",
        "i",
        "--p",
        "1",
        "--levels",
        "1..1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn unknown_case_exits_one() {
    let out = temp_path("bad_case.csv");
    let result = run(&[
        "study",
        "--case",
        "nope",
        "--p",
        "0",
        "--levels",
        "1..2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(1));
    let stderr = String::from_utf8(result.stderr).unwrap();
    assert!(stderr.contains("unknown case"), "stderr was: {stderr}");
}

#[test]
fn malformed_level_range_exits_one() {
    let out = temp_path("bad_range.csv");
    for range in ["nope", "3", "2..x", "5..2"] {
        let result = run(&[
            "study",
            "--case",
            "i",
            "--p",
            "0",
            "--levels",
            range,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(result.status.code(), Some(1), "range `{range}`");
    }
}

#[test]
fn missing_required_flag_exits_one() {
    let result = run(&["study", "--case", "i", "--p", "0", "--levels", "1..2"]);
    assert_eq!(result.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_exits_one() {
    let result = run(&["bogus"]);
    assert_eq!(result.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let result = run(&["--help"]);
    assert_eq!(result.status.code(), Some(0));
}

#[test]
fn verify_prints_a_line_per_check_and_exits_zero() {
    let result = run(&["verify"]);
    assert_eq!(result.status.code(), Some(0));
    let stdout = String::from_utf8(result.stdout).unwrap();
    let pass_lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with("PASS ")).collect();
    assert_eq!(pass_lines.len(), 8, "stdout was: {stdout}");
    assert!(stdout.contains("all 8 checks passed"));
    for name in [
        "mesh_counts_and_euler",
        "quadrature_exactness",
        "basis_duality_and_partition_of_unity",
        "hdiv_normal_continuity",
        "stiffness_symmetry_and_spd",
        "algebraic_residual",
        "galerkin_orthogonality",
        "two_quadrature_agreement",
    ] {
        assert!(stdout.contains(name), "missing check `{name}`");
    }
}
