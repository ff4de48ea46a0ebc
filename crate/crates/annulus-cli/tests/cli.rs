//! End-to-end tests of the `annulus-min` binary: every subcommand is run as a
//! subprocess and its stdout must re-parse under the published report schema.
//! Exit codes follow the contract 0 = success, 1 = numerical failure (with a
//! partial report), 2 = configuration error.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use annulus_core::report::{
    AdmissibilityCliReport, DiagnoseReport, ExploreReport, MinimizeReport, NitscheRadiusReport,
    RadialReport,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_annulus-min"))
}

fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    bin().args(args).output().expect("binary should spawn")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout should be UTF-8")
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr should be UTF-8")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "unexpected exit status; stderr:\n{}",
        stderr_str(out)
    );
}

#[test]
fn help_lists_all_subcommands() {
    let out = run(["--help"]);
    assert_exit(&out, 0);
    let text = stdout_str(&out);
    for sub in [
        "radial",
        "nitsche-radius",
        "minimize",
        "diagnose",
        "admissibility",
        "explore",
        "run",
    ] {
        assert!(text.contains(sub), "--help does not mention '{sub}'");
    }
    assert!(text.contains("ANNULUS_MIN_THREADS"));

    let out = run(["--version"]);
    assert_exit(&out, 0);
    assert!(stdout_str(&out).contains("annulus-min"));
}

#[test]
fn nitsche_radius_prints_critical_values() {
    let out = run(["nitsche-radius", "--metric", "euclidean", "--R", "0.6"]);
    assert_exit(&out, 0);
    let report: NitscheRadiusReport =
        serde_json::from_str(&stdout_str(&out)).expect("stdout should parse as the report schema");
    assert!((report.r_diamond - 1.0 / 3.0).abs() < 1e-8);
    assert!((report.gamma_diamond - (-0.36)).abs() < 1e-8);
}

#[test]
fn minimize_dump_and_diagnose_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let map_path = dir.path().join("map.csv");

    let out = run([
        "minimize",
        "--X-inner",
        "0.5",
        "--Y-inner",
        "0.6",
        "--nr",
        "48",
        "--nt",
        "96",
        "--out",
        out_path.to_str().unwrap(),
        "--dump-map",
        map_path.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let body = stdout_str(&out);
    let report: MinimizeReport =
        serde_json::from_str(&body).expect("stdout should parse as the report schema");
    assert!(report.converged);
    let exact = 4.0 * PI / 3.0;
    assert!(
        (report.energy.energy - exact).abs() < 0.005 * exact,
        "energy {} vs {}",
        report.energy.energy,
        exact
    );

    // The --out file wraps the same body in a timestamped envelope.
    let envelope: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(envelope["generated_at"].as_u64().unwrap() > 0);
    let stdout_value: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(envelope["report"], stdout_value);

    // Diagnosing the dumped map recovers the structural constants.
    let out = run([
        "diagnose",
        "--map",
        map_path.to_str().unwrap(),
        "--metric",
        "euclidean",
    ]);
    assert_exit(&out, 0);
    let diag: DiagnoseReport =
        serde_json::from_str(&stdout_str(&out)).expect("stdout should parse as the report schema");
    assert!(
        (diag.hopf.c.re - (-0.0622222)).abs() < 2e-3,
        "c = {:?}",
        diag.hopf.c
    );
    assert!(diag.hopf.c.im.abs() < 1e-5);
    assert!(diag.qc.worst_slack > 0.0);
    assert!(diag.holder_inner.exponent >= 0.9);
    assert!(diag.holder_outer.exponent >= 0.9);
}

#[test]
fn run_config_file_matches_flag_invocation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        r#"{"command":"minimize","X_inner":0.5,"Y_inner":0.6,"nr":16,"nt":32,"tol":1e-6}"#,
    )
    .unwrap();

    let from_file = run(["run", cfg_path.to_str().unwrap()]);
    let from_flags = run([
        "minimize",
        "--X-inner",
        "0.5",
        "--Y-inner",
        "0.6",
        "--nr",
        "16",
        "--nt",
        "32",
        "--tol",
        "1e-6",
    ]);
    assert_exit(&from_file, 0);
    assert_exit(&from_flags, 0);
    assert_eq!(
        stdout_str(&from_file),
        stdout_str(&from_flags),
        "config-file and flag invocations should emit byte-identical reports"
    );
}

#[test]
fn identical_runs_are_byte_identical_across_thread_counts() {
    let args = [
        "minimize",
        "--X-inner",
        "0.5",
        "--Y-inner",
        "0.6",
        "--nr",
        "16",
        "--nt",
        "32",
        "--tol",
        "1e-6",
        "--seed",
        "7",
    ];
    let reference = run(args);
    assert_exit(&reference, 0);
    for threads in ["1", "2", "8"] {
        let out = bin()
            .args(args)
            .env("ANNULUS_MIN_THREADS", threads)
            .output()
            .unwrap();
        assert_exit(&out, 0);
        assert_eq!(
            stdout_str(&out),
            stdout_str(&reference),
            "report differs under {threads} worker threads"
        );
    }
}

#[test]
fn config_errors_exit_2_with_field_diagnostics() {
    let dir = tempfile::tempdir().unwrap();

    let write_cfg = |name: &str, text: &str| -> String {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };

    // Misspelled key: rejected, naming the field.
    let p = write_cfg(
        "typo.json",
        r#"{"command":"minimize","X_inner":0.5,"Y_inner":0.6,"metrik":"euclidean"}"#,
    );
    let out = run(["run", &p]);
    assert_exit(&out, 2);
    assert!(stderr_str(&out).contains("metrik"));

    // Out-of-range value, via file and via flags.
    let p = write_cfg("range.json", r#"{"command":"nitsche-radius","R":1.5}"#);
    let out = run(["run", &p]);
    assert_exit(&out, 2);
    assert!(stderr_str(&out).contains("R must lie in (0,1)"));
    let out = run(["nitsche-radius", "--R", "1.5"]);
    assert_exit(&out, 2);
    assert!(stderr_str(&out).contains("R must lie in (0,1)"));

    // Missing required flag: clap's native usage error also exits 2.
    let out = run(["minimize", "--X-inner", "0.5"]);
    assert_exit(&out, 2);

    // gamma and r_target are mutually exclusive, and one is required.
    let out = run(["radial", "--R", "0.6", "--gamma", "-0.2", "--r-target", "0.5"]);
    assert_exit(&out, 2);
    assert!(stderr_str(&out).contains("mutually exclusive"));
    let out = run(["radial", "--R", "0.6"]);
    assert_exit(&out, 2);

    // Flags that belong to a different command are rejected by name.
    let p = write_cfg(
        "foreign.json",
        r#"{"command":"nitsche-radius","R":0.6,"nr":32}"#,
    );
    let out = run(["run", &p]);
    assert_exit(&out, 2);
    assert!(stderr_str(&out).contains("nr"));

    // Broken inline metric JSON.
    let out = run([
        "admissibility",
        "--inner",
        "0.3",
        "--outer",
        "0.9",
        "--metric",
        r#"{"kind""#,
    ]);
    assert_exit(&out, 2);
}

#[test]
fn radial_reports_family_member_and_dumps_q_table() {
    let dir = tempfile::tempdir().unwrap();
    let q_path = dir.path().join("q.csv");
    let out = run([
        "radial",
        "--R",
        "0.6",
        "--gamma",
        "-0.2",
        "--dump-q",
        q_path.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let report: RadialReport =
        serde_json::from_str(&stdout_str(&out)).expect("stdout should parse as the report schema");
    assert_eq!(report.gamma, -0.2);
    assert!((report.gamma_diamond - (-0.36)).abs() < 1e-8);
    assert!(report.r_gamma > report.r_diamond && report.r_gamma < 1.0);
    assert_eq!(report.q_table_checksum.len(), 16);

    let table = std::fs::read_to_string(&q_path).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("s,q"));
    assert!(lines.clone().count() >= 2048, "q table should be dense");
    for line in lines {
        let (s, q) = line.split_once(',').expect("two columns per row");
        let s: f64 = s.parse().unwrap();
        let q: f64 = q.parse().unwrap();
        assert!((0.6..=1.0).contains(&s) && (0.0..=1.0).contains(&q));
    }
}

#[test]
fn admissibility_audits_metrics_over_annuli() {
    // Away from the unit circle the restricted hyperbolic metric passes and
    // sup |grad log rho| equals 4s/(1-s^2) at s = 0.9.
    let out = run([
        "admissibility",
        "--inner",
        "0.3",
        "--outer",
        "0.9",
        "--metric",
        "hyperbolic-restricted",
    ]);
    assert_exit(&out, 0);
    let report: AdmissibilityCliReport =
        serde_json::from_str(&stdout_str(&out)).expect("stdout should parse as the report schema");
    assert!(report.admissibility.admissible);
    let sup = report.admissibility.grad_log_sup.unwrap();
    assert!((sup - 3.6 / 0.19).abs() < 1e-6, "grad_log_sup = {sup}");

    // Touching the unit circle the density blows up: reported, not fatal.
    let out = run([
        "admissibility",
        "--inner",
        "0.3",
        "--outer",
        "1.0",
        "--metric",
        "hyperbolic-restricted",
    ]);
    assert_exit(&out, 0);
    let report: AdmissibilityCliReport = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!(!report.admissibility.admissible);
    assert!(report.admissibility.grad_log_sup.is_none());
}

#[test]
fn metric_specs_accept_inline_json_and_files() {
    let by_name = run(["admissibility", "--inner", "0.5", "--outer", "1.0", "--metric", "spherical"]);
    assert_exit(&by_name, 0);

    let inline = run([
        "admissibility",
        "--inner",
        "0.5",
        "--outer",
        "1.0",
        "--metric",
        r#"{"kind":"spherical"}"#,
    ]);
    assert_exit(&inline, 0);
    assert_eq!(stdout_str(&by_name), stdout_str(&inline));

    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("metric.json");
    std::fs::write(&spec_path, r#"{"kind":"spherical"}"#).unwrap();
    let from_file = run([
        "admissibility",
        "--inner",
        "0.5",
        "--outer",
        "1.0",
        "--metric",
        spec_path.to_str().unwrap(),
    ]);
    assert_exit(&from_file, 0);
    assert_eq!(stdout_str(&by_name), stdout_str(&from_file));
}

#[test]
fn explore_reports_bracket_containing_estimate() {
    let out = run([
        "explore",
        "--R",
        "0.6",
        "--nr",
        "24",
        "--nt",
        "48",
        "--tol",
        "1e-5",
        "--bisect-tol",
        "0.05",
    ]);
    assert_exit(&out, 0);
    let report: ExploreReport =
        serde_json::from_str(&stdout_str(&out)).expect("stdout should parse as the report schema");
    let (lo, hi) = report.bracket;
    assert!(lo <= report.r_estimate && report.r_estimate <= hi);
    assert!(
        (report.r_estimate - 1.0 / 3.0).abs() < 0.08,
        "coarse-mesh estimate {} strays too far from 1/3",
        report.r_estimate
    );
    assert!(!report.probes.is_empty());
}

#[test]
fn diagnose_rejects_bad_map_files() {
    let out = run(["diagnose", "--map", "/nonexistent/map.csv"]);
    assert_exit(&out, 2);
    assert!(stderr_str(&out).contains("map file"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "i,j,s,theta,re,im\ngarbage\n").unwrap();
    let out = run(["diagnose", "--map", bad.to_str().unwrap()]);
    assert_exit(&out, 2);
    assert!(stderr_str(&out).contains("map file"));
}

#[test]
fn nonconvergent_minimize_exits_1_with_partial_report() {
    let out = run([
        "minimize",
        "--X-inner",
        "0.5",
        "--Y-inner",
        "0.6",
        "--nr",
        "16",
        "--nt",
        "32",
        "--tol",
        "1e-14",
        "--max-iter",
        "40",
    ]);
    assert_exit(&out, 1);
    assert!(stderr_str(&out).contains("tolerance"));
    let report: MinimizeReport = serde_json::from_str(&stdout_str(&out))
        .expect("partial report should still parse as the report schema");
    assert!(!report.converged);
    assert!(report.energy.energy.is_finite());
}

#[test]
fn metric_spec_file_errors_name_the_path() {
    let missing = Path::new("/nonexistent/metric.json");
    let out = run([
        "admissibility",
        "--inner",
        "0.3",
        "--outer",
        "0.9",
        "--metric",
        missing.to_str().unwrap(),
    ]);
    assert_exit(&out, 2);
    assert!(stderr_str(&out).contains("metric spec"));
}
