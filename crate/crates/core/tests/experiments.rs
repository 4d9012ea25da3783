//! End-to-end runs of bundled configs, and the verifier's response to
//! tampered or malformed reports.

use multiplab::error::LabError;
use multiplab::experiments::{bundled, run, verify_report, verify_report_file, RunOptions, RunReport, Witness};

fn run_bundled(name: &str) -> RunReport {
    run(&bundled(name).unwrap(), &RunOptions::default()).unwrap().report
}

#[test]
fn two_point_report_carries_the_midpoint_witness() {
    let report = run_bundled("chebyshev_two_point");
    assert!(report.passed(), "{:?}", report.failed_checks());
    let Witness::DoubleMinimum(w) = &report.witnesses[0] else {
        panic!("unexpected witness {:?}", report.witnesses[0]);
    };
    assert!((w.y0.0[0] - 0.025).abs() < 1e-9, "{:?}", w.y0);
    assert!(w.clusters.len() >= 2);
}

#[test]
fn eigen_report_has_three_states() {
    let report = run_bundled("kirchhoff_eigen");
    assert!(report.passed(), "{:?}", report.failed_checks());
    let Witness::KirchhoffStates { states, .. } = &report.witnesses[0] else {
        panic!("unexpected witness");
    };
    assert_eq!(states.len(), 3);
}

#[test]
fn moving_a_root_breaks_verification() {
    let mut report = run_bundled("three_solutions_cos");
    assert!(verify_report(&report, None).unwrap().passed);
    match &mut report.witnesses[0] {
        Witness::ThreeRoots(w) => w.roots[1].0[0] += 1e-2,
        other => panic!("unexpected witness {other:?}"),
    }
    assert!(!verify_report(&report, None).unwrap().passed);

    let mut report = run_bundled("scalar_roots");
    match &mut report.witnesses[0] {
        Witness::ScalarRoots { roots, .. } => roots[0] += 1e-2,
        other => panic!("unexpected witness {other:?}"),
    }
    assert!(!verify_report(&report, None).unwrap().passed);
}

#[test]
fn moving_a_state_breaks_verification() {
    let mut report = run_bundled("kirchhoff_eigen");
    match &mut report.witnesses[0] {
        Witness::KirchhoffStates { states, .. } => states[0].u[10] += 1e-3,
        other => panic!("unexpected witness {other:?}"),
    }
    assert!(!verify_report(&report, None).unwrap().passed);
}

#[test]
fn empty_report_verifies_with_a_warning() {
    let mut report = run_bundled("scalar_roots");
    report.witnesses.clear();
    let v = verify_report(&report, None).unwrap();
    assert!(v.passed);
    assert!(!v.warnings.is_empty());
}

#[test]
fn malformed_report_is_a_report_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.report.json");
    std::fs::write(&path, "{\"name\": 3}").unwrap();
    assert!(matches!(verify_report_file(&path), Err(LabError::Report(_))));
}

#[test]
fn artifacts_are_written_with_headers() {
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        out_dir: Some(dir.path().to_path_buf()),
        ..RunOptions::default()
    };
    let report = run(&bundled("kirchhoff_eigen").unwrap(), &opts).unwrap().report;
    assert_eq!(report.artifacts.len(), 3);
    for name in &report.artifacts {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.lines().next(), Some("t,u"));
    }
    let report = run(&bundled("chebyshev_circle").unwrap(), &opts).unwrap().report;
    let text = std::fs::read_to_string(dir.path().join(&report.artifacts[0])).unwrap();
    assert!(text.starts_with("dim,"));
}

#[test]
fn seed_override_is_echoed() {
    let opts = RunOptions {
        seed: Some(77),
        ..RunOptions::default()
    };
    let report = run(&bundled("kirchhoff_search").unwrap(), &opts).unwrap().report;
    assert_eq!(report.config.seed, 77);
}

#[test]
fn reduced_budget_is_recorded() {
    let opts = RunOptions {
        budget_scale: 0.5,
        ..RunOptions::default()
    };
    let report = run(&bundled("chebyshev_arc").unwrap(), &opts).unwrap().report;
    assert_eq!(report.budget_scale, 0.5);
}
