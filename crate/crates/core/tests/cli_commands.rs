//! The subcommands end to end: artifacts, determinism, snapshot re-ingestion, reports.

use capflow::cli::{
    cmd_derivative_check, cmd_fit_cap, cmd_minkowski, cmd_run, cmd_static_check, parse_config, read_snapshot, RunConfig,
};

fn config(theta_degrees: f64, extra: &str) -> RunConfig {
    let text = format!(
        r#"{{
        "amb": {{"c": 2.0, "theta_degrees": {theta_degrees}}},
        "grid": {{"n_beta": 16, "n_gamma": 32}},
        "initial": {{"kind": "perturbed_cap", "R": 1.0,
            "perturbation": {{"amplitude": 0.05, "mode": 2, "beta0": 0.7853981633974483, "width": 0.15}}}},
        "stepping": {{"t_max": 0.5}},
        "output": {{"diag_every": 5, "snapshot_every": 20}},
        "barriers": {{"R_outer": 1.2, "R_inner": 0.8}}{extra}
    }}"#
    );
    parse_config(&text).unwrap().config
}

fn report_json(dir: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_deterministic_artifacts() {
    let cfg = config(60.0, "");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let report = cmd_run(&cfg, Vec::new(), a.path()).unwrap();
    assert!(report.passed, "{:?}", report.failures);
    cmd_run(&cfg, Vec::new(), b.path()).unwrap();

    let csv = std::fs::read(a.path().join("diagnostics.csv")).unwrap();
    assert_eq!(csv, std::fs::read(b.path().join("diagnostics.csv")).unwrap());
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "t,area,volume,wetting,energy,mink1,mink2,umb_max,umb_int,min_height,max_grad,r_star,r_sub,dt"
    );
    assert!(text.lines().count() > 3);

    let json = report_json(a.path());
    assert_eq!(json["passed"], true);
    assert!(json["hypotheses"]["star_shaped"].as_bool().unwrap());
    assert_eq!(json["run"]["contained"], true);
    assert!(json["fit"]["radius"].as_f64().unwrap() > 0.9);
    assert!(json["conservation"]["relative_volume_drift"].as_f64().unwrap() < 1e-6);
    assert!(a.path().join("snap_0.csv").exists());
    assert!(a.path().join("snap_20.csv").exists());
}

#[test]
fn snapshots_are_reingested_losslessly() {
    let cfg = config(60.0, "");
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_run(&cfg, Vec::new(), dir.path()).unwrap();
    let steps = report.run.as_ref().unwrap().steps;
    let last = dir.path().join(format!("snap_{steps}.csv"));
    let (header, state) = read_snapshot(&last).unwrap();
    assert_eq!(header.step, steps);
    assert_eq!(state.t, report.run.as_ref().unwrap().final_time);

    let out = tempfile::tempdir().unwrap();
    let fit = cmd_fit_cap(&last, out.path()).unwrap();
    assert_eq!(fit.fit, report.fit);
    let mink = cmd_minkowski(&last, out.path()).unwrap();
    assert!(mink.passed, "{:?}", mink.failures);
}

fn cap_residuals(theta_degrees: f64) -> capflow::cli::MinkowskiSummary {
    let mut cfg = config(theta_degrees, "");
    cfg.initial.perturbation = None;
    cfg.initial.kind = capflow::cli::InitialKind::Cap;
    cfg.stepping.t_max = 1e-3;
    let dir = tempfile::tempdir().unwrap();
    cmd_run(&cfg, Vec::new(), dir.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let report = cmd_minkowski(&dir.path().join("snap_0.csv"), out.path()).unwrap();
    assert!(report.passed, "{:?}", report.failures);
    report.minkowski.unwrap()
}

#[test]
fn cap_snapshots_have_small_residuals() {
    // the right-angle cap is an exact discrete solution
    let m = cap_residuals(90.0);
    assert!(m.residual_1.abs() < 1e-12 && m.residual_2.abs() < 1e-12, "{m:?}");
    // oblique caps carry truncation error only
    let m = cap_residuals(120.0);
    assert!(
        m.residual_1.abs() < 1e-3 * m.bound && m.residual_2.abs() < 1e-3 * m.bound,
        "{m:?}"
    );
}

#[test]
fn static_check_of_reference_hemisphere_passes() {
    let text = r#"{
        "amb": {"c": 2.0, "theta_degrees": 90},
        "grid": {"n_beta": 64, "n_gamma": 128},
        "initial": {"kind": "cap", "R": 1.0}
    }"#;
    let cfg = parse_config(text).unwrap().config;
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_static_check(&cfg, dir.path()).unwrap();
    assert!(report.passed, "{:?}", report.failures);
    assert!(report_json(dir.path())["static_check"]["max_drift"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn derivative_check_with_seed_42_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_derivative_check(&config(60.0, ""), 42, dir.path()).unwrap();
    assert!(report.passed, "{:?}", report.failures);
    let check = report.derivative_check.unwrap();
    assert_eq!(check.samples, 300);
    assert!(check.worst() <= 1e-6);
}

#[test]
fn failures_are_reported_with_hypotheses() {
    // the bump pierces the inner barrier
    let mut cfg = config(60.0, "");
    cfg.initial.perturbation.as_mut().unwrap().amplitude = -0.4;
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_run(&cfg, Vec::new(), dir.path()).unwrap();
    assert!(!report.passed);
    let json = report_json(dir.path());
    assert_eq!(json["passed"], false);
    assert!(!json["failures"].as_array().unwrap().is_empty());
    assert!(json["hypotheses"].is_object());
}
