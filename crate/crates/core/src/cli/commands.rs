//! The `run`, `static-check`, `minkowski`, `fit-cap` and `derivative-check` commands.
//!
//! Each command writes `report.json` into its output directory and returns the
//! same [`Report`]; `passed` is true iff every tolerance the command checks holds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{build_initial, RunConfig};
use super::snapshot::{read_snapshot, snapshot_name, write_snapshot};
use crate::diagnostics::{
    boundary_angle_defect, enclosed_volume, fit_cap, minkowski_residual, CapFit, DiagnosticsRecord,
};
use crate::error::{CapflowError, Result};
use crate::flow::{
    check_hypotheses, derivative_check, flow_velocity, run_with, DerivativeCheck, HypothesisReport, RunObserver,
    RunOptions, SurfaceState, Termination,
};
use crate::geometry::CapSpec;

/// Largest relative change of the enclosed volume over a run.
pub const VOLUME_DRIFT_TOL: f64 = 1e-3;
/// Allowed relative increase of the energy between diagnostic samples.
pub const ENERGY_INCREASE_TOL: f64 = 1e-6;
/// Largest `max |u(t_max) − u(0)|` for a cap under `static-check`.
pub const STATIC_DRIFT_TOL: f64 = 1e-4;
/// Largest deviation of the contact angle on a steady state.
pub const ANGLE_TOL: f64 = 1e-3;
/// Minkowski residuals must stay below this multiple of `h²`.
pub const MINKOWSKI_CONSTANT: f64 = 4.0;
pub const DERIVATIVE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub rejected_steps: usize,
    pub termination: Termination,
    pub final_time: f64,
    pub final_rate: f64,
    pub boundary_angle_defect: f64,
    pub umb_max: f64,
    pub r_star: f64,
    pub r_sub: f64,
    /// Barrier containment held at every diagnostic sample (`None` without barriers).
    pub contained: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Conservation {
    pub initial_volume: f64,
    pub final_volume: f64,
    pub relative_volume_drift: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Largest relative energy increase between consecutive samples.
    pub max_energy_increase: f64,
    /// Relative difference between the fitted cap's volume and the initial volume.
    pub fitted_volume_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StaticSummary {
    pub initial_rate: f64,
    pub max_drift: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MinkowskiSummary {
    pub residual_1: f64,
    pub residual_2: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub passed: bool,
    pub failures: Vec<String>,
    pub hypotheses: HypothesisReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub config_warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conservation: Option<Conservation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<CapFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub static_check: Option<StaticSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minkowski: Option<MinkowskiSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derivative_check: Option<DerivativeCheck>,
}

impl Report {
    pub fn new(command: &str, hypotheses: HypothesisReport) -> Self {
        Self {
            command: command.into(),
            passed: true,
            failures: Vec::new(),
            hypotheses,
            config_warnings: Vec::new(),
            run: None,
            conservation: None,
            fit: None,
            static_check: None,
            minkowski: None,
            derivative_check: None,
        }
    }

    pub fn fail(&mut self, message: impl Into<String>) {
        self.passed = false;
        self.failures.push(message.into());
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| CapflowError::InvalidParameter(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// Hypotheses of the configured cap itself, for reports whose initial data could not be built.
pub fn fallback_hypotheses(config: &RunConfig) -> HypothesisReport {
    let cap = config.grid().and_then(|g| SurfaceState::from_cap(g, &config.cap()?));
    match cap {
        Ok(s) => check_hypotheses(&s, config.barriers().ok().flatten().as_ref()),
        Err(e) => HypothesisReport {
            warnings: vec![format!("hypotheses not evaluated: {e}")],
            ..HypothesisReport::default()
        },
    }
}

struct Artifacts {
    csv: BufWriter<File>,
    dir: PathBuf,
    snapshot_every: usize,
    io_error: Option<std::io::Error>,
    last_snapshot: Option<usize>,
}

impl Artifacts {
    fn keep(&mut self, r: std::result::Result<(), std::io::Error>) {
        if let (Err(e), None) = (r, &self.io_error) {
            self.io_error = Some(e);
        }
    }

    fn snapshot(&mut self, step: usize, state: &SurfaceState) {
        if self.last_snapshot == Some(step) {
            return;
        }
        self.last_snapshot = Some(step);
        let r = write_snapshot(&self.dir.join(snapshot_name(step)), state, step).map_err(|e| match e {
            CapflowError::Io(e) => e,
            other => std::io::Error::other(other.to_string()),
        });
        self.keep(r);
    }
}

impl RunObserver for Artifacts {
    fn on_step(&mut self, step: usize, state: &SurfaceState) {
        if self.snapshot_every > 0 && step % self.snapshot_every == 0 {
            self.snapshot(step, state);
        }
    }

    fn on_record(&mut self, _step: usize, _state: &SurfaceState, record: &DiagnosticsRecord) {
        let r = writeln!(self.csv, "{}", record.csv_row());
        self.keep(r);
    }
}

fn conservation(records: &[DiagnosticsRecord], fit_volume: Option<f64>) -> Option<Conservation> {
    let (first, last) = (records.first()?, records.last()?);
    let max_energy_increase = records
        .windows(2)
        .map(|w| (w[1].energy - w[0].energy) / w[0].energy.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Some(Conservation {
        initial_volume: first.volume,
        final_volume: last.volume,
        relative_volume_drift: (last.volume - first.volume).abs() / first.volume,
        initial_energy: first.energy,
        final_energy: last.energy,
        max_energy_increase,
        fitted_volume_error: fit_volume.map(|v| (v - first.volume).abs() / first.volume),
    })
}

/// Volume enclosed by the cap `fit` sampled on the grid of `state`.
fn fitted_volume(state: &SurfaceState, fit: &CapFit) -> Result<f64> {
    let spec = fit.spec(state.amb.c, state.amb.theta)?;
    enclosed_volume(&SurfaceState::from_cap(state.grid.clone(), &spec)?)
}

/// Evolve the configured initial surface, writing `diagnostics.csv`,
/// snapshots and `report.json` into `out`.
pub fn cmd_run(config: &RunConfig, config_warnings: Vec<String>, out: &Path) -> Result<Report> {
    std::fs::create_dir_all(out)?;
    let initial = match build_initial(config) {
        Ok(s) => s,
        Err(e) => {
            let mut report = Report::new("run", fallback_hypotheses(config));
            report.config_warnings = config_warnings;
            report.fail(e.to_string());
            report.write(out)?;
            return Ok(report);
        }
    };
    let barriers = config.barriers()?;
    let mut csv = BufWriter::new(File::create(out.join("diagnostics.csv"))?);
    writeln!(csv, "{}", DiagnosticsRecord::CSV_HEADER)?;
    let mut artifacts = Artifacts {
        csv,
        dir: out.to_path_buf(),
        snapshot_every: config.output.snapshot_every,
        io_error: None,
        last_snapshot: None,
    };
    artifacts.snapshot(0, &initial);

    let options = RunOptions {
        diag_every: config.output.diag_every,
        barriers,
    };
    let hypotheses = check_hypotheses(&initial, barriers.as_ref());
    let mut report = Report::new("run", hypotheses);
    report.config_warnings = config_warnings;

    match run_with(initial, &config.stepping, &options, &mut artifacts) {
        Ok(outcome) => {
            artifacts.snapshot(outcome.steps, &outcome.state);
            let state = &outcome.state;
            let last = outcome.records.last().copied();
            let fit = fit_cap(state);
            let fit_volume = fit.as_ref().ok().map(|f| fitted_volume(state, f)).transpose()?;
            let contained = barriers.map(|_| outcome.containment.iter().all(|&c| c));
            let summary = RunSummary {
                steps: outcome.steps,
                rejected_steps: outcome.rejected_steps,
                termination: outcome.termination,
                final_time: state.t,
                final_rate: outcome.final_rate,
                boundary_angle_defect: boundary_angle_defect(state),
                umb_max: last.map_or(f64::NAN, |r| r.umb_max),
                r_star: last.map_or(f64::NAN, |r| r.r_star),
                r_sub: last.map_or(f64::NAN, |r| r.r_sub),
                contained,
            };
            let cons = conservation(&outcome.records, fit_volume);
            if let Some(c) = &cons {
                if !(c.relative_volume_drift <= VOLUME_DRIFT_TOL) {
                    report.fail(format!(
                        "relative volume drift {:e} exceeds {VOLUME_DRIFT_TOL:e}",
                        c.relative_volume_drift
                    ));
                }
                if c.max_energy_increase > ENERGY_INCREASE_TOL {
                    report.fail(format!(
                        "energy increased by {:e} (relative) between samples",
                        c.max_energy_increase
                    ));
                }
            }
            if contained == Some(false) {
                report.fail("surface left the declared barriers");
            }
            if summary.termination == Termination::Steady && summary.boundary_angle_defect > ANGLE_TOL {
                report.fail(format!(
                    "contact angle defect {:e} exceeds {ANGLE_TOL:e} at the steady state",
                    summary.boundary_angle_defect
                ));
            }
            match fit {
                Ok(f) => report.fit = Some(f),
                Err(e) => report.fail(format!("cap fit: {e}")),
            }
            report.run = Some(summary);
            report.conservation = cons;
        }
        Err(failure) => {
            artifacts.snapshot(failure.steps, &failure.state);
            report.conservation = conservation(&failure.records, None);
            report.fail(failure.to_string());
        }
    }
    let flushed = artifacts.csv.flush();
    artifacts.keep(flushed);
    if let Some(e) = artifacts.io_error.take() {
        return Err(e.into());
    }
    report.write(out)?;
    Ok(report)
}

/// Evolve the configured cap (any perturbation dropped) to `t_max` and measure its drift.
pub fn cmd_static_check(config: &RunConfig, out: &Path) -> Result<Report> {
    let spec: CapSpec = config.cap()?;
    let initial = SurfaceState::from_cap(config.grid()?, &spec)?;
    let mut report = Report::new("static-check", check_hypotheses(&initial, None));
    let initial_rate = flow_velocity(&initial, config.stepping.conserve_volume)?.max_abs();
    let options = RunOptions::default();
    match run_with(initial.clone(), &config.stepping, &options, &mut ()) {
        Ok(outcome) => {
            let max_drift = initial
                .u
                .values()
                .iter()
                .zip(outcome.state.u.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if !(max_drift <= STATIC_DRIFT_TOL) {
                report.fail(format!("cap drifted by {max_drift:e}, tolerance {STATIC_DRIFT_TOL:e}"));
            }
            report.static_check = Some(StaticSummary {
                initial_rate,
                max_drift,
                tolerance: STATIC_DRIFT_TOL,
            });
        }
        Err(failure) => report.fail(failure.to_string()),
    }
    report.write(out)?;
    Ok(report)
}

/// Evaluate both Minkowski residuals on a snapshot.
pub fn cmd_minkowski(snapshot: &Path, out: &Path) -> Result<Report> {
    let (_, state) = read_snapshot(snapshot)?;
    let mut report = Report::new("minkowski", check_hypotheses(&state, None));
    let bound = MINKOWSKI_CONSTANT * state.grid.h().powi(2);
    let residual_1 = minkowski_residual(&state, 1)?;
    let residual_2 = minkowski_residual(&state, 2)?;
    for (k, r) in [(1, residual_1), (2, residual_2)] {
        if !(r.abs() <= bound) {
            report.fail(format!("Minkowski residual k = {k} is {r:e}, bound {bound:e}"));
        }
    }
    report.minkowski = Some(MinkowskiSummary {
        residual_1,
        residual_2,
        bound,
    });
    report.write(out)?;
    Ok(report)
}

/// Least-squares cap through the nodes of a snapshot.
pub fn cmd_fit_cap(snapshot: &Path, out: &Path) -> Result<Report> {
    let (_, state) = read_snapshot(snapshot)?;
    let mut report = Report::new("fit-cap", check_hypotheses(&state, None));
    match fit_cap(&state) {
        Ok(fit) => report.fit = Some(fit),
        Err(e) => report.fail(e.to_string()),
    }
    report.write(out)?;
    Ok(report)
}

/// Linearization coefficients against finite differences at 100 random nodes of 3 random states.
pub fn cmd_derivative_check(config: &RunConfig, seed: u64, out: &Path) -> Result<Report> {
    let mut report = Report::new("derivative-check", fallback_hypotheses(config));
    let check = derivative_check(seed, 3, 100)?;
    if !(check.worst() <= DERIVATIVE_TOL) {
        report.fail(format!(
            "worst relative error {:e} exceeds {DERIVATIVE_TOL:e}",
            check.worst()
        ));
    }
    report.derivative_check = Some(check);
    report.write(out)?;
    Ok(report)
}
