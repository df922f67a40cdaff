use serde::{Deserialize, Serialize};

use super::state::{cfl_dt, flow_velocity, Integrator, StepPolicy, SurfaceState};
use super::stepper::{heun_from, Rosenbrock};
use crate::diagnostics::{containment_check, extremal_cap_radii, record, DiagnosticsRecord};
use crate::error::CapflowError;
use crate::geometry::{angle_condition_holds, k0, CapSpec};

/// Outer and inner comparison caps of a run (shared `c`, `θ`, no offset).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Barriers {
    pub outer: CapSpec,
    pub inner: CapSpec,
}

/// Whether the initial surface satisfies the hypotheses of the convergence theorem.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// Radius of the centred cap used for the checks (outer barrier, or `R*`).
    pub containing_radius: f64,
    pub k0: f64,
    pub k0_bound_holds: bool,
    pub angle_condition_holds: bool,
    pub star_shaped: bool,
    /// `None` when no barriers were declared.
    pub contained: Option<bool>,
    pub warnings: Vec<String>,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.warnings.is_empty()
    }
}

pub fn check_hypotheses(state: &SurfaceState, barriers: Option<&Barriers>) -> HypothesisReport {
    let amb = state.amb;
    let mut report = HypothesisReport::default();
    let radius = match barriers {
        Some(b) => b.outer.radius,
        None => extremal_cap_radii(state).map(|r| r.0).unwrap_or(f64::NAN),
    };
    report.containing_radius = radius;
    report.k0 = k0(amb.c, radius, amb.theta);
    let n = amb.n as f64;
    let bound = amb.c * (n - 1.0) / (4.0 * n);
    report.k0_bound_holds = report.k0 > bound;
    if !report.k0_bound_holds {
        report
            .warnings
            .push(format!("K0 = {} does not exceed c(n-1)/(4n) = {bound}", report.k0));
    }
    report.angle_condition_holds = matches!(angle_condition_holds(amb.c, radius, amb.theta, amb.n), Ok(true));
    if !report.angle_condition_holds {
        report.warnings.push(format!(
            "angle condition |cos theta| < (4nK0 - c(n-1))/(4nK0 + c(n-1)) fails for c = {}, R = {radius}, theta = {}",
            amb.c, amb.theta
        ));
    }
    report.star_shaped = crate::diagnostics::surface_geometry(state)
        .map(|geo| geo.iter().all(|g| g.support.radial_support > 0.0))
        .unwrap_or(false);
    if !report.star_shaped {
        report
            .warnings
            .push("surface is not star-shaped with respect to cE3".into());
    }
    if let Some(b) = barriers {
        let inside = containment_check(state, &b.outer, &b.inner);
        report.contained = Some(inside);
        if !inside {
            report.warnings.push(format!(
                "initial surface is not contained between the caps R = {} and R = {}",
                b.inner.radius, b.outer.radius
            ));
        }
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Steady,
    TimeLimit,
    StepLimit,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: SurfaceState,
    pub records: Vec<DiagnosticsRecord>,
    pub steps: usize,
    pub rejected_steps: usize,
    pub termination: Termination,
    /// `max |u_t|` at the final state.
    pub final_rate: f64,
    pub hypotheses: HypothesisReport,
    /// Barrier containment at every diagnostic sample (empty without barriers).
    pub containment: Vec<bool>,
}

/// A run that stopped on an error, with everything gathered until then.
#[derive(Debug, thiserror::Error)]
#[error("run aborted after {steps} steps: {error}")]
pub struct RunFailure {
    pub error: CapflowError,
    pub state: SurfaceState,
    pub records: Vec<DiagnosticsRecord>,
    pub steps: usize,
}

impl From<RunFailure> for CapflowError {
    fn from(f: RunFailure) -> Self {
        f.error
    }
}

/// Hooks called by [`run_with`].
pub trait RunObserver {
    fn on_step(&mut self, _step: usize, _state: &SurfaceState) {}
    fn on_record(&mut self, _step: usize, _state: &SurfaceState, _record: &DiagnosticsRecord) {}
}

impl RunObserver for () {}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Emit diagnostics every this many steps (0: only initial and final).
    pub diag_every: usize,
    pub barriers: Option<Barriers>,
}

/// Evolve `initial` until steady, `t_max`, or `max_steps`.
pub fn run(initial: SurfaceState, policy: &StepPolicy, diag_every: usize) -> Result<RunOutcome, RunFailure> {
    run_with(
        initial,
        policy,
        &RunOptions {
            diag_every,
            barriers: None,
        },
        &mut (),
    )
}

pub fn run_with(
    initial: SurfaceState,
    policy: &StepPolicy,
    options: &RunOptions,
    observer: &mut dyn RunObserver,
) -> Result<RunOutcome, RunFailure> {
    let hypotheses = check_hypotheses(&initial, options.barriers.as_ref());
    let mut records = Vec::new();
    let mut containment = Vec::new();
    let mut state = initial;
    let mut steps = 0;
    let mut rejected_steps = 0;
    let mut last_dt = 0.0;

    macro_rules! bail {
        ($e:expr) => {
            return Err(RunFailure {
                error: $e,
                state,
                records,
                steps,
            })
        };
    }
    macro_rules! emit {
        () => {{
            match record(&state, last_dt) {
                Ok(r) => {
                    observer.on_record(steps, &state, &r);
                    records.push(r);
                    if let Some(b) = &options.barriers {
                        containment.push(containment_check(&state, &b.outer, &b.inner));
                    }
                }
                Err(e) => bail!(e),
            }
        }};
    }

    let problems = policy.validate();
    if !problems.is_empty() {
        bail!(CapflowError::Validation(problems));
    }

    let mut ros = match policy.integrator {
        Integrator::Rosenbrock => {
            let dt0 = cfl_dt(&state, &StepPolicy { cfl: 1.0, ..*policy }).max(1e-8);
            match Rosenbrock::new(&state, dt0) {
                Ok(r) => Some(r),
                Err(e) => bail!(e),
            }
        }
        Integrator::Heun => None,
    };

    emit!();
    let termination;
    let mut final_rate;
    loop {
        let velocity = match flow_velocity(&state, policy.conserve_volume) {
            Ok(v) => v,
            Err(e) => bail!(e),
        };
        final_rate = velocity.max_abs();
        if final_rate < policy.steady_tol {
            termination = Termination::Steady;
            break;
        }
        if state.t >= policy.t_max {
            termination = Termination::TimeLimit;
            break;
        }
        if steps >= policy.max_steps {
            termination = Termination::StepLimit;
            break;
        }
        let next = match ros.as_mut() {
            Some(r) => r.step(&state, velocity.values(), policy).map(|(s, rep)| {
                rejected_steps += rep.rejected;
                (s, rep.dt)
            }),
            None => {
                let dt = cfl_dt(&state, policy);
                heun_from(&state, velocity.values(), dt, policy.conserve_volume).map(|s| (s, dt))
            }
        };
        match next {
            Ok((s, dt)) => {
                state = s;
                last_dt = dt;
            }
            Err(e) => bail!(e),
        }
        steps += 1;
        observer.on_step(steps, &state);
        if options.diag_every > 0 && steps % options.diag_every == 0 {
            emit!();
        }
    }
    if records.last().is_none_or(|r| r.t != state.t) {
        emit!();
    }

    Ok(RunOutcome {
        state,
        records,
        steps,
        rejected_steps,
        termination,
        final_rate,
        hypotheses,
        containment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn cap() -> SurfaceState {
        SurfaceState::from_cap(
            Grid::new(16, 32).unwrap(),
            &CapSpec::centered(2.0, 1.0, PI / 2.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let s = cap();
        let policy = StepPolicy {
            max_steps: 0,
            steady_tol: 1e-300,
            ..StepPolicy::default()
        };
        let out = run(s.clone(), &policy, 1).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.state.u.values(), s.u.values());
        assert_eq!(out.termination, Termination::StepLimit);
    }

    #[test]
    fn hemisphere_is_immediately_steady() {
        let out = run(cap(), &StepPolicy::default(), 10).unwrap();
        assert_eq!(out.termination, Termination::Steady);
        assert!(out.hypotheses.all_hold(), "{:?}", out.hypotheses.warnings);
    }

    #[test]
    fn hypothesis_warnings_do_not_abort() {
        // R large relative to c: K0 bound fails, the run still proceeds
        let s = SurfaceState::from_cap(
            Grid::new(8, 16).unwrap(),
            &CapSpec::centered(1.0, 0.95, PI / 3.0).unwrap(),
        )
        .unwrap();
        let policy = StepPolicy {
            max_steps: 2,
            ..StepPolicy::default()
        };
        let out = run(s, &policy, 1).unwrap();
        assert!(!out.hypotheses.all_hold());
        assert_eq!(out.records.len(), 3);
    }

    #[test]
    fn invalid_policy_is_reported() {
        let policy = StepPolicy {
            cfl: 0.0,
            ..StepPolicy::default()
        };
        let err = run(cap(), &policy, 1).unwrap_err();
        assert!(matches!(err.error, CapflowError::Validation(_)));
    }
}
