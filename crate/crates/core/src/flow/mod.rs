//! The scalar flow `u_t = Q_c`: operator, linearization, time stepping and the run loop.

mod check;
mod initial;
mod jacobian;
mod operator;
mod run;
mod state;
mod stepper;

pub use check::{derivative_check, DerivativeCheck, DERIVATIVE_FLOOR};
pub use initial::Perturbation;
pub use operator::{linearize_pointwise, qc_pointwise, Linearization};
pub use run::{
    check_hypotheses, run, run_with, Barriers, HypothesisReport, RunFailure, RunObserver, RunOptions, RunOutcome,
    Termination,
};
#[cfg(test)]
pub(crate) use state::eval_qc_values;
pub use state::{
    cfl_dt, flow_velocity, linearization, rhs_qc, volume_multiplier, Integrator, StepPolicy, SurfaceState,
};
pub use stepper::{step_rk2, Rosenbrock, StepReport, STABILITY_LIMIT};
