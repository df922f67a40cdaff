use super::jacobian::JacobianWorkspace;
use super::state::{eval_qc, eval_qc_values, velocity_values, StepPolicy, SurfaceState};
use crate::error::{CapflowError, Result};

/// Largest admissible sup-norm change of `u` in a single step.
pub const STABILITY_LIMIT: f64 = 1.0;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn guard(old: &[f64], new: &[f64]) -> Result<()> {
    let change = max_abs_diff(old, new);
    if change > STABILITY_LIMIT || !change.is_finite() {
        return Err(CapflowError::StabilityBreach {
            max_change: change,
            limit: STABILITY_LIMIT,
        });
    }
    Ok(())
}

/// One Heun step: `ũ = u + dt Q(u)`, `u⁺ = u + dt/2 (Q(u) + Q(ũ))`.
pub fn step_rk2(state: &SurfaceState, dt: f64) -> Result<SurfaceState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CapflowError::InvalidParameter(format!(
            "step size must be positive, got {dt}"
        )));
    }
    let q0 = eval_qc(&state.u, &state.grid, &state.amb)?;
    heun_from(state, &q0, dt, false)
}

/// Heun step from a precomputed `q0 = u_t(state)`.
pub(crate) fn heun_from(state: &SurfaceState, q0: &[f64], dt: f64, conserve_volume: bool) -> Result<SurfaceState> {
    let u = state.u.values();
    let pred: Vec<f64> = u.iter().zip(q0).map(|(a, q)| a + dt * q).collect();
    let q1 = velocity_values(pred, &state.grid, &state.amb, conserve_volume)?;
    let next: Vec<f64> = u
        .iter()
        .zip(q0.iter().zip(&q1))
        .map(|(a, (p, q))| a + 0.5 * dt * (p + q))
        .collect();
    guard(u, &next)?;
    state.with_values(next, state.t + dt)
}

/// Outcome of one accepted adaptive step.
#[derive(Clone, Copy, Debug)]
pub struct StepReport {
    pub dt: f64,
    pub rejected: usize,
    pub error: f64,
}

/// Two-stage linearly implicit Rosenbrock method (γ = 1 + 1/√2), second order
/// and L-stable, with the first-order companion `u + dt k1` as error estimate.
///
/// ```text
/// W = I − γ dt J,   W k1 = Q(u),   W k2 = Q(u + dt k1) − 2 k1,
/// u⁺ = u + dt (3/2 k1 + 1/2 k2)
/// ```
///
/// Second order holds for any `J`, so the finite-difference Jacobian of the
/// plain operator `Q_c` is refreshed only every few steps, and the global
/// volume multiplier is left out of it.
pub struct Rosenbrock {
    ws: JacobianWorkspace,
    dt: f64,
    jac: Option<Vec<f64>>,
    age: usize,
    pub refresh_every: usize,
}

const GAMMA: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;

impl Rosenbrock {
    pub fn new(state: &SurfaceState, dt0: f64) -> Result<Self> {
        Ok(Self {
            ws: JacobianWorkspace::new(&state.grid)?,
            dt: dt0,
            jac: None,
            age: 0,
            refresh_every: 5,
        })
    }

    /// Step size that will be attempted next.
    pub fn next_dt(&self) -> f64 {
        self.dt
    }

    /// Advance by one accepted step, given `q0`, the velocity of the flow at
    /// `state` under `policy`. The step never passes `policy.t_max`.
    pub fn step(
        &mut self,
        state: &SurfaceState,
        q0: &[f64],
        policy: &StepPolicy,
    ) -> Result<(SurfaceState, StepReport)> {
        let grid = &state.grid;
        let amb = state.amb;
        let u = state.u.values();
        let eval = |v: Vec<f64>| velocity_values(v, grid, &amb, policy.conserve_volume);
        let refresh = |ws: &JacobianWorkspace| -> Result<Vec<f64>> {
            let plain = |v: Vec<f64>| eval_qc_values(v, grid, &amb);
            let f0 = if policy.conserve_volume {
                plain(u.to_vec())?
            } else {
                q0.to_vec()
            };
            ws.assemble(u, &f0, plain)
        };

        if self.jac.is_none() || self.age >= self.refresh_every {
            self.jac = Some(refresh(&self.ws)?);
            self.age = 0;
        }
        self.age += 1;

        let mut rejected = 0;
        loop {
            let remaining = policy.t_max - state.t;
            let dt = self.dt.min(policy.dt_max).min(remaining);
            if !(dt > 1e-14 * policy.t_max.max(1.0)) {
                return Err(CapflowError::Solver(format!("step size collapsed to {dt:e}")));
            }
            let lu = self.ws.factor_shifted(self.jac.as_ref().unwrap(), GAMMA * dt)?;

            let mut k1 = q0.to_vec();
            lu.solve_in_place(&mut k1);
            let stage: Vec<f64> = u.iter().zip(&k1).map(|(a, k)| a + dt * k).collect();

            let outcome = eval(stage).map(|q1| {
                let mut k2: Vec<f64> = q1.iter().zip(&k1).map(|(q, k)| q - 2.0 * k).collect();
                lu.solve_in_place(&mut k2);
                let err = 0.5 * dt * k1.iter().zip(&k2).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
                let next: Vec<f64> = u
                    .iter()
                    .zip(k1.iter().zip(&k2))
                    .map(|(a, (p, q))| a + dt * (1.5 * p + 0.5 * q))
                    .collect();
                (err, next)
            });

            let (err, next) = match outcome {
                Ok(v) if v.0.is_finite() => v,
                Ok(_) | Err(CapflowError::NonpositiveHeight { .. }) => {
                    rejected += 1;
                    self.dt = dt * 0.25;
                    self.jac = Some(refresh(&self.ws)?);
                    continue;
                }
                Err(e) => return Err(e),
            };

            let factor = if err > 0.0 {
                (0.9 * (policy.local_tol / err).sqrt()).clamp(0.2, 2.0)
            } else {
                2.0
            };
            if err <= policy.local_tol {
                guard(u, &next)?;
                // only grow from a step that was not clipped by t_max
                if dt >= self.dt.min(policy.dt_max) {
                    self.dt = dt * factor;
                }
                let new_state = state.with_values(next, state.t + dt)?;
                return Ok((
                    new_state,
                    StepReport {
                        dt,
                        rejected,
                        error: err,
                    },
                ));
            }
            rejected += 1;
            self.dt = dt * factor.min(0.9);
            if rejected % 3 == 0 {
                self.jac = Some(refresh(&self.ws)?);
                self.age = 1;
            }
        }
    }
}
