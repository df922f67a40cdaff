use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operator::{linearize_pointwise, qc_trig, Linearization};
use crate::error::{CapflowError, Result};
use crate::geometry::{cap_radial_at, AmbientParams, CapSpec, PolarPoint};
use crate::grid::{apply_capillary_bc, capillary_ghost, jet_from_partials, Field, Grid};

/// The log-radial field `u = log ρ` at one instant, ghost ring applied.
#[derive(Clone, Debug)]
pub struct SurfaceState {
    pub u: Field,
    pub t: f64,
    pub amb: AmbientParams,
    pub grid: Grid,
}

impl SurfaceState {
    /// Build a state from interior values: applies the capillary condition and
    /// checks that every node lies in the upper half-space.
    pub fn new(grid: Grid, amb: AmbientParams, values: Vec<f64>, t: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CapflowError::InvalidParameter(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.n_beta,
                grid.n_gamma,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|x| !x.is_finite()) {
            return Err(CapflowError::InvalidParameter(format!(
                "non-finite log-radius at node {k}"
            )));
        }
        let u = apply_capillary_bc(&Field::from_values(&grid, values), &grid, amb.theta)?;
        let state = Self { u, t, amb, grid };
        let h = state.min_height();
        if h <= 0.0 {
            return Err(CapflowError::NonpositiveHeight { x3: h });
        }
        Ok(state)
    }

    /// The exact cap `spec` sampled on `grid`.
    pub fn from_cap(grid: Grid, spec: &CapSpec) -> Result<Self> {
        let amb = AmbientParams::new(spec.c, spec.theta)?;
        let values = grid
            .nodes()
            .map(|(i, j)| cap_radial_at(PolarPoint::new(grid.beta(i), grid.gamma(j)), spec).ln())
            .collect();
        Self::new(grid, amb, values, 0.0)
    }

    /// Same grid and ambient data, new interior values and time.
    pub fn with_values(&self, values: Vec<f64>, t: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.amb, values, t)
    }

    #[inline]
    pub fn rho(&self, i: usize, j: usize) -> f64 {
        self.u.get(i, j).exp()
    }

    #[inline]
    pub fn height(&self, i: usize, j: usize) -> f64 {
        self.amb.c + self.rho(i, j) * self.grid.sin_beta(i) * self.grid.cos_gamma(j)
    }

    pub fn min_height(&self) -> f64 {
        self.grid
            .nodes()
            .map(|(i, j)| self.height(i, j))
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn ghost(&self) -> &[f64] {
        self.u.ghost().expect("surface states always carry a ghost ring")
    }
}

/// Time integrator used by [`run`](super::run).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Explicit Heun steps at the diffusive CFL limit.
    Heun,
    /// Linearly implicit two-stage Rosenbrock steps with error control.
    #[default]
    Rosenbrock,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepPolicy {
    pub cfl: f64,
    pub t_max: f64,
    /// Stop once `max |u_t|` drops below this.
    pub steady_tol: f64,
    pub max_steps: usize,
    pub integrator: Integrator,
    /// Local error target per Rosenbrock step (max-norm in `u`).
    pub local_tol: f64,
    /// Upper bound on Rosenbrock steps.
    pub dt_max: f64,
    /// Subtract the multiplier of [`volume_multiplier`] so the discrete
    /// enclosed volume is conserved exactly.
    pub conserve_volume: bool,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            cfl: 0.2,
            t_max: 1.0,
            steady_tol: 1e-8,
            max_steps: 1_000_000,
            integrator: Integrator::Rosenbrock,
            local_tol: 1e-6,
            dt_max: 0.5,
            conserve_volume: true,
        }
    }
}

impl StepPolicy {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            problems.push(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            problems.push(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.steady_tol > 0.0) {
            problems.push(format!("steady_tol must be positive, got {}", self.steady_tol));
        }
        if !(self.local_tol > 0.0) {
            problems.push(format!("local_tol must be positive, got {}", self.local_tol));
        }
        if !(self.dt_max > 0.0) {
            problems.push(format!("dt_max must be positive, got {}", self.dt_max));
        }
        problems
    }
}

/// Evaluate `Q_c` at every node of a field whose ghost ring is populated.
pub(crate) fn eval_qc(u: &Field, grid: &Grid, amb: &AmbientParams) -> Result<Vec<f64>> {
    let ghost = u.ghost().ok_or(CapflowError::GhostNotApplied)?;
    let ng = grid.n_gamma;
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(ng)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<()> {
            let sb = grid.sin_beta(i);
            let cb = grid.cos_beta(i);
            for (j, q) in row.iter_mut().enumerate() {
                let d = u.partials(grid, ghost, i, j);
                let rho = d[0].exp();
                let (sg, cg) = (grid.sin_gamma(j), grid.cos_gamma(j));
                let x3 = amb.c + rho * sb * cg;
                if x3 <= 0.0 {
                    return Err(CapflowError::NonpositiveHeight { x3 });
                }
                let jet = jet_from_partials(grid, i, &d);
                *q = qc_trig(&jet.hess, &jet.grad, rho, sb, cb, sg, cg, amb);
            }
            Ok(())
        })?;
    Ok(out)
}

/// `Q_c` of raw interior values: applies the capillary ghost first.
pub(crate) fn eval_qc_values(values: Vec<f64>, grid: &Grid, amb: &AmbientParams) -> Result<Vec<f64>> {
    let mut f = Field::from_values(grid, values);
    let ghost = capillary_ghost(&f, grid, amb.theta);
    f.set_ghost(ghost);
    eval_qc(&f, grid, amb)
}

/// Per node: `Q_c`, the factor `v x3 / ρ` converting a normal speed into `u_t`,
/// and the volume weight `ρ³ / x3³ · sin β` of `d|Σ̂|/dt = ∫ ρ³/x3³ u_t dσ`.
fn eval_with_weights(u: &Field, grid: &Grid, amb: &AmbientParams) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let q = eval_qc(u, grid, amb)?;
    let ghost = u.ghost().ok_or(CapflowError::GhostNotApplied)?;
    let mut factor = Vec::with_capacity(grid.len());
    let mut weight = Vec::with_capacity(grid.len());
    for (i, j) in grid.nodes() {
        let d = u.partials(grid, ghost, i, j);
        let rho = d[0].exp();
        let x3 = amb.c + rho * grid.sin_beta(i) * grid.cos_gamma(j);
        let v = jet_from_partials(grid, i, &d).v();
        factor.push(v * x3 / rho);
        weight.push((rho / x3).powi(3) * grid.sin_beta(i));
    }
    Ok((q, factor, weight))
}

fn constrain(q: &mut [f64], factor: &[f64], weight: &[f64]) -> f64 {
    let num: f64 = q.iter().zip(weight).map(|(a, w)| a * w).sum();
    let den: f64 = factor.iter().zip(weight).map(|(a, w)| a * w).sum();
    let lambda = num / den;
    for (a, f) in q.iter_mut().zip(factor) {
        *a -= lambda * f;
    }
    lambda
}

/// Constant normal speed `λ` whose removal, `u_t = Q_c − λ v x3 / ρ`, makes the
/// grid's enclosed volume stationary. It is the discrete counterpart of the
/// Minkowski identity `∫ q_c dA = 0` and vanishes as the grid is refined.
pub fn volume_multiplier(state: &SurfaceState) -> Result<f64> {
    let (mut q, f, w) = eval_with_weights(&state.u, &state.grid, &state.amb)?;
    Ok(constrain(&mut q, &f, &w))
}

/// `u_t` of the discrete flow: `Q_c`, volume-corrected when `conserve_volume` is set.
pub fn flow_velocity(state: &SurfaceState, conserve_volume: bool) -> Result<Field> {
    let q = velocity_of(&state.u, &state.grid, &state.amb, conserve_volume)?;
    Ok(Field::from_values(&state.grid, q))
}

fn velocity_of(u: &Field, grid: &Grid, amb: &AmbientParams, conserve_volume: bool) -> Result<Vec<f64>> {
    if !conserve_volume {
        return eval_qc(u, grid, amb);
    }
    let (mut q, f, w) = eval_with_weights(u, grid, amb)?;
    constrain(&mut q, &f, &w);
    Ok(q)
}

/// [`flow_velocity`] of raw interior values.
pub(crate) fn velocity_values(
    values: Vec<f64>,
    grid: &Grid,
    amb: &AmbientParams,
    conserve_volume: bool,
) -> Result<Vec<f64>> {
    let mut f = Field::from_values(grid, values);
    let ghost = capillary_ghost(&f, grid, amb.theta);
    f.set_ghost(ghost);
    velocity_of(&f, grid, amb, conserve_volume)
}

/// `u_t = Q_c(∇²u, ∇u, ρ, β, γ)` at every node.
pub fn rhs_qc(state: &SurfaceState) -> Result<Field> {
    let q = eval_qc(&state.u, &state.grid, &state.amb)?;
    Ok(Field::from_values(&state.grid, q))
}

/// Per-node partial derivatives of `Q_c`, in row-major node order.
pub fn linearization(state: &SurfaceState) -> Result<Vec<Linearization>> {
    let grid = &state.grid;
    let ghost = state.ghost();
    let mut out = vec![Linearization::default(); grid.len()];
    out.par_chunks_mut(grid.n_gamma)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<()> {
            for (j, lin) in row.iter_mut().enumerate() {
                let d = state.u.partials(grid, ghost, i, j);
                let rho = d[0].exp();
                let x3 = state.amb.c + rho * grid.sin_beta(i) * grid.cos_gamma(j);
                if x3 <= 0.0 {
                    return Err(CapflowError::NonpositiveHeight { x3 });
                }
                let jet = jet_from_partials(grid, i, &d);
                *lin = linearize_pointwise(&jet.hess, &jet.grad, rho, grid.beta(i), grid.gamma(j), &state.amb);
            }
            Ok(())
        })?;
    Ok(out)
}

/// Explicit diffusive step limit
/// `cfl · min (ρ v / x3) · min(Δβ², sin²β Δγ²) / 2`, clipped to the remaining time.
pub fn cfl_dt(state: &SurfaceState, policy: &StepPolicy) -> f64 {
    let grid = &state.grid;
    let ghost = state.ghost();
    let mut limit = f64::INFINITY;
    for (i, j) in grid.nodes() {
        let d = state.u.partials(grid, ghost, i, j);
        let jet = jet_from_partials(grid, i, &d);
        let rho = d[0].exp();
        let x3 = state.height(i, j);
        let sb = grid.sin_beta(i);
        let h2 = (grid.d_beta * grid.d_beta).min(sb * sb * grid.d_gamma * grid.d_gamma);
        limit = limit.min(rho * jet.v() / x3 * h2 / 2.0);
    }
    (policy.cfl * limit).min(policy.t_max - state.t)
}
