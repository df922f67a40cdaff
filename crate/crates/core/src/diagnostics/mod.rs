//! Integral and extremal monitors of a surface state.
//!
//! Surface integrals use the midpoint rule on the grid with the hyperbolic area
//! element `dA = ρ² v / x3² dσ`. All quantities are pure functions of a state.

mod caps;
mod quadrature;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use caps::{
    boundary_angle_defect, containment_check, containment_tolerance, extremal_cap_radii, fit_cap, CapFit,
    CONTAINMENT_CONSTANT,
};
pub use quadrature::{adaptive_simpson, ray_volume};

use crate::error::{CapflowError, Result};
use crate::flow::SurfaceState;
use crate::geometry::{evaluate, PointGeometry, PolarPoint};
use crate::grid::{jet_from_partials, wall_values};

/// One time sample of every monitored quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub area: f64,
    pub volume: f64,
    pub wetting: f64,
    pub energy: f64,
    pub mink1: f64,
    pub mink2: f64,
    pub umb_max: f64,
    pub umb_int: f64,
    pub min_height: f64,
    pub max_grad: f64,
    pub r_star: f64,
    pub r_sub: f64,
    pub dt: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str =
        "t,area,volume,wetting,energy,mink1,mink2,umb_max,umb_int,min_height,max_grad,r_star,r_sub,dt";

    pub fn csv_row(&self) -> String {
        [
            self.t,
            self.area,
            self.volume,
            self.wetting,
            self.energy,
            self.mink1,
            self.mink2,
            self.umb_max,
            self.umb_int,
            self.min_height,
            self.max_grad,
            self.r_star,
            self.r_sub,
            self.dt,
        ]
        .iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// Pointwise geometry at every node, in storage order.
pub fn surface_geometry(state: &SurfaceState) -> Result<Vec<PointGeometry>> {
    let grid = &state.grid;
    let ghost = state.u.ghost().ok_or(CapflowError::GhostNotApplied)?;
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / grid.n_gamma, k % grid.n_gamma);
            let d = state.u.partials(grid, ghost, i, j);
            let jet = jet_from_partials(grid, i, &d);
            evaluate(
                PolarPoint::new(grid.beta(i), grid.gamma(j)),
                d[0].exp(),
                &jet,
                &state.amb,
            )
        })
        .collect()
}

/// Midpoint weights `ρ² v / x3² · sin β Δβ Δγ` of the hyperbolic area element.
fn area_weights(state: &SurfaceState, geo: &[PointGeometry]) -> Vec<f64> {
    let grid = &state.grid;
    let cell = grid.d_beta * grid.d_gamma;
    grid.nodes()
        .zip(geo)
        .map(|((i, j), g)| {
            let rho = state.rho(i, j);
            let x3 = g.support.conformal_height;
            rho * rho * g.v / (x3 * x3) * grid.sin_beta(i) * cell
        })
        .collect()
}

fn integrate(weights: &[f64], geo: &[PointGeometry], f: impl Fn(&PointGeometry) -> f64) -> f64 {
    weights.iter().zip(geo).map(|(w, g)| w * f(g)).sum()
}

pub fn hyperbolic_area(state: &SurfaceState) -> Result<f64> {
    let geo = surface_geometry(state)?;
    Ok(area_weights(state, &geo).iter().sum())
}

/// Relative accuracy of each inner radial volume integral.
pub const VOLUME_RTOL: f64 = 1e-8;

/// `∫_{S²₊} ∫₀^{ρ} s² / (c + s sin β cos γ)³ ds dσ`.
pub fn enclosed_volume(state: &SurfaceState) -> Result<f64> {
    let grid = &state.grid;
    let c = state.amb.c;
    let rows: Result<Vec<f64>> = (0..grid.n_beta)
        .into_par_iter()
        .map(|i| {
            let mut row = 0.0;
            for j in 0..grid.n_gamma {
                let a = grid.sin_beta(i) * grid.cos_gamma(j);
                row += ray_volume(c, a, state.rho(i, j), VOLUME_RTOL)?;
            }
            Ok(row * grid.sin_beta(i))
        })
        .collect();
    Ok(rows?.iter().sum::<f64>() * grid.d_beta * grid.d_gamma)
}

/// Hyperbolic area of the wetted region on the wall, from Green's theorem:
/// `∬ dx2 dx3 / x3² = ∮ dx2 / x3` along the positively oriented contact curve,
/// by the periodic trapezoid rule in γ.
pub fn wetting_area(state: &SurfaceState) -> Result<f64> {
    let grid = &state.grid;
    let ng = grid.n_gamma;
    let c = state.amb.c;
    let w = wall_values(&state.u, grid);
    let mut raw = 0.0;
    for j in 0..ng {
        let rho = w[j].exp();
        let x3 = rho * grid.cos_gamma(j) + c;
        if x3 <= 0.0 {
            return Err(CapflowError::NonpositiveHeight { x3 });
        }
        let at = |k: isize| w[grid.wrap(j as isize + k)];
        let u_gamma = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * grid.d_gamma);
        // x2 = ρ sin γ, so dx2/dγ = ρ (u_γ sin γ + cos γ)
        let dx2 = rho * (u_gamma * grid.sin_gamma(j) + grid.cos_gamma(j));
        raw += dx2 / x3 * grid.d_gamma;
    }
    // increasing γ runs clockwise in the (x2, x3) plane
    Ok(-raw)
}

/// Normalized integral of the Minkowski integrand
/// `n [c H_{k−1} (1/x3 − cos θ ⟨E1, ν⟩) − H_k ⟨x − cE3, ν⟩]`, with the
/// normalized mean curvatures `H₀ = 1`, `H₁ = (κ1 + κ2)/2`, `H₂ = κ1 κ2`.
pub fn minkowski_residual(state: &SurfaceState, k: usize) -> Result<f64> {
    let geo = surface_geometry(state)?;
    let w = area_weights(state, &geo);
    minkowski_from(state, &geo, &w, k)
}

fn minkowski_from(state: &SurfaceState, geo: &[PointGeometry], w: &[f64], k: usize) -> Result<f64> {
    let n = state.amb.n as f64;
    let c = state.amb.c;
    let ct = state.amb.theta.cos();
    let h = |g: &PointGeometry, order: usize| match order {
        0 => 1.0,
        1 => 0.5 * (g.kappa[0] + g.kappa[1]),
        _ => g.kappa[0] * g.kappa[1],
    };
    if !(k == 1 || k == 2) {
        return Err(CapflowError::InvalidParameter(format!(
            "Minkowski residual is defined for k = 1, 2; got {k}"
        )));
    }
    let total = integrate(w, geo, |g| {
        let s = &g.support;
        n * (c * h(g, k - 1) * (1.0 / s.conformal_height - ct * s.e1_nu) - h(g, k) * s.radial_support)
    });
    Ok(total / w.iter().sum::<f64>())
}

/// The two sides of the energy-rate identity
/// `∫ H q_c dA = −∫ (κ1 − κ2)² ⟨x − cE3, ν⟩ dA`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRate {
    pub energy: f64,
    /// `∫ H q_c dA`, the time derivative of the energy.
    pub variation: f64,
    /// `∫ (κ1 − κ2)² ⟨x − cE3, ν⟩ dA`.
    pub umbilic_integral: f64,
    pub gap: f64,
}

/// Constant in `d𝒬/dt = −C ∫ (κ1 − κ2)² ⟨x − cE3, ν⟩ dA` for `𝒬 = |Σ| − cos θ |∂Σ̂|`.
pub const RATE_CONSTANT: f64 = 1.0;

/// Floor on the denominator of the relative rate gap.
pub const RATE_GAP_FLOOR: f64 = 1e-12;

/// `𝒬 = |Σ| − cos θ |∂Σ̂|` together with the relative gap of the rate identity.
pub fn energy_and_rate(state: &SurfaceState) -> Result<(f64, f64)> {
    let r = energy_rate(state)?;
    Ok((r.energy, r.gap))
}

pub fn energy_rate(state: &SurfaceState) -> Result<EnergyRate> {
    let geo = surface_geometry(state)?;
    let w = area_weights(state, &geo);
    let area: f64 = w.iter().sum();
    let energy = area - state.amb.theta.cos() * wetting_area(state)?;
    Ok(rate_from(energy, &geo, &w))
}

fn rate_from(energy: f64, geo: &[PointGeometry], w: &[f64]) -> EnergyRate {
    let variation = integrate(w, geo, |g| g.mean_curvature * g.qc);
    let umbilic_integral = integrate(w, geo, |g| g.umbilic_gap_sq * g.support.radial_support);
    let num = (variation + RATE_CONSTANT * umbilic_integral).abs();
    let gap = if variation.abs() < RATE_GAP_FLOOR && num < RATE_GAP_FLOOR {
        0.0
    } else {
        num / variation.abs().max(RATE_GAP_FLOOR)
    };
    EnergyRate {
        energy,
        variation,
        umbilic_integral,
        gap,
    }
}

/// Evaluate every monitor on `state`; `dt` is the step that produced it.
pub fn record(state: &SurfaceState, dt: f64) -> Result<DiagnosticsRecord> {
    let geo = surface_geometry(state)?;
    let w = area_weights(state, &geo);
    let area: f64 = w.iter().sum();
    let wetting = wetting_area(state)?;
    let energy = area - state.amb.theta.cos() * wetting;
    let rate = rate_from(energy, &geo, &w);
    let (r_star, r_sub) = extremal_cap_radii(state)?;
    let umb_max = geo.iter().map(|g| g.umbilic_gap_sq.sqrt()).fold(0.0, f64::max);
    let min_height = geo
        .iter()
        .map(|g| g.support.conformal_height)
        .fold(f64::INFINITY, f64::min);
    let max_grad = geo
        .iter()
        .map(|g| (g.v * g.v - 1.0).max(0.0).sqrt())
        .fold(0.0, f64::max);
    Ok(DiagnosticsRecord {
        t: state.t,
        area,
        volume: enclosed_volume(state)?,
        wetting,
        energy,
        mink1: minkowski_from(state, &geo, &w, 1)?,
        mink2: minkowski_from(state, &geo, &w, 2)?,
        umb_max,
        umb_int: rate.umbilic_integral,
        min_height,
        max_grad,
        r_star,
        r_sub,
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CapSpec;
    use crate::grid::Grid;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cap(nb: usize, c: f64, r: f64, theta: f64) -> SurfaceState {
        SurfaceState::from_cap(Grid::new(nb, 2 * nb).unwrap(), &CapSpec::centered(c, r, theta).unwrap()).unwrap()
    }

    /// Half of a hyperbolic ball: its Euclidean sphere of radius R about (0, 0, c)
    /// has hyperbolic radius r with cosh r = c / √(c² − R²).
    fn half_ball_volume(c: f64, r: f64) -> f64 {
        let rr = (c / (c * c - r * r).sqrt()).acosh();
        PI * ((2.0 * rr).sinh() - 2.0 * rr) / 2.0
    }

    #[test]
    fn hemisphere_volume_matches_closed_form() {
        let v = enclosed_volume(&cap(64, 2.0, 1.0, PI / 2.0)).unwrap();
        assert_relative_eq!(v, half_ball_volume(2.0, 1.0), max_relative = 1e-3);
    }

    #[test]
    fn wetting_area_of_right_angle_cap() {
        // disc of radius R about (0, c) in the half-plane: 2π(c/√(c² − R²) − 1)
        let w = wetting_area(&cap(32, 2.0, 1.0, PI / 2.0)).unwrap();
        assert_relative_eq!(w, 2.0 * PI * (2.0 / 3f64.sqrt() - 1.0), max_relative = 1e-3);
    }

    #[test]
    fn wetting_area_of_oblique_cap() {
        let theta = PI / 3.0;
        let (c, r) = (2.0, 1.0);
        let a = r * theta.sin();
        let w = wetting_area(&cap(32, c, r, theta)).unwrap();
        assert_relative_eq!(w, 2.0 * PI * (c / (c * c - a * a).sqrt() - 1.0), max_relative = 1e-3);
    }

    #[test]
    fn caps_have_vanishing_minkowski_residuals_and_rate() {
        for theta in [PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
            let s = cap(32, 2.0, 1.0, theta);
            let h2 = s.grid.h().powi(2);
            assert!(minkowski_residual(&s, 1).unwrap().abs() < h2);
            assert!(minkowski_residual(&s, 2).unwrap().abs() < h2);
            let r = energy_rate(&s).unwrap();
            assert!(r.variation.abs() < h2 && r.umbilic_integral.abs() < h2);
        }
    }

    #[test]
    fn minkowski_rejects_other_orders() {
        let s = cap(8, 2.0, 1.0, PI / 2.0);
        assert!(minkowski_residual(&s, 3).is_err());
    }

    #[test]
    fn record_is_consistent() {
        let s = cap(16, 2.0, 1.0, 1.2);
        let r = record(&s, 0.1).unwrap();
        assert!(r.area > 0.0 && r.volume > 0.0 && r.wetting > 0.0);
        assert!(r.r_star >= r.r_sub);
        assert_relative_eq!(r.energy, r.area - 1.2f64.cos() * r.wetting, epsilon = 1e-14);
        assert_eq!(
            r.csv_row().split(',').count(),
            DiagnosticsRecord::CSV_HEADER.split(',').count()
        );
    }
}
