use serde::{Deserialize, Serialize};

use crate::error::{CapflowError, Result};
use crate::flow::SurfaceState;
use crate::geometry::{cap_radial, point_cap_radius, polar_to_cartesian, CapSpec, CartesianPoint, PolarPoint};

/// `C` in the containment slack `ε_grid = C h²`.
pub const CONTAINMENT_CONSTANT: f64 = 1.0;

pub fn containment_tolerance(state: &SurfaceState) -> f64 {
    CONTAINMENT_CONSTANT * state.grid.h().powi(2)
}

/// Whether every node lies between the centred caps `inner` and `outer`, up to `ε_grid`.
pub fn containment_check(state: &SurfaceState, outer: &CapSpec, inner: &CapSpec) -> bool {
    let eps = containment_tolerance(state);
    let grid = &state.grid;
    grid.nodes().all(|(i, j)| {
        let beta = grid.beta(i);
        let rho = state.rho(i, j);
        cap_radial(beta, inner) - eps <= rho && rho <= cap_radial(beta, outer) + eps
    })
}

fn embedded_points(state: &SurfaceState) -> Result<Vec<CartesianPoint>> {
    let grid = &state.grid;
    grid.nodes()
        .map(|(i, j)| {
            polar_to_cartesian(
                PolarPoint::new(grid.beta(i), grid.gamma(j)),
                state.rho(i, j),
                &state.amb,
            )
        })
        .collect()
}

/// `(R*, R₊)`: the largest and smallest radius among the centred caps through the nodes.
pub fn extremal_cap_radii(state: &SurfaceState) -> Result<(f64, f64)> {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for x in embedded_points(state)? {
        let r = point_cap_radius(x, &state.amb)?;
        hi = hi.max(r);
        lo = lo.min(r);
    }
    Ok((hi, lo))
}

/// Least-squares cap with centre `(−R cos θ, a2, c)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapFit {
    pub radius: f64,
    pub a2: f64,
    /// Root-mean-square Euclidean distance of the nodes to the fitted sphere.
    pub rms: f64,
    /// `c / R`, the principal curvature of the fitted cap.
    pub ratio: f64,
    pub iterations: usize,
}

impl CapFit {
    pub fn spec(&self, c: f64, theta: f64) -> Result<CapSpec> {
        CapSpec::new(c, self.radius, theta, self.a2)
    }
}

const FIT_MAX_ITER: usize = 50;

/// Gauss–Newton fit over `(R, a2)`, seeded at `R = R*`, `a2 = 0`.
pub fn fit_cap(state: &SurfaceState) -> Result<CapFit> {
    let points = embedded_points(state)?;
    let (seed, _) = extremal_cap_radii(state)?;
    let c = state.amb.c;
    let ct = state.amb.theta.cos();

    let residuals = |r: f64, a2: f64| -> Vec<f64> {
        points
            .iter()
            .map(|x| {
                let dx = x.x1 + r * ct;
                let dy = x.x2 - a2;
                let dz = x.x3 - c;
                (dx * dx + dy * dy + dz * dz).sqrt() - r
            })
            .collect()
    };
    let sum_sq = |res: &[f64]| res.iter().map(|e| e * e).sum::<f64>();

    let (mut r, mut a2) = (seed, 0.0);
    let mut cost = sum_sq(&residuals(r, a2));
    let mut stalled = 0;
    for it in 1..=FIT_MAX_ITER {
        // normal equations JᵀJ δ = −Jᵀr
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for x in &points {
            let dx = x.x1 + r * ct;
            let dy = x.x2 - a2;
            let dz = x.x3 - c;
            let d = (dx * dx + dy * dy + dz * dz).sqrt();
            let g = [dx * ct / d - 1.0, -dy / d];
            let e = d - r;
            for p in 0..2 {
                jtr[p] += g[p] * e;
                for q in 0..2 {
                    jtj[p][q] += g[p] * g[q];
                }
            }
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-300 {
            return Err(CapflowError::FitDiverged { iterations: it });
        }
        let step = [
            -(jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det,
            -(jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det,
        ];

        // halve the step until the cost does not increase
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (rn, an) = (r + scale * step[0], a2 + scale * step[1]);
            if rn > 0.0 {
                let cn = sum_sq(&residuals(rn, an));
                if cn <= cost {
                    let improvement = cost - cn;
                    r = rn;
                    a2 = an;
                    cost = cn;
                    accepted = true;
                    if improvement <= 1e-15 * cost.max(1e-300) {
                        stalled += 1;
                    }
                    break;
                }
            }
            scale *= 0.5;
        }
        let small = step[0].abs().max(step[1].abs()) <= 1e-13 * r.max(1.0);
        if !accepted || small || stalled > 2 {
            if !accepted && !small && cost > 0.0 && it == 1 {
                return Err(CapflowError::FitDiverged { iterations: it });
            }
            return Ok(CapFit {
                radius: r,
                a2,
                rms: (cost / points.len() as f64).sqrt(),
                ratio: c / r,
                iterations: it,
            });
        }
    }
    Err(CapflowError::FitDiverged {
        iterations: FIT_MAX_ITER,
    })
}

/// Largest deviation of `⟨ν, N̄⟩` from `−cos θ` along the contact curve.
///
/// `u_β` at the wall comes from a one-sided cubic through the last four interior
/// rings, independent of the ghost ring used by the flow; the tangential
/// derivative is taken from extrapolated wall values.
pub fn boundary_angle_defect(state: &SurfaceState) -> f64 {
    let grid = &state.grid;
    let (n, ng) = (grid.n_beta, grid.n_gamma);
    let u = |i: usize, j: usize| state.u.get(i, j);
    let wall: Vec<f64> = (0..ng)
        .map(|j| (35.0 * u(n - 1, j) - 35.0 * u(n - 2, j) + 21.0 * u(n - 3, j) - 5.0 * u(n - 4, j)) / 16.0)
        .collect();
    let ct = state.amb.theta.cos();
    (0..ng)
        .map(|j| {
            let ub = (71.0 / 24.0 * u(n - 1, j) - 47.0 / 8.0 * u(n - 2, j) + 31.0 / 8.0 * u(n - 3, j)
                - 23.0 / 24.0 * u(n - 4, j))
                / grid.d_beta;
            let ut = (wall[(j + 1) % ng] - wall[(j + ng - 1) % ng]) / (2.0 * grid.d_gamma);
            // at β = π/2, ⟨ν, N̄⟩ = −ν̃₁ = −u_β / v
            let inner = -ub / (1.0 + ub * ub + ut * ut).sqrt();
            (inner + ct).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn state(spec: &CapSpec, nb: usize) -> SurfaceState {
        SurfaceState::from_cap(Grid::new(nb, 2 * nb).unwrap(), spec).unwrap()
    }

    #[test]
    fn exact_cap_has_equal_extremal_radii() {
        let s = state(&CapSpec::centered(2.0, 1.0, 1.1).unwrap(), 16);
        let (hi, lo) = extremal_cap_radii(&s).unwrap();
        assert_relative_eq!(hi, 1.0, epsilon = 1e-12);
        assert_relative_eq!(lo, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_recovers_offset_cap() {
        let spec = CapSpec::new(2.0, 1.0, 1.2, 0.3).unwrap();
        let fit = fit_cap(&state(&spec, 16)).unwrap();
        assert_relative_eq!(fit.radius, 1.0, epsilon = 1e-10);
        assert_relative_eq!(fit.a2, 0.3, epsilon = 1e-10);
        assert!(fit.rms < 1e-10);
        assert_relative_eq!(fit.ratio, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn containment_between_barriers() {
        let spec = CapSpec::centered(2.0, 1.0, PI / 3.0).unwrap();
        let s = state(&spec, 16);
        assert!(containment_check(&s, &spec.with_radius(1.2), &spec.with_radius(0.8)));
        assert!(!containment_check(&s, &spec.with_radius(0.9), &spec.with_radius(0.8)));
        assert!(!containment_check(&s, &spec.with_radius(1.3), &spec.with_radius(1.1)));
    }

    #[test]
    fn caps_meet_the_wall_at_their_angle() {
        for theta in [PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
            let coarse = boundary_angle_defect(&state(&CapSpec::centered(2.0, 1.0, theta).unwrap(), 32));
            let fine = boundary_angle_defect(&state(&CapSpec::centered(2.0, 1.0, theta).unwrap(), 64));
            assert!(fine < 1e-4, "theta {theta}: {fine}");
            assert!(fine <= coarse + 1e-15);
        }
    }
}
