use serde::{Deserialize, Serialize};

use super::state::SurfaceState;
use crate::error::Result;
use crate::geometry::{cap_radial_at, AmbientParams, CapSpec, PolarPoint};
use crate::grid::Grid;

/// Gaussian bump `g(β, γ) = ε cos(kγ) exp(−((β − β₀)/s)²)` added to `log ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub amplitude: f64,
    pub mode: u32,
    pub beta0: f64,
    pub width: f64,
}

impl Perturbation {
    pub fn eval(&self, beta: f64, gamma: f64) -> f64 {
        let z = (beta - self.beta0) / self.width;
        self.amplitude * (self.mode as f64 * gamma).cos() * (-z * z).exp()
    }

    /// Problems with the bump; it must decay well before the wall (`β₀ + 3s < π/2`).
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !self.amplitude.is_finite() {
            problems.push(format!("perturbation amplitude must be finite, got {}", self.amplitude));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            problems.push(format!("perturbation width must be positive, got {}", self.width));
        }
        if !(self.beta0 >= 0.0) {
            problems.push(format!("perturbation beta0 must be non-negative, got {}", self.beta0));
        }
        if !(self.beta0 + 3.0 * self.width < std::f64::consts::FRAC_PI_2) {
            problems.push(format!(
                "perturbation must vanish near the wall: beta0 + 3 width = {} is not below pi/2",
                self.beta0 + 3.0 * self.width
            ));
        }
        problems
    }
}

impl SurfaceState {
    /// The cap `spec` with `log ρ` raised by `bump`.
    pub fn perturbed_cap(grid: Grid, spec: &CapSpec, bump: &Perturbation) -> Result<Self> {
        let amb = AmbientParams::new(spec.c, spec.theta)?;
        let values = grid
            .nodes()
            .map(|(i, j)| {
                let p = PolarPoint::new(grid.beta(i), grid.gamma(j));
                cap_radial_at(p, spec).ln() + bump.eval(p.beta, p.gamma)
            })
            .collect();
        Self::new(grid, amb, values, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_amplitude_is_the_cap() {
        let spec = CapSpec::centered(2.0, 1.0, 1.1).unwrap();
        let grid = Grid::new(8, 16).unwrap();
        let bump = Perturbation {
            amplitude: 0.0,
            mode: 2,
            beta0: PI / 4.0,
            width: 0.15,
        };
        let a = SurfaceState::perturbed_cap(grid.clone(), &spec, &bump).unwrap();
        let b = SurfaceState::from_cap(grid, &spec).unwrap();
        assert_eq!(a.u.values(), b.u.values());
    }

    #[test]
    fn bump_must_clear_the_wall() {
        let ok = Perturbation {
            amplitude: 0.05,
            mode: 2,
            beta0: PI / 4.0,
            width: 0.15,
        };
        assert!(ok.validate().is_empty());
        let wide = Perturbation { width: 0.3, ..ok };
        assert_eq!(wide.validate().len(), 1);
        assert_eq!(ok.eval(PI / 4.0, 0.0), 0.05);
        assert!((ok.eval(PI / 4.0, PI / 2.0) + 0.05).abs() < 1e-15);
    }
}
