use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::initial::Perturbation;
use super::operator::{linearize_pointwise, qc_pointwise};
use super::state::SurfaceState;
use crate::error::Result;
use crate::geometry::{AmbientParams, CapSpec};
use crate::grid::Grid;

/// Worst relative error of each coefficient family of [`linearize_pointwise`]
/// against finite differences of [`qc_pointwise`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub d_lambda: f64,
    pub d_psi: f64,
    pub d_rho: f64,
    pub d_beta: f64,
    pub d_gamma: f64,
    pub samples: usize,
}

impl DerivativeCheck {
    pub fn worst(&self) -> f64 {
        [self.d_lambda, self.d_psi, self.d_rho, self.d_beta, self.d_gamma]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Errors are measured as `|a − d| / max(|d|, DERIVATIVE_FLOOR)`.
pub const DERIVATIVE_FLOOR: f64 = 1e-3;

/// Richardson-extrapolated central difference.
fn derivative(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-3 * x.abs().max(1.0);
    let central = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * central(0.5 * h) - central(h)) / 3.0
}

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(DERIVATIVE_FLOOR)
}

fn random_state(rng: &mut ChaCha8Rng, grid: &Grid) -> Result<SurfaceState> {
    let theta = rng.gen_range(0.25..0.75) * std::f64::consts::PI;
    let c = rng.gen_range(1.5..3.0);
    let spec = CapSpec::centered(c, rng.gen_range(0.5..1.0), theta)?;
    let width = rng.gen_range(0.1..0.2);
    let bump = Perturbation {
        amplitude: rng.gen_range(-0.1..0.1),
        mode: rng.gen_range(1..5),
        beta0: rng.gen_range(0.2..(std::f64::consts::FRAC_PI_2 - 3.0 * width - 0.05)),
        width,
    };
    SurfaceState::perturbed_cap(grid.clone(), &spec, &bump)
}

/// Compare every linearization coefficient with finite differences at
/// `nodes` random nodes of each of `states` random perturbed caps.
pub fn derivative_check(seed: u64, states: usize, nodes: usize) -> Result<DerivativeCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(24, 48)?;
    let mut out = DerivativeCheck::default();
    for _ in 0..states {
        let state = random_state(&mut rng, &grid)?;
        let amb: AmbientParams = state.amb;
        for _ in 0..nodes {
            let (i, j) = (rng.gen_range(0..grid.n_beta), rng.gen_range(0..grid.n_gamma));
            let jet = state.u.jet_at(&grid, i, j)?;
            let (lam, psi) = (jet.hess, jet.grad);
            let (rho, beta, gamma) = (state.rho(i, j), grid.beta(i), grid.gamma(j));
            let lin = linearize_pointwise(&lam, &psi, rho, beta, gamma, &amb);

            for a in 0..2 {
                for b in 0..2 {
                    let fd = derivative(
                        |x| {
                            let mut l = lam;
                            l[a][b] = x;
                            qc_pointwise(&l, &psi, rho, beta, gamma, &amb)
                        },
                        lam[a][b],
                    );
                    out.d_lambda = out.d_lambda.max(rel_err(lin.d_lambda[a][b], fd));
                }
                let fd = derivative(
                    |x| {
                        let mut p = psi;
                        p[a] = x;
                        qc_pointwise(&lam, &p, rho, beta, gamma, &amb)
                    },
                    psi[a],
                );
                out.d_psi = out.d_psi.max(rel_err(lin.d_psi[a], fd));
            }
            let fd = derivative(|x| qc_pointwise(&lam, &psi, x, beta, gamma, &amb), rho);
            out.d_rho = out.d_rho.max(rel_err(lin.d_rho, fd));
            let fd = derivative(|x| qc_pointwise(&lam, &psi, rho, x, gamma, &amb), beta);
            out.d_beta = out.d_beta.max(rel_err(lin.d_beta, fd));
            let fd = derivative(|x| qc_pointwise(&lam, &psi, rho, beta, x, &amb), gamma);
            out.d_gamma = out.d_gamma.max(rel_err(lin.d_gamma, fd));
            out.samples += 1;
        }
    }
    Ok(out)
}
