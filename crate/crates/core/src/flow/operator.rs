//! The scalar speed `Q_c` of the log-radial evolution and its partial derivatives.
//!
//! Arguments are taken in the orthonormal frame `{∂β, ∂γ / sin β}`: `lambda` is
//! the Hessian of `u`, `psi` its gradient. The height `x3 = c + ρ sin β cos γ`
//! is substituted, so `Q_c` is a function of `(λ, ψ, ρ, β, γ)` alone:
//!
//! ```text
//! Q_c = (nc/ρ)|ψ|²/v − (nc cos θ/ρ)(cos β + sin β ψ₁)
//!     + x3/(ρv) a^{ij}λ_ij + (n/v)(−cos β cos γ ψ₁ + sin γ ψ₂)
//! ```

use crate::geometry::{contract, AmbientParams};

/// `∂Q_c/∂(λ, ψ, ρ, β, γ)` at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Linearization {
    pub d_lambda: [[f64; 2]; 2],
    pub d_psi: [f64; 2],
    pub d_rho: f64,
    pub d_beta: f64,
    pub d_gamma: f64,
}

impl Linearization {
    /// Eigenvalues of the (symmetric) principal coefficient matrix, ascending.
    pub fn principal_eigenvalues(&self) -> [f64; 2] {
        let [[a, b], [_, d]] = self.d_lambda;
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mean - r, mean + r]
    }
}

#[inline]
pub fn qc_pointwise(
    lambda: &[[f64; 2]; 2],
    psi: &[f64; 2],
    rho: f64,
    beta: f64,
    gamma: f64,
    amb: &AmbientParams,
) -> f64 {
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    qc_trig(lambda, psi, rho, sb, cb, sg, cg, amb)
}

/// [`qc_pointwise`] with the trigonometric values supplied by the caller.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn qc_trig(
    lambda: &[[f64; 2]; 2],
    psi: &[f64; 2],
    rho: f64,
    sb: f64,
    cb: f64,
    sg: f64,
    cg: f64,
    amb: &AmbientParams,
) -> f64 {
    let nc = amb.nc();
    let n = amb.n as f64;
    let x3 = amb.c + rho * sb * cg;
    let p = psi[0] * psi[0] + psi[1] * psi[1];
    let v = (1.0 + p).sqrt();
    nc / rho * p / v - nc * amb.theta.cos() / rho * (cb + sb * psi[0])
        + x3 / (rho * v) * contract(lambda, psi)
        + n / v * (-cb * cg * psi[0] + sg * psi[1])
}

pub fn linearize_pointwise(
    lambda: &[[f64; 2]; 2],
    psi: &[f64; 2],
    rho: f64,
    beta: f64,
    gamma: f64,
    amb: &AmbientParams,
) -> Linearization {
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    let c = amb.c;
    let nc = amb.nc();
    let n = amb.n as f64;
    let ct = amb.theta.cos();
    let x3 = c + rho * sb * cg;

    let p = psi[0] * psi[0] + psi[1] * psi[1];
    let v2 = 1.0 + p;
    let v = v2.sqrt();
    let v3 = v2 * v;
    let l = contract(lambda, psi);
    let b_term = -cb * cg * psi[0] + sg * psi[1];
    let db = [-cb * cg, sg];

    let mut d_lambda = [[0.0; 2]; 2];
    for (i, row) in d_lambda.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            *e = x3 / (rho * v) * (delta - psi[i] * psi[j] / v2);
        }
    }

    let quad = psi[0] * (lambda[0][0] * psi[0] + lambda[0][1] * psi[1])
        + psi[1] * (lambda[1][0] * psi[0] + lambda[1][1] * psi[1]);
    let mut d_psi = [0.0; 2];
    for k in 0..2 {
        let row_k = lambda[k][0] * psi[0] + lambda[k][1] * psi[1];
        let col_k = lambda[0][k] * psi[0] + lambda[1][k] * psi[1];
        let dl = -(row_k + col_k) / v2 + 2.0 * psi[k] * quad / (v2 * v2);
        d_psi[k] = nc / rho * (2.0 * psi[k] / v - p * psi[k] / v3) + x3 / rho * (-psi[k] * l / v3 + dl / v)
            - n * psi[k] * b_term / v3
            + n / v * db[k];
    }
    d_psi[0] -= nc * ct * sb / rho;

    let rho2 = rho * rho;
    let d_rho = -nc / rho2 * p / v + nc * ct / rho2 * (cb + sb * psi[0]) - c / rho2 * l / v;
    let d_beta = cb * cg / v * l + nc * ct / rho * (sb - cb * psi[0]) + n / v * sb * cg * psi[0];
    let d_gamma = -sb * sg / v * l + n / v * (cb * sg * psi[0] + cg * psi[1]);

    Linearization {
        d_lambda,
        d_psi,
        d_rho,
        d_beta,
        d_gamma,
    }
}
