use crate::error::{CapflowError, Result};

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to relative tolerance `rtol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // an absolute floor keeps integrands that vanish identically from recursing forever
    let tol = (rtol * whole.abs()).max(f64::MIN_POSITIVE);
    refine(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn refine(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `∫₀^ρ s² / (c + a s)³ ds`, the hyperbolic volume of a radial segment per unit solid angle.
pub fn ray_volume(c: f64, a: f64, rho: f64, rtol: f64) -> Result<f64> {
    let end = c + a * rho;
    if end <= 0.0 || c <= 0.0 {
        return Err(CapflowError::NonpositiveHeight { x3: end.min(c) });
    }
    Ok(adaptive_simpson(
        |s| {
            let x3 = c + a * s;
            s * s / (x3 * x3 * x3)
        },
        0.0,
        rho,
        rtol,
    ))
}
