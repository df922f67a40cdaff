//! Integral diagnostics against Monte-Carlo oracles, isometry invariance,
//! refinement studies and the energy-rate identity.

use std::f64::consts::{FRAC_PI_2, PI};

use capflow::diagnostics::{
    enclosed_volume, energy_rate, extremal_cap_radii, hyperbolic_area, minkowski_residual, wetting_area,
};
use capflow::flow::{rhs_qc, Perturbation, SurfaceState};
use capflow::geometry::{AmbientParams, CapSpec};
use capflow::grid::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cap(nb: usize, c: f64, r: f64, theta: f64) -> SurfaceState {
    SurfaceState::from_cap(Grid::new(nb, 2 * nb).unwrap(), &CapSpec::centered(c, r, theta).unwrap()).unwrap()
}

fn bump(amplitude: f64) -> Perturbation {
    Perturbation {
        amplitude,
        mode: 2,
        beta0: PI / 4.0,
        width: 0.15,
    }
}

fn perturbed(nb: usize, theta: f64, amplitude: f64) -> SurfaceState {
    let spec = CapSpec::centered(2.0, 1.0, theta).unwrap();
    SurfaceState::perturbed_cap(Grid::new(nb, 2 * nb).unwrap(), &spec, &bump(amplitude)).unwrap()
}

/// Mean and standard error of `f` over uniform samples of a box.
fn monte_carlo(n: usize, seed: u64, lo: [f64; 3], hi: [f64; 3], f: impl Fn([f64; 3]) -> f64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vol: f64 = (0..3).map(|k| hi[k] - lo[k]).product();
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let x = [0, 1, 2].map(|k| rng.gen_range(lo[k]..hi[k]));
        let y = f(x);
        s += y;
        s2 += y * y;
    }
    let mean = s / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    (vol * mean, vol * (var / n as f64).sqrt())
}

#[test]
fn hemisphere_volume_agrees_with_monte_carlo() {
    let (c, r) = (2.0, 1.0);
    let quad = enclosed_volume(&cap(128, c, r, FRAC_PI_2)).unwrap();
    let (mc, sigma) = monte_carlo(10_000_000, 1, [0.0, -r, c - r], [r, r, c + r], |x| {
        let d2 = x[0] * x[0] + x[1] * x[1] + (x[2] - c) * (x[2] - c);
        if d2 < r * r {
            x[2].powi(-3)
        } else {
            0.0
        }
    });
    assert!(
        (quad - mc).abs() <= 3.0 * sigma,
        "quadrature {quad}, Monte-Carlo {mc} ± {sigma}"
    );
}

#[test]
fn hemisphere_wetting_agrees_with_monte_carlo() {
    let (c, r) = (2.0, 1.0);
    let quad = wetting_area(&cap(64, c, r, FRAC_PI_2)).unwrap();
    let (mc, sigma) = monte_carlo(4_000_000, 2, [0.0, -r, c - r], [1.0, r, c + r], |x| {
        if x[1] * x[1] + (x[2] - c) * (x[2] - c) < r * r {
            x[2].powi(-2)
        } else {
            0.0
        }
    });
    assert!(
        (quad - mc).abs() <= 3.0 * sigma,
        "quadrature {quad}, Monte-Carlo {mc} ± {sigma}"
    );
}

#[test]
fn integrals_are_scaling_invariant() {
    for theta in [PI / 3.0, FRAC_PI_2, 2.0 * PI / 3.0] {
        let a = cap(64, 2.0, 1.0, theta);
        let b = cap(64, 4.0, 2.0, theta);
        for (x, y) in [
            (hyperbolic_area(&a).unwrap(), hyperbolic_area(&b).unwrap()),
            (enclosed_volume(&a).unwrap(), enclosed_volume(&b).unwrap()),
            (wetting_area(&a).unwrap(), wetting_area(&b).unwrap()),
        ] {
            assert!((x - y).abs() <= 1e-10 * x.abs(), "{x} vs {y}");
        }
    }
}

#[test]
fn hemisphere_area_matches_half_sphere() {
    // half of a hyperbolic sphere of radius r, cosh r = c / √(c² − R²)
    let (c, r): (f64, f64) = (2.0, 1.0);
    let rad = (c / (c * c - r * r).sqrt()).acosh();
    let exact = 2.0 * PI * rad.sinh().powi(2);
    let area = hyperbolic_area(&cap(128, c, r, FRAC_PI_2)).unwrap();
    assert!((area - exact).abs() <= 1e-3 * exact, "{area} vs {exact}");
}

#[test]
fn cap_area_converges_at_second_order() {
    let areas: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&nb| hyperbolic_area(&cap(nb, 2.0, 1.0, 1.2)).unwrap())
        .collect();
    let ratio = (areas[0] - areas[1]) / (areas[1] - areas[2]);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn minkowski_residual_converges_on_perturbed_capillary_state() {
    let res: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&nb| minkowski_residual(&perturbed(nb, PI / 3.0, 0.05), 1).unwrap())
        .collect();
    let order = |a: f64, b: f64| (a.abs() / b.abs()).log2();
    for w in res.windows(2) {
        let p = order(w[0], w[1]);
        assert!((1.6..=2.4).contains(&p), "{res:?}");
    }
}

#[test]
fn minkowski_residual_detects_wrong_contact_angle() {
    // a hemisphere meets the wall at π/2; declaring θ = π/3 breaks the identity
    let residual = |nb: usize| {
        let grid = Grid::new(nb, 2 * nb).unwrap();
        let amb = AmbientParams::new(2.0, PI / 3.0).unwrap();
        let state = SurfaceState::new(grid.clone(), amb, vec![0.0; grid.len()], 0.0).unwrap();
        minkowski_residual(&state, 1).unwrap().abs()
    };
    let (coarse, fine) = (residual(32), residual(64));
    assert!(fine > 1e-2 && fine > 0.5 * coarse, "{coarse} {fine}");
}

#[test]
fn energy_variation_matches_time_difference() {
    // E(u + δ Q) − E(u − δ Q) over 2δ against ∫ H q_c dA
    let gap = |nb: usize| {
        let s = perturbed(nb, PI / 3.0, 0.05);
        let q = rhs_qc(&s).unwrap();
        let d = 1e-5;
        let energy = |sign: f64| {
            let v =
                s.u.values()
                    .iter()
                    .zip(q.values())
                    .map(|(a, b)| a + sign * d * b)
                    .collect();
            energy_rate(&s.with_values(v, 0.0).unwrap()).unwrap().energy
        };
        let fd = (energy(1.0) - energy(-1.0)) / (2.0 * d);
        let r = energy_rate(&s).unwrap();
        ((fd - r.variation) / fd).abs()
    };
    let (coarse, fine) = (gap(32), gap(64));
    assert!(fine < 5e-2, "{fine}");
    assert!(fine < 0.4 * coarse, "{coarse} {fine}");
}

#[test]
fn rate_identity_gap_at_moderate_resolution() {
    let r = energy_rate(&perturbed(64, PI / 3.0, 0.05)).unwrap();
    assert!(r.variation < 0.0);
    assert!(r.gap <= 5e-2, "{r:?}");
}

#[test]
fn extremal_radius_grows_linearly_with_bump() {
    let excess = |eps: f64| extremal_cap_radii(&perturbed(32, PI / 3.0, eps)).unwrap().0 - 1.0;
    let (a, b, c) = (excess(0.01), excess(0.02), excess(0.04));
    assert!(a > 0.0);
    assert!((b / a - 2.0).abs() < 0.1 && (c / b - 2.0).abs() < 0.1, "{a} {b} {c}");
}
