//! Properties of the discrete flow: symmetries, static caps, energy decay and
//! an end-to-end convergence run on a coarse grid.

use std::f64::consts::{FRAC_PI_2, PI};

use capflow::diagnostics::{energy_rate, fit_cap, record};
use capflow::flow::{
    cfl_dt, flow_velocity, rhs_qc, run, step_rk2, Perturbation, StepPolicy, SurfaceState, Termination,
};
use capflow::geometry::CapSpec;
use capflow::grid::Grid;
use proptest::prelude::*;

fn bump(amplitude: f64, mode: u32) -> Perturbation {
    Perturbation {
        amplitude,
        mode,
        beta0: PI / 4.0,
        width: 0.15,
    }
}

fn perturbed(nb: usize, c: f64, r: f64, theta: f64, b: &Perturbation) -> SurfaceState {
    let spec = CapSpec::centered(c, r, theta).unwrap();
    SurfaceState::perturbed_cap(Grid::new(nb, 2 * nb).unwrap(), &spec, b).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn cfl_step_of_reference_hemisphere() {
    let s = perturbed(32, 2.0, 1.0, FRAC_PI_2, &bump(0.0, 0));
    let dt = cfl_dt(
        &s,
        &StepPolicy {
            t_max: 1e9,
            ..StepPolicy::default()
        },
    );
    assert!((dt - 2.867251327357922e-7).abs() <= 1e-12 * dt, "{dt:?}");
}

#[test]
fn one_step_decreases_the_energy() {
    let s = perturbed(16, 2.0, 1.0, PI / 3.0, &bump(0.05, 2));
    let dt = cfl_dt(
        &s,
        &StepPolicy {
            t_max: 1e9,
            ..StepPolicy::default()
        },
    );
    let next = step_rk2(&s, dt).unwrap();
    let (e0, e1) = (energy_rate(&s).unwrap().energy, energy_rate(&next).unwrap().energy);
    assert!(e1 < e0, "{e0} -> {e1}");
}

#[test]
fn static_cap_stays_within_truncation_level() {
    let s = perturbed(16, 2.0, 1.0, 2.0 * PI / 3.0, &bump(0.0, 0));
    let truncation = rhs_qc(&s).unwrap().max_abs();
    let policy = StepPolicy::default();
    let out = run(s.clone(), &policy, 0).unwrap();
    let drift = max_diff(s.u.values(), out.state.u.values());
    assert!(drift <= 10.0 * policy.t_max * truncation, "{drift} vs {truncation}");
}

#[test]
fn coarse_perturbed_cap_converges_to_a_cap() {
    let s = perturbed(16, 2.0, 1.0, PI / 3.0, &bump(0.05, 2));
    let v0 = record(&s, 0.0).unwrap().volume;
    let policy = StepPolicy {
        t_max: 20.0,
        ..StepPolicy::default()
    };
    let out = run(s, &policy, 25).unwrap();
    assert_eq!(out.termination, Termination::Steady);
    let last = out.records.last().unwrap();
    assert!(((last.volume - v0) / v0).abs() < 1e-6);
    assert!(last.umb_max < 5e-3, "{}", last.umb_max);
    let fit = fit_cap(&out.state).unwrap();
    assert!((fit.radius - 1.0).abs() < 5e-3, "{fit:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_is_invariant_under_scaling(
        r in 0.4f64..1.0, theta in 0.6f64..2.5, amp in -0.08f64..0.08, mode in 0u32..4, lambda in 0.3f64..3.0,
    ) {
        let a = perturbed(12, 2.0, r, theta, &bump(amp, mode));
        let b = perturbed(12, 2.0 * lambda, r * lambda, theta, &bump(amp, mode));
        let (qa, qb) = (flow_velocity(&a, true).unwrap(), flow_velocity(&b, true).unwrap());
        let scale = qa.max_abs().max(1.0);
        prop_assert!(max_diff(qa.values(), qb.values()) <= 1e-11 * scale);
    }

    #[test]
    fn flow_commutes_with_reflection(
        r in 0.4f64..1.0, theta in 0.6f64..2.5, amp in -0.08f64..0.08, mode in 1u32..4, phase in 0.0f64..6.3,
    ) {
        let spec = CapSpec::centered(2.0, r, theta).unwrap();
        let grid = Grid::new(12, 24).unwrap();
        let cap = SurfaceState::from_cap(grid.clone(), &spec).unwrap();
        let field = |sign: f64| -> Vec<f64> {
            grid.nodes()
                .map(|(i, j)| {
                    let z = (grid.beta(i) - PI / 4.0) / 0.15;
                    cap.u.get(i, j) + amp * (mode as f64 * sign * grid.gamma(j) + phase).cos() * (-z * z).exp()
                })
                .collect()
        };
        let a = cap.with_values(field(1.0), 0.0).unwrap();
        let b = cap.with_values(field(-1.0), 0.0).unwrap();
        let (qa, qb) = (rhs_qc(&a).unwrap(), rhs_qc(&b).unwrap());
        let ng = grid.n_gamma;
        let worst = grid.nodes().fold(0.0f64, |m, (i, j)| m.max((qa.get(i, j) - qb.get(i, (ng - j) % ng)).abs()));
        prop_assert!(worst <= 1e-10 * qa.max_abs().max(1.0), "{}", worst);
    }

    #[test]
    fn caps_are_nearly_static(c in 1.5f64..4.0, frac in 0.3f64..0.9, theta in 0.5f64..2.6) {
        let r = frac * c;
        prop_assume!(CapSpec::centered(c, r, theta).unwrap().is_compact());
        let q = |nb: usize| rhs_qc(&perturbed(nb, c, r, theta, &bump(0.0, 0))).unwrap().max_abs();
        let (coarse, fine) = (q(16), q(32));
        prop_assert!(fine <= 0.4 * coarse || fine < 1e-11, "{} {}", coarse, fine);
    }
}
