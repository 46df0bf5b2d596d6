use choquard::energy::{energy, h1_norm_sq, nehari_scale, smallest_eigenvalue};
use choquard::kernel::{lambda_of, u_potential};
use choquard::shooting::{canonical_solution, integrate_trajectory, lambda_from_crossing};
use choquard::solver::{pde_residual, rescale_to_ball, solve_ball, solve_ball_with, solve_whole_space, solve_whole_space_with, AmplitudeScan};
use choquard::{BallSpec, CanonicalSolution, Dimension, Tolerances, TrajectoryOutcome};
use proptest::prelude::*;

fn dim(n: u32) -> Dimension {
    Dimension::new(n).unwrap()
}

fn tol() -> Tolerances {
    Tolerances::default()
}

#[test]
fn tiny_amplitude_crosses_near_pi_in_3d() {
    match integrate_trajectory(1e-3, dim(3), 50.0, &tol()).unwrap() {
        TrajectoryOutcome::CrossesZero { r0, state_at_r0, .. } => {
            assert!((r0 - std::f64::consts::PI).abs() < 1e-4, "r0 = {r0}");
            assert!(state_at_r0.dphi < 0.0 && state_at_r0.phi.abs() < 1e-12);
        }
        o => panic!("unexpected {o:?}"),
    }
}

#[test]
fn huge_amplitude_diverges() {
    assert!(matches!(
        integrate_trajectory(1e3, dim(3), 200.0, &tol()).unwrap(),
        TrajectoryOutcome::Diverges { .. }
    ));
}

#[test]
fn closed_form_multiplier_examples() {
    let sol = canonical_solution(0.3, dim(3), &tol()).unwrap().unwrap();
    for (u, lam) in [(2.0, 1.0), (1.5, 2.0)] {
        let s = CanonicalSolution { u_at_r0: u, ..sol.clone() };
        assert!((lambda_from_crossing(&s).unwrap() - lam).abs() < 1e-15);
    }
    let s = CanonicalSolution { u_at_r0: 0.9, ..sol };
    assert!(lambda_from_crossing(&s).is_err());
}

#[test]
fn rescaled_crossings_satisfy_the_multiplier_identity() {
    for a in [0.25, 0.29, 0.3, 0.305] {
        let sol = canonical_solution(a, dim(3), &tol()).unwrap().unwrap();
        if sol.u_at_r0 <= 1.0 {
            assert!(rescale_to_ball(&sol).is_err(), "a={a}");
            continue;
        }
        let gs = rescale_to_ball(&sol).unwrap();
        let lam = lambda_of(&gs.profile, &gs.ball);
        assert!((gs.lambda / lam - 1.0).abs() < 1e-8, "a={a}: {} vs {lam}", gs.lambda);
        assert!(pde_residual(&gs) < 1e-6 * gs.profile.max_abs());
        assert!(gs.profile.values().windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn forward_scaling_recovers_the_canonical_profile() {
    let sol = canonical_solution(0.3, dim(3), &tol()).unwrap().unwrap();
    let gs = rescale_to_ball(&sol).unwrap();
    let (lam, s) = (gs.lambda, gs.lambda.sqrt());
    for k in 0..=50 {
        let x = gs.ball.radius() * k as f64 / 50.0;
        let back = gs.profile.eval(x) / lam;
        assert!((back - sol.profile.eval(x * s)).abs() < 1e-10 * sol.amplitude);
    }
}

#[test]
fn ground_states_satisfy_the_basic_identities() {
    for (n, r) in [(3, 5.0), (4, 2.0), (5, 5.0)] {
        let b = BallSpec::new(dim(n), r).unwrap();
        let gs = solve_ball(&b, &tol()).unwrap();
        assert!(gs.lambda > 0.0);
        assert!(gs.uniqueness_guaranteed);
        let p = &gs.profile;
        assert!(p.values()[..p.len() - 1].iter().all(|&v| v > 0.0));
        assert!(p.nodal_derivatives().iter().all(|&d| d <= 1e-12));
        assert!((gs.energy / (h1_norm_sq(p) / 4.0) - 1.0).abs() < 1e-12);
        assert!((gs.energy / energy(p, &gs.ball) - 1.0).abs() < 1e-8);
        let rep = nehari_scale(p, &gs.ball).unwrap();
        assert!((rep.t_u - 1.0).abs() < 1e-6, "t_u = {}", rep.t_u);
        assert!((rep.energy_at_projection / gs.energy - 1.0).abs() < 1e-6);
    }
}

#[test]
fn canonical_potential_dominates_trial_functions() {
    let b = BallSpec::new(dim(3), 5.0).unwrap();
    let gs = solve_ball(&b, &tol()).unwrap();
    let c = gs.canonical.unwrap();
    let u = u_potential(&c.profile);
    assert!((smallest_eigenvalue(&u, c.r0, dim(3)).unwrap() - 1.0).abs() < 1e-3);
    // A_φ(v) ≥ ‖v‖² for the trial v(r) = 1 − (r/r0)², by quadrature in r
    let n = 4000;
    let h = c.r0 / n as f64;
    let (mut a, mut l2) = (0.0, 0.0);
    for k in 0..n {
        let r = (k as f64 + 0.5) * h;
        let v = 1.0 - (r / c.r0).powi(2);
        let dv = -2.0 * r / (c.r0 * c.r0);
        a += (dv * dv + u.eval(r) * v * v) * r * r * h;
        l2 += v * v * r * r * h;
    }
    assert!(a >= l2 * (1.0 - 1e-6), "{a} < {l2}");
}

#[test]
fn shooting_map_is_monotone_on_sampled_amplitudes() {
    let mut prev = 0.0;
    for k in 0..12 {
        let a = 0.2 + 0.009 * k as f64;
        let Some(sol) = canonical_solution(a, dim(3), &tol()).unwrap() else {
            break;
        };
        if sol.u_at_r0 > 1.0 {
            let r = sol.r0 * (sol.u_at_r0 - 1.0).sqrt();
            assert!(r > prev, "R({a}) = {r} not above {prev}");
            prev = r;
        }
    }
    assert!(prev > 0.0);
}

#[test]
fn ball_energies_exceed_the_whole_space_level() {
    let inf = solve_whole_space(dim(3), &tol()).unwrap();
    assert!(inf.ball.is_whole_space());
    for r in [2.0, 5.0, 10.0] {
        let gs = solve_ball(&BallSpec::new(dim(3), r).unwrap(), &tol()).unwrap();
        assert!(gs.energy > inf.energy, "c_{r} = {} vs {}", gs.energy, inf.energy);
    }
}

#[test]
fn whole_space_profile_has_a_log_concave_tail() {
    let inf = solve_whole_space(dim(3), &tol()).unwrap();
    let p = &inf.profile;
    assert!(p.values().iter().all(|&v| v > 0.0));
    assert!(p.values().windows(2).all(|w| w[1] <= w[0]));
    let end = p.end();
    let logs: Vec<f64> = (0..=40).map(|k| p.eval(end * (0.6 + 0.35 * k as f64 / 40.0)).ln()).collect();
    assert!(logs.windows(2).all(|w| w[1] < w[0]));
    assert!(logs.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] <= 1e-9));
}

#[test]
fn separatrix_amplitude_does_not_depend_on_the_bracket() {
    let a = solve_whole_space(dim(4), &tol()).unwrap();
    let b = solve_whole_space_with(dim(4), &tol(), &AmplitudeScan::shifted(0.37)).unwrap();
    assert!((a.amplitude / b.amplitude - 1.0).abs() < 1e-7);
}

#[test]
fn larger_dimensions_are_flagged() {
    let gs = solve_ball(&BallSpec::new(dim(7), 2.0).unwrap(), &tol());
    if let Ok(gs) = gs {
        assert!(!gs.uniqueness_guaranteed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trajectories_keep_monotone_moments(a in 0.01f64..2.0, n in 3u32..7) {
        if let TrajectoryOutcome::CrossesZero { profile, state_at_r0, .. } = integrate_trajectory(a, dim(n), 60.0, &tol()).unwrap() {
            prop_assert!(state_at_r0.q >= 0.0 && state_at_r0.m >= 0.0);
            prop_assert!(state_at_r0.potential(dim(n)) >= 0.0);
            prop_assert!(profile.values()[..profile.len() - 1].iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn disjoint_scans_agree(r in 1.0f64..8.0) {
        let b = BallSpec::new(dim(3), r).unwrap();
        let x = solve_ball(&b, &tol()).unwrap();
        let y = solve_ball_with(&b, &tol(), &AmplitudeScan::shifted(0.5)).unwrap();
        prop_assert!((x.amplitude / y.amplitude - 1.0).abs() < 1e-8);
    }
}
