use std::f64::consts::PI;

use choquard::corpus::{corpus_ball, rearrangement_inputs, talenti_sources, CORPUS_GRID};
use choquard::energy::l2_norm_sq;
use choquard::grid3d::{radial_deviation, GridFunction3D};
use choquard::quadrature::integrate;
use choquard::rearrange::{rearrange_grid3d, rearrange_radial, rearrangement_energy_check, talenti_check, RearrangementInput};
use choquard::{BallSpec, Dimension, RadialGrid, RadialProfile};
use proptest::prelude::*;

fn ball(r: f64) -> BallSpec {
    BallSpec::new(Dimension::new(3).unwrap(), r).unwrap()
}

/// `a + b·exp(−(r−c)²)`, a single bump that may sit away from the origin.
fn shell(a: f64, b: f64, c: f64, intervals: usize) -> RadialProfile {
    RadialProfile::from_fn(RadialGrid::uniform(4.0, intervals).unwrap(), ball(4.0), |r| a + b * (-(r - c) * (r - c)).exp(), None)
        .unwrap()
}

fn lp(p: &RadialProfile, exp: f64) -> f64 {
    let f: Vec<f64> = p.nodes().iter().zip(p.values()).map(|(r, v)| v.abs().powf(exp) * r * r).collect();
    4.0 * PI * integrate(p.nodes(), &f)
}

/// Volume of `{φ > t}` by fine sampling of the exact profile.
fn level_volume(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let n = 200_000;
    let h = 4.0 / n as f64;
    (0..n)
        .map(|k| {
            let r = (k as f64 + 0.5) * h;
            if f(r) > t { 4.0 * PI * r * r * h } else { 0.0 }
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rearrangement_is_decreasing_and_idempotent(b in 0.1f64..3.0, c in 0.0f64..3.5) {
        let p = shell(0.05, b, c, 800);
        let s = rearrange_radial(&p).unwrap();
        prop_assert!(s.values().windows(2).all(|w| w[1] <= w[0]));
        let again = rearrange_radial(&s).unwrap();
        prop_assert_eq!(again.values(), s.values());
    }

    #[test]
    fn lp_norms_are_preserved(b in 0.1f64..3.0, c in 0.5f64..3.0, exp in 1.0f64..4.0) {
        let p = shell(0.05, b, c, 1600);
        let s = rearrange_radial(&p).unwrap();
        prop_assert!((lp(&s, exp) / lp(&p, exp) - 1.0).abs() < 5e-3);
    }

    #[test]
    fn rearrangement_preserves_order(b in 0.1f64..3.0, c in 0.5f64..3.0, extra in 0.0f64..1.0) {
        let lo = shell(0.05, b, c, 800);
        let hi = lo.map_values(|r, v| v + extra * (-r).exp());
        let (sl, sh) = (rearrange_radial(&lo).unwrap(), rearrange_radial(&hi).unwrap());
        let worst = sl.values().iter().zip(sh.values()).map(|(a, b)| a - b).fold(f64::MIN, f64::max);
        // exact in the continuum; the discrete placement interpolates, so allow one step times the slope
        let h = 4.0 / 800.0;
        prop_assert!(worst <= h * (b + extra), "worst {}", worst);
    }
}

#[test]
fn level_sets_are_equimeasurable() {
    let (b, c) = (1.0, 2.0);
    let f = move |r: f64| 0.05 + b * (-(r - c) * (r - c)).exp();
    let p = shell(0.05, b, c, 4000);
    let s = rearrange_radial(&p).unwrap();
    for t in [0.1, 0.3, 0.6, 0.9] {
        let want = level_volume(f, t);
        let got = level_volume(|r| s.eval(r), t);
        assert!((got / want - 1.0).abs() < 5e-3, "t={t}: {got} vs {want}");
    }
}

#[test]
fn negative_values_are_rejected() {
    let p = shell(-0.5, 0.1, 1.0, 50);
    assert!(rearrange_radial(&p).is_err());
}

#[test]
fn off_center_indicator_becomes_a_centred_ball() {
    let b = ball(2.0);
    let u = GridFunction3D::from_fn(b, 41, |p| {
        let d = ((p[0] - 0.8).powi(2) + p[1] * p[1] + p[2] * p[2]).sqrt();
        if d < 0.6 { 1.0 } else { 0.0 }
    })
    .unwrap();
    let count = u.values().iter().filter(|&&v| v == 1.0).count() as f64;
    let radius = (count * u.h().powi(3) * 3.0 / (4.0 * PI)).cbrt();
    let s = rearrange_grid3d(&u).unwrap();
    assert!(s.values().windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(s.eval(0.0), 1.0);
    assert!(s.eval(radius - 2.0 * u.h()) > 0.99);
    assert!(s.eval(radius + 2.0 * u.h()) < 0.01);
    assert!((radius / 0.6 - 1.0).abs() < 0.05);
}

#[test]
fn talenti_holds_on_the_corpus_sample() {
    let b = corpus_ball();
    for f in talenti_sources(4, 3).unwrap() {
        let rep = talenti_check(&f, &b).unwrap();
        assert!(rep.pass, "margin {} tol {}", rep.margin, rep.tolerance);
    }
}

#[test]
fn talenti_is_sharp_for_radial_sources() {
    let b = ball(1.0);
    let f = GridFunction3D::from_fn(b, 33, |_| 1.0).unwrap();
    let rep = talenti_check(&f, &b).unwrap();
    assert!(rep.pass);
    assert!(rep.margin.abs() < rep.tolerance);
    let wrong = ball(2.0);
    assert!(talenti_check(&f, &wrong).is_err());
}

#[test]
fn rearrangement_energy_inequalities_on_the_corpus_sample() {
    let b = corpus_ball();
    for input in rearrangement_inputs(8, 5).unwrap() {
        let rep = rearrangement_energy_check(&input, &b).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn decreasing_radial_input_is_its_own_rearrangement() {
    let p = RadialProfile::from_fn(RadialGrid::uniform(5.0, 400).unwrap(), corpus_ball(), |r| (-r).exp(), None).unwrap();
    let rep = rearrangement_energy_check(&RearrangementInput::Radial(p.clone()), &corpus_ball()).unwrap();
    assert!(rep.pass && rep.margin.abs() < 1e-12);
    assert_eq!(rearrange_radial(&p).unwrap().values(), p.values());
    assert!(l2_norm_sq(&p) > 0.0);
    let _ = CORPUS_GRID;
}

#[test]
fn shell_indicator_becomes_a_ball_of_equal_volume() {
    let r = 4.0;
    let p = RadialProfile::from_fn(RadialGrid::uniform(r, 4000).unwrap(), ball(r), |s| if s >= r / 2.0 { 1.0 } else { 0.0 }, None)
        .unwrap();
    let s = rearrange_radial(&p).unwrap();
    let edge = r * (7.0f64 / 8.0).cbrt();
    let h = r / 4000.0;
    assert!(s.eval(edge - 2.0 * h) > 0.99 && s.eval(edge + 2.0 * h) < 0.01);
}

#[test]
fn constant_grid_field_rearranges_to_a_constant() {
    let u = GridFunction3D::from_fn(ball(1.0), 33, |_| 2.5).unwrap();
    assert!(rearrange_grid3d(&u).unwrap().values().iter().all(|&v| v == 2.5));
    assert!(radial_deviation(&u).unwrap() < 1e-14);
}

#[test]
fn grid_superlevel_volumes_match_by_counting() {
    let b = ball(2.0);
    let u = GridFunction3D::from_fn(b, 41, |p| {
        let d2 = (p[0] - 0.5).powi(2) + (p[1] + 0.3).powi(2) + p[2] * p[2];
        (-d2).exp() * (1.0 - (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / 4.0)
    })
    .unwrap();
    let s = rearrange_grid3d(&u).unwrap();
    let h = u.h();
    let max = u.max_abs();
    for k in 1..=10 {
        let t = max * k as f64 / 11.0;
        let counted = u.values().iter().zip(u.mask()).filter(|(v, m)| **m && **v > t).count() as f64 * h.powi(3);
        // radius where the rearranged profile drops through t
        let i = s.values().iter().position(|&v| v <= t).unwrap_or(s.len() - 1);
        let rad = s.nodes()[i.max(1) - 1] + (s.nodes()[i] - s.nodes()[i.max(1) - 1]) * 0.5;
        let vol = 4.0 * PI / 3.0 * rad.powi(3);
        let surface = 4.0 * PI * rad * rad;
        assert!((vol - counted).abs() <= 2.0 * h * surface, "t={t}: {vol} vs {counted}");
    }
}

#[test]
fn odd_field_has_no_radial_part() {
    let u = GridFunction3D::from_fn(ball(2.0), 41, |p| p[0] * (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])).exp()).unwrap();
    assert!(radial_deviation(&u).unwrap() > 0.95);
}

#[test]
fn off_center_source_leaves_a_strict_margin() {
    let b = ball(2.0);
    let f = GridFunction3D::from_fn(b, 41, |p| {
        let d2 = (p[0] - 1.0).powi(2) + p[1] * p[1] + p[2] * p[2];
        (-4.0 * d2).exp()
    })
    .unwrap();
    let rep = talenti_check(&f, &b).unwrap();
    assert!(rep.pass);
    // u* peaks at the origin with max u; the radial solution is strictly above it there
    assert!(rep.details["v_at_origin"] > rep.details["max_u"] * 1.01, "{:?}", rep.details);
}

#[test]
fn two_bumps_gain_interaction_after_rearrangement() {
    let b = ball(3.0);
    let u = GridFunction3D::from_fn(b, 41, |p| {
        let bump = |c: f64| (-2.0 * ((p[0] - c).powi(2) + p[1] * p[1] + p[2] * p[2])).exp();
        (bump(1.2) + bump(-1.2)) * (1.0 - (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / 9.0)
    })
    .unwrap();
    let rep = rearrangement_energy_check(&RearrangementInput::Grid(u), &b).unwrap();
    assert!(rep.pass, "{rep:?}");
    let d = &rep.details;
    assert!(d["dd_star"] > d["dd"] * 1.01, "{d:?}");
    assert!(d["grad_sq_star"] < d["grad_sq"] * 0.99, "{d:?}");
}
