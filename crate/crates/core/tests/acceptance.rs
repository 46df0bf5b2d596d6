//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL` line with the measured values and tolerances.
//! Criteria run one at a time so the runtime budgets are measured fairly.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use choquard::corpus;
use choquard::energy::{dd_direct, dd_newton, smallest_eigenvalue};
use choquard::grid3d::{ground_state_iterate, radial_deviation, OracleOptions, OracleSeed};
use choquard::kernel::{green_pointwise, green_radial_avg, lambda_of, u_potential};
use choquard::quadrature::gauss_legendre;
use choquard::rearrange::{rearrangement_energy_check, talenti_check};
use choquard::shooting::{integrate_trajectory, TrajectoryOutcome};
use choquard::solver::{solve_ball, solve_ball_with, AmplitudeScan, GroundState};
use choquard::sweep::run_sweep;
use choquard::{BallSpec, Dimension, Tolerances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

const SEED: u64 = 42;

fn dim(n: u32) -> Dimension {
    Dimension::new(n).unwrap()
}

fn ball(n: u32, r: f64) -> BallSpec {
    BallSpec::new(dim(n), r).unwrap()
}

fn verdict(id: u32, title: &str, ok: bool, elapsed: Duration, budget_s: f64, detail: &str) {
    let t = elapsed.as_secs_f64();
    let pass = ok && t < budget_s;
    // written to the raw handle so passing criteria show without --nocapture
    let _ = writeln!(
        std::io::stderr().lock(),
        "criterion {id}: {} {title}: {detail} [runtime {t:.1} s, budget {budget_s} s]",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {id} ({title}) failed: {detail}");
    assert!(t < budget_s, "criterion {id} ({title}) exceeded its runtime budget: {t:.1} s");
}

#[test]
fn criterion_01_newton_reduction() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let mut worst = Vec::new();
    for n in 3..=6 {
        let w = corpus::radial_profiles(dim(n), 20, SEED)
            .unwrap()
            .iter()
            .map(|p| {
                let (a, b) = (dd_newton(p, p.ball()), dd_direct(p, p.ball()));
                ((a - b) / b).abs()
            })
            .fold(0.0, f64::max);
        worst.push(w);
    }
    let ok = worst.iter().all(|&w| w < 1e-5);
    let detail = format!("max |dd_newton - dd_direct|/dd_direct per n=3..6 = {:?} (tol 1e-5)", worst.iter().map(|w| format!("{w:.2e}")).collect::<Vec<_>>());
    verdict(1, "Newton-reduction equivalence", ok, t.elapsed(), 30.0, &detail);
}

/// Average of `G(x, ·)` over `|y| = ρ` for `|x| = r` in 3D, integrating in
/// `u = cos θ = 1 − t²` over geometrically graded panels toward `t = 0`,
/// where the integrand is steep when `r ≈ ρ`.
fn sphere_average(r: f64, rho: f64, b: &BallSpec) -> f64 {
    let (gx, gw) = gauss_legendre(16);
    let x = [0.0, 0.0, r];
    let f = |t: f64| {
        let u = 1.0 - t * t;
        let s = (1.0 - u * u).max(0.0).sqrt();
        green_pointwise(&x, &[rho * s, 0.0, rho * u], b).unwrap() * 2.0 * t
    };
    let mut cuts = vec![2f64.sqrt()];
    while *cuts.last().unwrap() > 1e-12 {
        let last = *cuts.last().unwrap();
        cuts.push(0.7 * last);
    }
    cuts.push(0.0);
    let mut sum = 0.0;
    for w in cuts.windows(2) {
        let (hi, lo) = (w[0], w[1]);
        for (z, wt) in gx.iter().zip(&gw) {
            sum += 0.5 * (hi - lo) * wt * f(0.5 * (hi + lo) + 0.5 * (hi - lo) * z);
        }
    }
    0.5 * sum
}

#[test]
fn criterion_02_kernel_average() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let b = ball(3, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (r, rho) = (rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99));
        worst = worst.max((green_radial_avg(r, rho, &b).unwrap() - sphere_average(r, rho, &b)).abs());
    }
    let detail = format!("max abs difference over 100 pairs = {worst:.2e} (tol 1e-8)");
    verdict(2, "kernel average vs angular quadrature", worst < 1e-8, t.elapsed(), 10.0, &detail);
}

/// `max |φ″ + 2φ′/r − (U_φ − λ)φ|` over nodes 2..M−2 of the uniform profile
/// grid, with `φ″` a fourth-order central difference of the stored `φ′`.
/// Second differences of the values themselves would amplify the
/// interpolation error of the integrator's dense output by `1/h²`.
fn residual(gs: &GroundState) -> f64 {
    let x = gs.profile.nodes();
    let v = gs.profile.values();
    let d = gs.profile.derivatives().expect("solver profiles carry φ′");
    let u = u_potential(&gs.profile);
    let h = x[1] - x[0];
    let n = x.len();
    (2..n - 2)
        .map(|i| {
            let d2 = (d[i - 2] - 8.0 * d[i - 1] + 8.0 * d[i + 1] - d[i + 2]) / (12.0 * h);
            (d2 + 2.0 * d[i] / x[i] - (u.values()[i] - gs.lambda) * v[i]).abs()
        })
        .fold(0.0, f64::max)
}

fn solved(n: u32, r: f64) -> GroundState {
    solve_ball(&ball(n, r), &Tolerances::default()).unwrap()
}

#[test]
fn criterion_03_solver_residual() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [2.0, 5.0, 10.0] {
        let gs = solved(3, r);
        let p = &gs.profile;
        let res = residual(&gs) / p.max_abs();
        let positive = p.values()[..p.len() - 1].iter().all(|&v| v > 0.0);
        let decreasing = p.values().windows(2).all(|w| w[1] <= w[0]);
        let lm = (gs.lambda / lambda_of(p, &gs.ball) - 1.0).abs();
        ok &= res < 1e-6 && positive && decreasing && gs.lambda > 0.0 && lm < 1e-8;
        parts.push(format!(
            "R={r}: residual/max={res:.1e} lambda={:.6} |lambda/lambda(phi)-1|={lm:.1e} positive={positive} decreasing={decreasing}",
            gs.lambda
        ));
    }
    let detail = format!("{} (tol 1e-6, 1e-8)", parts.join("; "));
    verdict(3, "solver residual", ok, t.elapsed(), 10.0, &detail);
}

#[test]
fn criterion_04_uniqueness_as_reproducibility() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let (a, b) = (AmplitudeScan::default(), AmplitudeScan::shifted(0.5));
    let (pa, pb) = (a.amplitudes(), b.amplitudes());
    assert!(pa.iter().all(|x| pb.iter().all(|y| x != y)), "scan grids must be disjoint");
    let tol = Tolerances::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 3..=6 {
        for r in [2.0, 5.0] {
            let bl = ball(n, r);
            match (solve_ball_with(&bl, &tol, &a), solve_ball_with(&bl, &tol, &b)) {
                (Ok(x), Ok(y)) => {
                    let da = (x.amplitude / y.amplitude - 1.0).abs();
                    let de = (x.energy / y.energy - 1.0).abs();
                    ok &= da < 1e-7 && de < 1e-9;
                    parts.push(format!("n={n} R={r}: da={da:.1e} dc={de:.1e}"));
                }
                (Err(e), _) | (_, Err(e)) => {
                    ok = false;
                    parts.push(format!("n={n} R={r}: solve failed ({})", e.kind()));
                }
            }
        }
    }
    let detail = format!("{} (tol 1e-7 amplitude, 1e-9 energy)", parts.join("; "));
    verdict(4, "uniqueness as reproducibility", ok, t.elapsed(), 60.0, &detail);
}

#[test]
fn criterion_05_spectral_identity() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for r in [2.0, 5.0, 10.0] {
        let gs = solved(3, r);
        let c = gs.canonical.as_ref().unwrap();
        let ev = smallest_eigenvalue(&u_potential(&c.profile), c.r0, c.dim()).unwrap();
        worst = worst.max((ev - 1.0).abs());
        parts.push(format!("R={r}: Gamma={ev:.8} on r0={:.4}", c.r0));
    }
    let detail = format!("{} (tol 1e-3)", parts.join("; "));
    verdict(5, "spectral identity Gamma=1", worst < 1e-3, t.elapsed(), 30.0, &detail);
}

#[test]
fn criterion_06_grid_oracle() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let b = ball(3, 5.0);
    let opts = OracleOptions::default();
    let c_shoot = solved(3, 5.0).energy;
    let random = ground_state_iterate(&b, 41, &OracleSeed::Random(SEED), &opts).unwrap();
    let asym = ground_state_iterate(&b, 41, &OracleSeed::Asymmetric, &opts).unwrap();
    let rel = (random.energy / c_shoot - 1.0).abs();
    let dev = radial_deviation(&random.field.u).unwrap();
    let seeds = (asym.energy / random.energy - 1.0).abs();
    let ok = rel < 0.05 && dev < 0.03 && seeds < 1e-4;
    let detail = format!(
        "c_grid={:.6} c_shoot={c_shoot:.6} rel={rel:.2e} (tol 5e-2); radial_deviation={dev:.4} (tol 0.03); asymmetric seed rel={seeds:.1e} (tol 1e-4)",
        random.energy
    );
    verdict(6, "3D oracle cross-validation", ok, t.elapsed(), 180.0, &detail);
}

#[test]
fn criterion_07_talenti() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let b = corpus::corpus_ball();
    let reports: Vec<_> = corpus::talenti_sources(20, SEED)
        .unwrap()
        .iter()
        .map(|f| talenti_check(f, &b).unwrap())
        .collect();
    let passed = reports.iter().filter(|r| r.pass).count();
    let worst = reports.iter().map(|r| r.margin + r.tolerance).fold(f64::INFINITY, f64::min);
    let min_margin = reports.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let detail = format!("{passed}/20 PASS; min margin min(v - u*) = {min_margin:.3e}; min slack margin+tol = {worst:.3e}");
    verdict(7, "Talenti comparison", passed == 20, t.elapsed(), 180.0, &detail);
}

#[test]
fn criterion_08_rearrangement_inequalities() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let b = corpus::corpus_ball();
    let reports: Vec<_> = corpus::rearrangement_inputs(20, SEED)
        .unwrap()
        .iter()
        .map(|u| rearrangement_energy_check(u, &b).unwrap())
        .collect();
    let passed = reports.iter().filter(|r| r.pass).count();
    let worst = reports.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let detail = format!("{passed}/20 PASS; smallest relative margin {worst:.3e}");
    verdict(8, "rearrangement energy inequalities", passed == 20, t.elapsed(), 60.0, &detail);
}

#[test]
fn criterion_09_convergence() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let sweep = run_sweep(dim(3), &[2.0, 4.0, 8.0, 16.0, 32.0], &Tolerances::default()).unwrap();
    let tol = 1e-6 * sweep.c_inf;
    let rows: Vec<_> = sweep.records.iter().map(|r| (r.radius, r.row.clone().unwrap())).collect();
    let sandwich = rows
        .iter()
        .all(|(_, r)| sweep.c_inf - tol <= r.c_r && r.c_r <= r.upper_bound + tol);
    let gap_ratio = rows[4].1.gap / rows[0].1.gap;
    let dist = rows[4].1.profile_distance / sweep.h1_norm_inf;
    let s_r: Vec<f64> = rows.iter().filter(|(r, _)| *r >= 20.0).map(|(_, x)| x.s_r).collect();
    let s_ok = s_r.iter().all(|s| (0.99..=1.01).contains(s));
    let ok = sandwich && gap_ratio < 0.1 && dist < 0.05 && s_ok;
    let detail = format!(
        "sandwich={} ; gap(32)/gap(2)={gap_ratio:.4} (tol 0.1); profile_distance(32)/|phi_inf|={dist:.4} (tol 0.05); s_R for R>=20 = {s_r:.4?} (tol [0.99, 1.01])",
        if sandwich { "holds" } else { "violated" }
    );
    verdict(9, "convergence c_R -> c_inf", ok, t.elapsed(), 120.0, &detail);
}

#[test]
fn criterion_10_ratio_monotonicity() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 10);
    let crossing = |a: f64| match integrate_trajectory(a, dim(3), tol.r_max, &tol).unwrap() {
        TrajectoryOutcome::CrossesZero { profile, .. } => profile,
        _ => panic!("amplitude {a} should cross"),
    };
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let a2 = rng.gen_range(0.01..0.25);
        let a1 = rng.gen_range(a2 + 0.005..0.3);
        let (p1, p2) = (crossing(a1), crossing(a2));
        let end = p1.end().min(p2.end());
        let ratio: Vec<f64> = (0..1000)
            .map(|k| end * k as f64 / 1000.0)
            .map(|r| p1.eval(r) / p2.eval(r))
            .collect();
        for w in ratio.windows(2) {
            worst = worst.max((w[0] - w[1]) / w[0].abs());
        }
    }
    let detail = format!("largest relative decrease of phi1/phi2 over 10 pairs = {worst:.2e} (slack 1e-9)");
    verdict(10, "ratio monotonicity", worst <= 1e-9, t.elapsed(), 10.0, &detail);
}
