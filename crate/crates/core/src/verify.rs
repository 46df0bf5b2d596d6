//! Invariant suites run by `choquard verify`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus;
use crate::energy::{dd_direct, dd_newton, smallest_eigenvalue};
use crate::error::{Error, Result};
use crate::kernel::{green_pointwise, green_radial_avg, lambda_of, u_potential, v_potential, BallSpec, Dimension};
use crate::quadrature::gauss_legendre;
use crate::rearrange::{rearrangement_energy_check, talenti_check};
use crate::shooting::{integrate_trajectory, Tolerances, TrajectoryOutcome};
use crate::solver::{pde_residual, solve_ball, solve_ball_with, AmplitudeScan, GroundState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Kernel,
    Talenti,
    Uniqueness,
    Spectral,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "kernel" => Suite::Kernel,
            "talenti" => Suite::Talenti,
            "uniqueness" => Suite::Uniqueness,
            "spectral" => Suite::Spectral,
            _ => return Err(Error::Parse(format!("unknown suite {s:?}"))),
        })
    }
}

/// Outcome of one check: the measured value against its threshold.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            pass: value < threshold,
            value,
            threshold,
            detail,
        }
    }

    fn failed(name: impl Into<String>, e: &Error) -> Self {
        Self {
            name: name.into(),
            pass: false,
            value: f64::NAN,
            threshold: f64::NAN,
            detail: e.to_string(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {:.3e} (limit {:.1e}) {}", self.name, self.value, self.threshold, self.detail)
    }
}

pub fn run(suite: Suite, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    if matches!(suite, Suite::All | Suite::Kernel) {
        out.extend(kernel_suite(seed));
    }
    if matches!(suite, Suite::All | Suite::Talenti) {
        out.extend(talenti_suite(seed));
    }
    if matches!(suite, Suite::All | Suite::Uniqueness) {
        out.extend(uniqueness_suite(seed));
    }
    if matches!(suite, Suite::All | Suite::Spectral) {
        out.extend(spectral_suite());
    }
    out
}

fn dim(n: u32) -> Dimension {
    Dimension::new(n).expect("suite dimensions are at least 3")
}

/// Average of `G(x, ·)` over the sphere `|y| = ρ` with `|x| = r`, `N = 3`.
/// With `s = |x − y|` the surface measure becomes `s ds/(2rρ)`, which cancels
/// the singularity of the direct term; the image term is smooth.
pub fn angular_green_average(r: f64, rho: f64, ball: &BallSpec) -> Result<f64> {
    let (nodes, weights) = gauss_legendre(20);
    let (lo, hi) = ((r - rho).abs(), r + rho);
    let panels = 16;
    let x = [0.0, 0.0, r];
    let mut sum = 0.0;
    for p in 0..panels {
        let a = lo + (hi - lo) * p as f64 / panels as f64;
        let b = lo + (hi - lo) * (p + 1) as f64 / panels as f64;
        for (t, w) in nodes.iter().zip(&weights) {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * t;
            let cos = (r * r + rho * rho - s * s) / (2.0 * r * rho);
            let sin = (1.0 - cos * cos).max(0.0).sqrt();
            let y = [rho * sin, 0.0, rho * cos];
            sum += 0.5 * (b - a) * w * green_pointwise(&x, &y, ball)? * s;
        }
    }
    Ok(sum / (2.0 * r * rho))
}

pub fn kernel_suite(seed: u64) -> Vec<Check> {
    let mut out: Vec<Check> = (3..=6)
        .into_par_iter()
        .map(|n| {
            let name = format!("kernel/dd_newton=dd_direct n={n}");
            let profiles = match corpus::radial_profiles(dim(n), 20, seed) {
                Ok(p) => p,
                Err(e) => return Check::failed(name, &e),
            };
            let worst = profiles
                .iter()
                .map(|p| {
                    let ball = *p.ball();
                    let (a, b) = (dd_newton(p, &ball), dd_direct(p, &ball));
                    ((a - b) / b).abs()
                })
                .fold(0.0, f64::max);
            Check::below(name, worst, 1e-5, "max relative difference over 20 profiles".into())
        })
        .collect();

    let ball = BallSpec::new(dim(3), 1.0).expect("unit ball");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (r, rho) = (rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99));
        match (green_radial_avg(r, rho, &ball), angular_green_average(r, rho, &ball)) {
            (Ok(a), Ok(b)) => worst = worst.max((a - b).abs()),
            (Err(e), _) | (_, Err(e)) => {
                out.push(Check::failed("kernel/green average", &e));
                return out;
            }
        }
    }
    out.push(Check::below("kernel/green average", worst, 1e-8, "max abs difference over 100 pairs, n=3".into()));

    let mut worst: f64 = 0.0;
    for p in corpus::radial_profiles(dim(4), 5, seed).unwrap_or_default() {
        let ball = *p.ball();
        let (u, v, l) = (u_potential(&p), v_potential(&p, &ball), lambda_of(&p, &ball));
        for (a, b) in u.values().iter().zip(v.values()) {
            worst = worst.max((a + b - 1.0 - l).abs() / (1.0 + l.abs()));
        }
    }
    out.push(Check::below("kernel/V+U-1=lambda", worst, 1e-12, "relative, 5 profiles, n=4".into()));
    out
}

pub fn talenti_suite(seed: u64) -> Vec<Check> {
    let ball = corpus::corpus_ball();
    let mut out = Vec::new();
    match corpus::talenti_sources(20, seed) {
        Ok(sources) => {
            let reports: Vec<_> = sources.par_iter().map(|f| talenti_check(f, &ball)).collect();
            out.push(summarize("talenti/u* <= v", reports));
        }
        Err(e) => out.push(Check::failed("talenti/u* <= v", &e)),
    }
    match corpus::rearrangement_inputs(20, seed) {
        Ok(inputs) => {
            let reports: Vec<_> = inputs.par_iter().map(|u| rearrangement_energy_check(u, &ball)).collect();
            out.push(summarize("talenti/rearrangement inequalities", reports));
        }
        Err(e) => out.push(Check::failed("talenti/rearrangement inequalities", &e)),
    }
    out
}

fn summarize(name: &str, reports: Vec<Result<crate::rearrange::CheckReport>>) -> Check {
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    let mut tol = f64::NAN;
    for r in &reports {
        match r {
            Ok(r) => {
                failures += usize::from(!r.pass);
                if r.margin < worst {
                    worst = r.margin;
                    tol = r.tolerance;
                }
            }
            Err(e) => return Check::failed(name, e),
        }
    }
    Check {
        name: name.into(),
        pass: failures == 0,
        value: worst,
        threshold: -tol,
        detail: format!("{failures} of {} failed; smallest margin shown against its tolerance", reports.len()),
    }
}

pub fn uniqueness_suite(seed: u64) -> Vec<Check> {
    let tol = Tolerances::default();
    let cases: Vec<(u32, f64)> = (3..=6).flat_map(|n| [(n, 2.0), (n, 5.0)]).collect();
    let mut out: Vec<Check> = cases
        .par_iter()
        .map(|&(n, radius)| {
            let name = format!("uniqueness/disjoint scans n={n} R={radius}");
            let ball = match BallSpec::new(dim(n), radius) {
                Ok(b) => b,
                Err(e) => return Check::failed(name, &e),
            };
            let pair = solve_ball(&ball, &tol).and_then(|a| Ok((a, solve_ball_with(&ball, &tol, &AmplitudeScan::shifted(0.5))?)));
            match pair {
                Ok((a, b)) => {
                    let da = (a.amplitude / b.amplitude - 1.0).abs();
                    let de = (a.energy / b.energy - 1.0).abs();
                    Check {
                        name,
                        pass: da < 1e-7 && de < 1e-9,
                        value: da,
                        threshold: 1e-7,
                        detail: format!("energy difference {de:.3e} (limit 1e-9)"),
                    }
                }
                Err(e) => Check::failed(name, &e),
            }
        })
        .collect();
    out.push(ratio_check(seed, 10));
    out
}

/// `φ₁/φ₂` nondecreasing on the common positivity window for `a₁ > a₂`.
pub fn ratio_check(seed: u64, pairs: usize) -> Check {
    let name = "uniqueness/ratio monotonicity n=3";
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let a2 = rng.gen_range(0.01..0.25);
        let a1 = rng.gen_range(a2 + 0.01..0.3);
        let profile = |a| match integrate_trajectory(a, dim(3), tol.r_max, &tol)? {
            TrajectoryOutcome::CrossesZero { profile, .. } => Ok(profile),
            _ => Err(Error::Domain(format!("amplitude {a} does not cross"))),
        };
        let (p1, p2) = match (profile(a1), profile(a2)) {
            (Ok(p1), Ok(p2)) => (p1, p2),
            (Err(e), _) | (_, Err(e)) => return Check::failed(name, &e),
        };
        let end = 0.999 * p1.end().min(p2.end());
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=400 {
            let r = end * k as f64 / 400.0;
            let q = p1.eval(r) / p2.eval(r);
            worst = worst.max((prev - q) / prev.abs().max(1.0));
            prev = q;
        }
    }
    Check::below(name, worst, 1e-9, format!("largest relative decrease over {pairs} pairs"))
}

pub fn spectral_suite() -> Vec<Check> {
    let tol = Tolerances::default();
    [2.0, 5.0, 10.0]
        .par_iter()
        .flat_map_iter(|&radius| {
            let solved = BallSpec::new(dim(3), radius).and_then(|b| solve_ball(&b, &tol));
            match solved {
                Ok(gs) => vec![residual_check(&gs, radius), eigen_check(&gs, radius)],
                Err(e) => vec![Check::failed(format!("spectral/solve R={radius}"), &e)],
            }
        })
        .collect()
}

fn residual_check(gs: &GroundState, radius: f64) -> Check {
    let res = pde_residual(gs) / gs.profile.max_abs();
    let decreasing = gs.profile.values().windows(2).all(|w| w[1] <= w[0]);
    let positive = gs.profile.values()[..gs.profile.len() - 1].iter().all(|&v| v > 0.0);
    let lm = (gs.lambda / lambda_of(&gs.profile, &gs.ball) - 1.0).abs();
    Check {
        name: format!("spectral/residual n=3 R={radius}"),
        pass: res < 1e-6 && decreasing && positive && gs.lambda > 0.0 && lm < 1e-8,
        value: res,
        threshold: 1e-6,
        detail: format!("lambda={:.6} |lambda/lambda(phi)-1|={lm:.2e} positive={positive} decreasing={decreasing}", gs.lambda),
    }
}

fn eigen_check(gs: &GroundState, radius: f64) -> Check {
    let name = format!("spectral/Gamma=1 n=3 R={radius}");
    let Some(c) = &gs.canonical else {
        return Check::failed(name, &Error::Domain("no canonical solution attached".into()));
    };
    match smallest_eigenvalue(&u_potential(&c.profile), c.r0, c.dim()) {
        Ok(ev) => Check::below(name, (ev - 1.0).abs(), 1e-3, format!("eigenvalue {ev:.8} on r0={:.6}", c.r0)),
        Err(e) => Check::failed(name, &e),
    }
}
