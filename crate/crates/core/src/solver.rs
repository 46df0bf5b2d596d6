//! Ground states on `B_R` and on `ℝ^N` by amplitude bisection and rescaling.
//!
//! A canonical trajectory with amplitude `a` that crosses zero at `r0` with
//! `U_Φ(r0) > 1` rescales to a ball ground state with `λ = 1/(U_Φ(r0) − 1)`
//! on the ball of radius `R(a) = r0·(U_Φ(r0) − 1)^{1/2}`. The solver bisects
//! `a` until `R(a)` hits the requested radius. Near the separatrix `R(a)` is
//! extremely steep, so large balls switch to double-double arithmetic once
//! `f64` amplitudes run out of resolution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use crate::real::Dd;

use crate::energy::h1_norm_sq;
use crate::error::{Error, Result};
use crate::kernel::{lambda_of, u_potential, BallSpec, Dimension};
use crate::profile::{format_f64, RadialGrid, RadialProfile};
use crate::quadrature::fd_weights;
use crate::real::Real;
use crate::shooting::{
    canonical_from_shot, lambda_from_crossing, potential, reference_mesh, rescale_profile, sample, shoot, shoot_on,
    CanonicalSolution, Event, Tolerances,
};

/// Logarithmic amplitude grid used to bracket the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeScan {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Shift of every point by this fraction of one logarithmic step.
    pub offset: f64,
}

impl Default for AmplitudeScan {
    fn default() -> Self {
        Self {
            lo: 1e-3,
            hi: 1e3,
            points: 60,
            offset: 0.0,
        }
    }
}

impl AmplitudeScan {
    pub fn shifted(offset: f64) -> Self {
        Self { offset, ..Self::default() }
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        let n = self.points.max(2);
        let step = (self.hi / self.lo).ln() / (n - 1) as f64;
        (0..n)
            .map(|i| self.lo * ((i as f64 + self.offset) * step).exp())
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.hi > self.lo && self.hi.is_finite() && self.points >= 2) {
            return Err(Error::Domain(format!("invalid amplitude scan {self:?}")));
        }
        if !(0.0..1.0).contains(&self.offset) {
            return Err(Error::Domain(format!("scan offset {} must lie in [0, 1)", self.offset)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveDiagnostics {
    /// Whether the finite `R(a)` values seen by the scan increase with `a`.
    pub scan_monotone: bool,
    pub bisection_steps: usize,
    pub extended_precision: bool,
    /// `|R(a)/R − 1|` of the accepted amplitude (ball solves).
    pub radius_error: f64,
    /// `|λ/λ(φ) − 1|` comparing the closed form with the potential route.
    pub lambda_mismatch: f64,
    /// Relative gap between the two sides of the separatrix at the cut (whole space).
    pub separatrix_gap: f64,
    /// Canonical cut radius of the whole-space profile.
    pub r_cut: f64,
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub profile: RadialProfile,
    pub ball: BallSpec,
    pub lambda: f64,
    pub energy: f64,
    pub h1_norm_sq: f64,
    /// Shooting amplitude `Φ(0)` of the canonical trajectory.
    pub amplitude: f64,
    pub uniqueness_guaranteed: bool,
    pub canonical: Option<CanonicalSolution>,
    pub diagnostics: SolveDiagnostics,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RadiusField {
    Finite(f64),
    Tag(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundStateDto {
    dim: u32,
    radius: RadiusField,
    lambda: f64,
    energy: f64,
    h1_norm_sq: f64,
    amplitude: f64,
    profile: Vec<[f64; 2]>,
}

impl GroundState {
    pub fn dim(&self) -> Dimension {
        self.ball.dim()
    }

    pub fn to_json(&self) -> String {
        let radius = if self.ball.is_whole_space() {
            RadiusField::Tag("inf".into())
        } else {
            RadiusField::Finite(self.ball.radius())
        };
        let dto = GroundStateDto {
            dim: self.dim().n(),
            radius,
            lambda: self.lambda,
            energy: self.energy,
            h1_norm_sq: self.h1_norm_sq,
            amplitude: self.amplitude,
            profile: self
                .profile
                .nodes()
                .iter()
                .zip(self.profile.values())
                .map(|(&r, &v)| [r, v])
                .collect(),
        };
        serde_json::to_string(&dto).expect("ground state serializes")
    }

    /// Parses the JSON form; the profile comes back without derivatives.
    pub fn from_json(s: &str) -> Result<Self> {
        let dto: GroundStateDto = serde_json::from_str(s)?;
        let dim = Dimension::new(dto.dim)?;
        let ball = match dto.radius {
            RadiusField::Finite(r) => BallSpec::new(dim, r)?,
            RadiusField::Tag(t) if t == "inf" => BallSpec::whole_space(dim),
            RadiusField::Tag(t) => return Err(Error::Parse(format!("radius must be a number or \"inf\", got {t:?}"))),
        };
        for (name, v) in [
            ("lambda", dto.lambda),
            ("energy", dto.energy),
            ("h1_norm_sq", dto.h1_norm_sq),
            ("amplitude", dto.amplitude),
        ] {
            if !v.is_finite() {
                return Err(Error::Parse(format!("{name} must be finite")));
            }
        }
        let (nodes, values): (Vec<f64>, Vec<f64>) = dto.profile.iter().map(|p| (p[0], p[1])).unzip();
        let profile = RadialProfile::new(RadialGrid::new(nodes)?, values, ball)?;
        Ok(Self {
            profile,
            ball,
            lambda: dto.lambda,
            energy: dto.energy,
            h1_norm_sq: dto.h1_norm_sq,
            amplitude: dto.amplitude,
            uniqueness_guaranteed: dim.uniqueness_guaranteed(),
            canonical: None,
            diagnostics: SolveDiagnostics::default(),
        })
    }

    /// One-line summary printed by the CLI.
    pub fn summary_lines(&self) -> String {
        format!(
            "lambda={}\nc={}\namplitude={}\n",
            format_f64(self.lambda),
            format_f64(self.energy),
            format_f64(self.amplitude)
        )
    }
}

/// Rescales a canonical crossing to the ground state on `B_{r0/√λ}`.
pub fn rescale_to_ball(sol: &CanonicalSolution) -> Result<GroundState> {
    let lambda = lambda_from_crossing(sol)?;
    let dim = sol.dim();
    let ball = BallSpec::new(dim, sol.r0 / lambda.sqrt())?;
    let profile = rescale_profile(&sol.profile, lambda, ball)?;
    finish(profile, ball, lambda, sol.amplitude, Some(sol.clone()), SolveDiagnostics::default())
}

fn finish(
    profile: RadialProfile,
    ball: BallSpec,
    lambda: f64,
    amplitude: f64,
    canonical: Option<CanonicalSolution>,
    mut diagnostics: SolveDiagnostics,
) -> Result<GroundState> {
    let check = lambda_of(&profile, &ball);
    diagnostics.lambda_mismatch = (lambda / check - 1.0).abs();
    if !(diagnostics.lambda_mismatch < 1e-6) {
        return Err(Error::Convergence(format!(
            "closed-form multiplier {lambda} disagrees with λ(φ) = {check}"
        )));
    }
    let h = h1_norm_sq(&profile);
    Ok(GroundState {
        uniqueness_guaranteed: ball.dim().uniqueness_guaranteed(),
        profile,
        ball,
        lambda,
        energy: h / 4.0,
        h1_norm_sq: h,
        amplitude,
        canonical,
        diagnostics,
    })
}

/// Scan classification of one amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Class {
    /// Crosses with `U(r0) ≤ 1`: no ball ground state, amplitude too small.
    Low,
    /// Crosses with `U(r0) > 1`, rescaling to this radius.
    Radius(f64),
    /// Diverges or never crosses: amplitude above the separatrix.
    High,
}

impl Class {
    fn below(self, target: f64) -> bool {
        match self {
            Class::Low => true,
            Class::Radius(r) => r < target,
            Class::High => false,
        }
    }

    fn crosses(self) -> bool {
        !matches!(self, Class::High)
    }
}

fn classify<T: Real>(a: T, dim: Dimension, tol: &Tolerances) -> Result<Class> {
    classify_on(a, dim, tol, None)
}

fn classify_on<T: Real>(a: T, dim: Dimension, tol: &Tolerances, mesh: Option<&[T]>) -> Result<Class> {
    let shot = shoot_on(a, dim, tol.r_max, tol, false, mesh)?;
    Ok(match shot.event {
        Event::Cross { r0, y } => {
            let u = potential(dim, r0, &y).to_f64();
            if u > 1.0 {
                Class::Radius(r0.to_f64() * (u - 1.0).sqrt())
            } else {
                Class::Low
            }
        }
        Event::Diverge { .. } | Event::End { .. } => Class::High,
    })
}

fn scan(dim: Dimension, tol: &Tolerances, scan: &AmplitudeScan) -> Result<Vec<(f64, Class)>> {
    scan.amplitudes()
        .into_par_iter()
        .map(|a| classify(a, dim, tol).map(|c| (a, c)))
        .collect()
}

fn scan_monotone(samples: &[(f64, Class)]) -> bool {
    let radii: Vec<f64> = samples
        .iter()
        .filter_map(|(_, c)| if let Class::Radius(r) = c { Some(*r) } else { None })
        .collect();
    radii.windows(2).all(|w| w[1] > w[0])
}

/// Ground state on `B_R` with the default amplitude scan.
pub fn solve_ball(ball: &BallSpec, tol: &Tolerances) -> Result<GroundState> {
    solve_ball_with(ball, tol, &AmplitudeScan::default())
}

pub fn solve_ball_with(ball: &BallSpec, tol: &Tolerances, grid: &AmplitudeScan) -> Result<GroundState> {
    if ball.is_whole_space() {
        return solve_whole_space_with(ball.dim(), tol, grid);
    }
    tol.validate()?;
    grid.validate()?;
    let dim = ball.dim();
    let target = ball.radius();
    let samples = scan(dim, tol, grid)?;
    let mut diag = SolveDiagnostics {
        scan_monotone: scan_monotone(&samples),
        ..Default::default()
    };
    let bracket = samples
        .windows(2)
        .find(|w| w[0].1.below(target) && !w[1].1.below(target))
        .map(|w| (w[0].0, w[1].0));
    let Some((mut lo, mut hi)) = bracket else {
        let best = samples
            .iter()
            .filter_map(|(a, c)| if let Class::Radius(r) = c { Some(format!("R({a:.4e})={r:.4e}")) } else { None })
            .collect::<Vec<_>>();
        return Err(Error::Bracket(format!(
            "no amplitude in [{}, {}] reaches R = {target}; rescalable crossings: [{}]",
            grid.lo,
            grid.hi,
            best.join(", ")
        )));
    };

    let rel = |c: Class| match c {
        Class::Radius(r) => (r / target - 1.0).abs(),
        _ => f64::INFINITY,
    };
    const TARGET: f64 = 1e-12;
    const SWITCH: f64 = 1e-11;
    const ACCEPT: f64 = 1e-9;

    let mut best: Option<(f64, f64)> = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        diag.bisection_steps += 1;
        let c = classify(mid, dim, tol)?;
        let e = rel(c);
        if best.map_or(true, |(_, b)| e < b) {
            best = Some((mid, e));
        }
        if e <= TARGET && (hi - lo) <= tol.bisection * mid {
            break;
        }
        if e <= TARGET && (hi - lo) <= 1e3 * f64::EPSILON * mid {
            break;
        }
        if c.below(target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if let Some((a, e)) = best {
        if e <= SWITCH {
            diag.radius_error = e;
            let shot = shoot(a, dim, tol.r_max, tol, true)?;
            let sol = canonical_from_shot(a, dim, &shot, tol)?;
            return ball_state(&sol, diag);
        }
    }

    if best.map_or(true, |(_, e)| e.is_infinite()) {
        return Err(no_rescalable_crossing(lo, hi, target));
    }

    // f64 amplitudes exhausted: continue in double-double from the bracket.
    // The adaptive step sequence makes R(a) jump at the level of the ODE
    // tolerance, so the remaining bisection runs on one frozen mesh.
    diag.extended_precision = true;
    let tol = &Tolerances {
        ode: tol.ode.min(1e-13),
        ..*tol
    };
    let r_ref = match shoot(Dd::from(lo), dim, tol.r_max, tol, false)?.event {
        Event::Cross { r0, .. } => r0.to_f64(),
        _ => tol.r_max / 2.0,
    };
    let mesh = reference_mesh(Dd::from(lo), dim, (1.5 * r_ref + 2.0).min(tol.r_max), tol)?;
    let mesh = Some(&mesh[..]);
    let mut lo = Dd::from(lo);
    let mut hi = Dd::from(hi);
    let half = Dd::from(0.5);
    // The mesh discretisation moves the separatrix by round-off amounts, so
    // the f64 bracket may need widening before it brackets again.
    let mut width = (hi - lo).max(Dd::from(1e-15) * lo);
    for _ in 0..60 {
        if classify_on(lo, dim, tol, mesh)?.below(target) {
            break;
        }
        lo = lo - width;
        width = width + width;
    }
    let mut width = (hi - lo).max(Dd::from(1e-15) * hi);
    for _ in 0..60 {
        if !classify_on(hi, dim, tol, mesh)?.below(target) {
            break;
        }
        hi = hi + width;
        width = width + width;
    }
    let mut best_dd: Option<(Dd, f64)> = None;
    for _ in 0..200 {
        let mid = half * (lo + hi);
        if mid <= lo || mid >= hi || ((hi - lo) / mid).to_f64() < 1e-30 {
            break;
        }
        diag.bisection_steps += 1;
        let c = classify_on(mid, dim, tol, mesh)?;
        let e = rel(c);
        if best_dd.map_or(true, |(_, b)| e < b) {
            best_dd = Some((mid, e));
        }
        if e <= TARGET {
            break;
        }
        if c.below(target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    match best_dd {
        Some((a, e)) if e <= ACCEPT => {
            diag.radius_error = e;
            let shot = shoot_on(a, dim, tol.r_max, tol, true, mesh)?;
            let sol = canonical_from_shot(a, dim, &shot, tol)?;
            ball_state(&sol, diag)
        }
        other => Err(Error::Convergence(format!(
            "amplitude bisection stalled at relative radius error {:e} (bracket [{:.17e}, {:.17e}])",
            other.map_or(f64::INFINITY, |(_, e)| e),
            lo.to_f64(),
            hi.to_f64()
        ))),
    }
}

fn no_rescalable_crossing(lo: f64, hi: f64, target: f64) -> Error {
    Error::Convergence(format!(
        "no crossing in [{lo:.17e}, {hi:.17e}] has U(r0) > 1, so none rescales to R = {target}; \
         the crossing trajectories below the separatrix all end with U(r0) <= 1"
    ))
}

fn ball_state(sol: &CanonicalSolution, diag: SolveDiagnostics) -> Result<GroundState> {
    let gs = rescale_to_ball(sol)?;
    Ok(GroundState {
        diagnostics: SolveDiagnostics {
            lambda_mismatch: gs.diagnostics.lambda_mismatch,
            ..diag
        },
        ..gs
    })
}

/// Ground state on `ℝ^N` from the amplitude separatrix.
pub fn solve_whole_space(dim: Dimension, tol: &Tolerances) -> Result<GroundState> {
    solve_whole_space_with(dim, tol, &AmplitudeScan::default())
}

pub fn solve_whole_space_with(dim: Dimension, tol: &Tolerances, grid: &AmplitudeScan) -> Result<GroundState> {
    tol.validate()?;
    grid.validate()?;
    let samples = scan(dim, tol, grid)?;
    let mut diag = SolveDiagnostics {
        scan_monotone: scan_monotone(&samples),
        extended_precision: true,
        ..Default::default()
    };
    let Some((lo, hi)) = samples
        .windows(2)
        .find(|w| w[0].1.crosses() && !w[1].1.crosses())
        .map(|w| (w[0].0, w[1].0))
    else {
        return Err(Error::Bracket(format!(
            "no crossing/diverging pair in amplitude range [{}, {}]",
            grid.lo, grid.hi
        )));
    };

    let half = Dd::from(0.5);
    let mut lo = Dd::from(lo);
    let mut hi = Dd::from(hi);
    for _ in 0..400 {
        let mid = half * (lo + hi);
        if mid <= lo || mid >= hi || ((hi - lo) / mid).to_f64() < 4.0 * <Dd as Real>::EPSILON {
            break;
        }
        diag.bisection_steps += 1;
        if classify(mid, dim, tol)?.crosses() {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let shot_lo = shoot(lo, dim, tol.r_max, tol, true)?;
    let shot_hi = shoot(hi, dim, tol.r_max, tol, true)?;
    let level = lo * Dd::from(tol.decay);
    let tail = |reason: &str, gap: f64, r: f64| Error::Separatrix {
        reason: reason.to_string(),
        lo: lo.to_f64(),
        hi: hi.to_f64(),
        tail: format!(
            "r_cut={r:.6}, gap={gap:.3e}, lo_end={}, hi_end={}",
            describe(&shot_lo.event),
            describe(&shot_hi.event)
        ),
    };

    // first point where the crossing-side trajectory falls below the tail level
    let Some((idx, step)) = shot_lo
        .steps
        .iter()
        .enumerate()
        .find(|(_, s)| s.y_end()[0] <= level)
    else {
        return Err(tail("trajectory never reached the tail threshold", f64::NAN, f64::NAN));
    };
    let r_cut = crate::shooting::locate_level(step, level, tol.event);
    let y_cut = step.eval(r_cut);
    diag.r_cut = r_cut.to_f64();

    let hi_at = shot_hi
        .steps
        .iter()
        .find(|s| s.start() <= r_cut && r_cut <= s.end())
        .map(|s| s.eval(r_cut)[0]);
    let gap = match hi_at {
        Some(v) => ((v - y_cut[0]) / y_cut[0]).to_f64().abs(),
        None => f64::INFINITY,
    };
    diag.separatrix_gap = gap;
    if !(gap <= 1e-3) || !(y_cut[1] < Dd::from(0.0)) {
        return Err(tail(
            "both sides of the amplitude interval separate before the tail threshold",
            gap,
            r_cut.to_f64(),
        ));
    }
    let plateau = y_cut[2].to_f64();
    if !(plateau > 1.0) {
        return Err(tail("potential plateau does not exceed 1", gap, r_cut.to_f64()));
    }
    let lambda = 1.0 / (plateau - 1.0);
    let ball = BallSpec::whole_space(dim);
    let (canon, _, _) = sample(&shot_lo.steps[..=idx], lo, dim, r_cut, &y_cut, tol.profile_intervals, ball)?;
    let profile = rescale_profile(&canon, lambda, ball)?;
    finish(profile, ball, lambda, lo.to_f64(), None, diag)
}

fn describe<T: Real>(e: &Event<T>) -> String {
    match e {
        Event::Cross { r0, .. } => format!("cross@{:.4}", r0.to_f64()),
        Event::Diverge { r } => format!("diverge@{:.4}", r.to_f64()),
        Event::End { r, y } => format!("end@{:.4}(phi={:.3e})", r.to_f64(), y[0].to_f64()),
    }
}

/// Max-norm of `φ″ + (N−1)φ′/r − (U_φ − λ)φ` over interior nodes.
///
/// `φ″` is a fourth-order difference of the stored derivative when present,
/// otherwise a second difference of the values; `U_φ` comes from the moments.
pub fn pde_residual(gs: &GroundState) -> f64 {
    let p = &gs.profile;
    let x = p.nodes();
    let n = x.len();
    let nm1 = gs.dim().as_f64() - 1.0;
    let u = u_potential(p);
    let d = p.nodal_derivatives();
    let width = 5.min(n);
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        let start = i.saturating_sub(width / 2).min(n - width);
        let xs = &x[start..start + width];
        let w = fd_weights(x[i], xs, 2);
        let d2 = if p.derivatives().is_some() {
            w[1].iter().zip(&d[start..start + width]).map(|(a, b)| a * b).sum::<f64>()
        } else {
            w[2].iter().zip(&p.values()[start..start + width]).map(|(a, b)| a * b).sum::<f64>()
        };
        let res = d2 + nm1 * d[i] / x[i] - (u.values()[i] - gs.lambda) * p.values()[i];
        worst = worst.max(res.abs());
    }
    worst
}
