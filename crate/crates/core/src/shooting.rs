//! Canonical radial equation as an augmented initial value problem.
//!
//! The state is `(φ, φ′, q, m)` where `q` and `m` are the running Newton
//! moments, so the nonlocal potential `U = q − r^{2−N} m` is available
//! pointwise and the system closes:
//!
//! ```text
//! φ′ = p
//! p′ = −(N−1) p / r + (U − 1) φ
//! q′ = ω_N r φ²
//! m′ = ω_N r^{N−1} φ²
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{sphere_area, BallSpec, Dimension};
use crate::ode::{self, DenseStep, Flow, StepControl};
use crate::profile::{RadialGrid, RadialProfile};
use crate::real::Real;

/// Start of integration; the origin itself is a regular singular point.
pub const R_START: f64 = 1e-6;

/// Numerical controls of the shooting solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative tolerance of the adaptive integrator.
    pub ode: f64,
    /// Absolute accuracy of zero-crossing location in `r`.
    pub event: f64,
    /// Relative width at which amplitude bisection may stop.
    pub bisection: f64,
    /// Tail threshold relative to the amplitude.
    pub decay: f64,
    /// Outer radius for trajectories that neither cross nor diverge.
    pub r_max: f64,
    /// Uniform intervals of the returned profile.
    pub profile_intervals: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode: 1e-10,
            event: 1e-12,
            bisection: 1e-10,
            decay: 1e-8,
            r_max: 200.0,
            profile_intervals: 4096,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if !(ok(self.ode) && ok(self.event) && ok(self.bisection) && ok(self.decay) && ok(self.r_max)) {
            return Err(Error::Domain(format!("tolerances must be positive and finite: {self:?}")));
        }
        if self.ode >= 1e-2 || self.decay >= 1.0 {
            return Err(Error::Domain(format!("tolerances out of range: {self:?}")));
        }
        if self.profile_intervals < 16 {
            return Err(Error::Domain(format!("profile needs at least 16 intervals, got {}", self.profile_intervals)));
        }
        Ok(())
    }

    pub(crate) fn step_control(&self) -> StepControl {
        StepControl {
            rtol: self.ode,
            atol: 1e-20,
            h_init: 1e-4,
            h_max: 0.25,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingState {
    pub r: f64,
    pub phi: f64,
    pub dphi: f64,
    pub q: f64,
    pub m: f64,
}

impl ShootingState {
    pub fn potential(&self, dim: Dimension) -> f64 {
        self.q - crate::kernel::inverse_power_times(self.r, self.m, dim)
    }

    fn from_real<T: Real>(r: T, y: &[T; 4]) -> Self {
        Self {
            r: r.to_f64(),
            phi: y[0].to_f64(),
            dphi: y[1].to_f64(),
            q: y[2].to_f64(),
            m: y[3].to_f64(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrajectoryOutcome {
    CrossesZero {
        r0: f64,
        state_at_r0: ShootingState,
        profile: RadialProfile,
    },
    Diverges {
        r_div: f64,
    },
    Decays {
        profile: RadialProfile,
        tail_value: f64,
    },
    /// Reached `r_max` positive but above the decay threshold or still rising.
    Unresolved {
        state: ShootingState,
    },
}

/// Positive decreasing solution of `(−Δ + U_Φ)Φ = Φ` on `[0, r0]`, zero at `r0`.
#[derive(Debug, Clone)]
pub struct CanonicalSolution {
    pub profile: RadialProfile,
    pub r0: f64,
    pub u_at_r0: f64,
    pub amplitude: f64,
}

impl CanonicalSolution {
    pub fn dim(&self) -> Dimension {
        self.profile.ball().dim()
    }
}

pub(crate) enum Event<T> {
    Cross { r0: T, y: [T; 4] },
    Diverge { r: T },
    End { r: T, y: [T; 4] },
}

pub(crate) struct Shot<T> {
    pub event: Event<T>,
    pub steps: Vec<DenseStep<T, 4>>,
}

fn rhs<T: Real>(dim: Dimension, w: T) -> impl Fn(T, &[T; 4]) -> [T; 4] {
    let n = dim.n() as i32;
    let nm1 = T::from_f64((n - 1) as f64);
    move |r: T, y: &[T; 4]| {
        let rp = r.powi(n - 2);
        let u = y[2] - y[3] / rp;
        let phi2 = y[0] * y[0];
        [
            y[1],
            -(nm1 * y[1]) / r + (u - T::one()) * y[0],
            w * r * phi2,
            w * rp * r * phi2,
        ]
    }
}

pub(crate) fn potential<T: Real>(dim: Dimension, r: T, y: &[T; 4]) -> T {
    y[2] - y[3] / r.powi(dim.n() as i32 - 2)
}

fn start<T: Real>(a: T, dim: Dimension) -> (T, [T; 4]) {
    let rs = T::from_f64(R_START);
    let n = T::from_f64(dim.as_f64());
    let two = T::from_f64(2.0);
    (rs, [a * (T::one() - rs * rs / (two * n)), -(a * rs) / n, T::zero(), T::zero()])
}

/// Root of `φ(r) = level` inside one step where `φ` falls through it.
pub(crate) fn locate_level<T: Real>(step: &DenseStep<T, 4>, level: T, tol: f64) -> T {
    let mut lo = step.start();
    let mut hi = step.end();
    let tol = T::from_f64(tol);
    let half = T::from_f64(0.5);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = half * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if step.eval(mid)[0] > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // final linear refinement inside the bracket
    let flo = step.eval(lo)[0] - level;
    let fhi = step.eval(hi)[0] - level;
    if flo > T::zero() && fhi < T::zero() {
        lo + (hi - lo) * flo / (flo - fhi)
    } else {
        half * (lo + hi)
    }
}

struct Watch<T> {
    a: T,
    decay: T,
    dim: Dimension,
    event_tol: f64,
    record: bool,
    steps: Vec<DenseStep<T, 4>>,
    event: Option<Event<T>>,
}

impl<T: Real> Watch<T> {
    fn see(&mut self, s: &DenseStep<T, 4>) -> Flow {
        if self.record {
            self.steps.push(s.clone());
        }
        let y = s.y_end();
        let r = s.end();
        if !(y[0] > T::zero()) {
            let rc = locate_level(s, T::zero(), self.event_tol);
            self.event = Some(Event::Cross { r0: rc, y: s.eval(rc) });
            return Flow::Stop;
        }
        if y[0] > self.a || (y[1] > T::zero() && y[0] > self.decay && potential(self.dim, r, &y) > T::one()) {
            self.event = Some(Event::Diverge { r });
            return Flow::Stop;
        }
        Flow::Continue
    }
}

fn integration_error<T: Real>(f: ode::StepFailure<T, 4>) -> Error {
    Error::Integration {
        state: ShootingState::from_real(f.t, &f.y),
        reason: f.reason,
    }
}

pub(crate) fn shoot<T: Real>(a: T, dim: Dimension, r_max: f64, tol: &Tolerances, record: bool) -> Result<Shot<T>> {
    shoot_on(a, dim, r_max, tol, record, None)
}

/// Shoots along the breakpoints of `mesh` where it reaches, adaptively beyond.
pub(crate) fn shoot_on<T: Real>(
    a: T,
    dim: Dimension,
    r_max: f64,
    tol: &Tolerances,
    record: bool,
    mesh: Option<&[T]>,
) -> Result<Shot<T>> {
    let w = T::from_f64(sphere_area(dim));
    let (r0, y0) = start(a, dim);
    let r_end = T::from_f64(r_max);
    let mut watch = Watch {
        a,
        decay: a * T::from_f64(tol.decay),
        dim,
        event_tol: tol.event,
        record,
        steps: Vec::new(),
        event: None,
    };
    let (mut r, mut y) = (r0, y0);
    if let Some(mesh) = mesh {
        let pts: Vec<T> = std::iter::once(r0)
            .chain(mesh.iter().copied().filter(|&t| t > r0 && t <= r_end))
            .collect();
        (r, y) = ode::integrate_mesh(rhs(dim, w), &pts, y0, |s| watch.see(s)).map_err(integration_error)?;
    }
    if watch.event.is_none() && r < r_end {
        (r, y) = ode::integrate(rhs(dim, w), r, y, r_end, [0, 0, 1, 2], &tol.step_control(), |s| watch.see(s))
            .map_err(integration_error)?;
    }
    Ok(Shot {
        event: watch.event.unwrap_or(Event::End { r, y }),
        steps: watch.steps,
    })
}

/// Adaptive step breakpoints of the trajectory with amplitude `a` on
/// `[R_START, r_end]`, continued through its zero until `|φ|` exceeds `a`.
pub(crate) fn reference_mesh<T: Real>(a: T, dim: Dimension, r_end: f64, tol: &Tolerances) -> Result<Vec<T>> {
    let w = T::from_f64(sphere_area(dim));
    let (r0, y0) = start(a, dim);
    let mut mesh = vec![r0];
    ode::integrate(rhs(dim, w), r0, y0, T::from_f64(r_end), [0, 0, 1, 2], &tol.step_control(), |s| {
        mesh.push(s.end());
        if s.y_end()[0].abs() > a {
            Flow::Stop
        } else {
            Flow::Continue
        }
    })
    .map_err(integration_error)?;
    Ok(mesh)
}

/// Samples a recorded trajectory on `intervals` uniform intervals of `[0, end]`.
/// Returns the profile (with derivatives) and the moments at the nodes.
pub(crate) fn sample<T: Real>(
    steps: &[DenseStep<T, 4>],
    a: T,
    dim: Dimension,
    end: T,
    end_state: &[T; 4],
    intervals: usize,
    ball: BallSpec,
) -> Result<(RadialProfile, Vec<f64>, Vec<f64>)> {
    let end_f = end.to_f64();
    let grid = RadialGrid::uniform(end_f, intervals)?;
    let mut phi = Vec::with_capacity(intervals + 1);
    let mut dphi = Vec::with_capacity(intervals + 1);
    let mut q = Vec::with_capacity(intervals + 1);
    let mut m = Vec::with_capacity(intervals + 1);
    let h = end / T::from_f64(intervals as f64);
    let mut j = 0;
    for k in 0..=intervals {
        let y = if k == 0 {
            [a, T::zero(), T::zero(), T::zero()]
        } else if k == intervals {
            *end_state
        } else {
            let r = h * T::from_f64(k as f64);
            if r < steps[0].start() {
                start(a, dim).1
            } else {
                while j + 1 < steps.len() && steps[j].end() < r {
                    j += 1;
                }
                steps[j].eval(r)
            }
        };
        phi.push(y[0].to_f64());
        dphi.push(y[1].to_f64());
        q.push(y[2].to_f64());
        m.push(y[3].to_f64());
    }
    let profile = RadialProfile::with_derivatives(grid, phi, dphi, ball)?;
    Ok((profile, q, m))
}

/// Integrates one canonical trajectory with amplitude `Φ(0) = amplitude`.
pub fn integrate_trajectory(amplitude: f64, dim: Dimension, r_max: f64, tol: &Tolerances) -> Result<TrajectoryOutcome> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::Domain(format!("amplitude must be positive and finite, got {amplitude}")));
    }
    if !(r_max > R_START && r_max.is_finite()) {
        return Err(Error::Domain(format!("r_max must exceed {R_START}, got {r_max}")));
    }
    tol.validate()?;
    let shot = shoot(amplitude, dim, r_max, tol, true)?;
    match shot.event {
        Event::Cross { r0, y } => {
            let ball = BallSpec::new(dim, r0)?;
            let mut end = y;
            end[0] = 0.0;
            let (profile, _, _) = sample(&shot.steps, amplitude, dim, r0, &end, tol.profile_intervals, ball)?;
            Ok(TrajectoryOutcome::CrossesZero {
                r0,
                state_at_r0: ShootingState::from_real(r0, &end),
                profile,
            })
        }
        Event::Diverge { r } => Ok(TrajectoryOutcome::Diverges { r_div: r }),
        Event::End { r, y } => {
            if y[0] > 0.0 && y[0] < tol.decay * amplitude && y[1] < 0.0 {
                let ball = BallSpec::whole_space(dim);
                let (profile, _, _) = sample(&shot.steps, amplitude, dim, r, &y, tol.profile_intervals, ball)?;
                Ok(TrajectoryOutcome::Decays { profile, tail_value: y[0] })
            } else {
                Ok(TrajectoryOutcome::Unresolved {
                    state: ShootingState::from_real(r, &y),
                })
            }
        }
    }
}

/// Canonical solution crossing zero for amplitude `a`, if the trajectory crosses.
pub fn canonical_solution(amplitude: f64, dim: Dimension, tol: &Tolerances) -> Result<Option<CanonicalSolution>> {
    match integrate_trajectory(amplitude, dim, tol.r_max, tol)? {
        TrajectoryOutcome::CrossesZero { r0, state_at_r0, profile } => Ok(Some(CanonicalSolution {
            profile,
            r0,
            u_at_r0: state_at_r0.potential(dim),
            amplitude,
        })),
        _ => Ok(None),
    }
}

pub(crate) fn canonical_from_shot<T: Real>(a: T, dim: Dimension, shot: &Shot<T>, tol: &Tolerances) -> Result<CanonicalSolution> {
    match &shot.event {
        Event::Cross { r0, y } => {
            let ball = BallSpec::new(dim, r0.to_f64())?;
            let mut end = *y;
            end[0] = T::zero();
            let (profile, _, _) = sample(&shot.steps, a, dim, *r0, &end, tol.profile_intervals, ball)?;
            Ok(CanonicalSolution {
                profile,
                r0: r0.to_f64(),
                u_at_r0: potential(dim, *r0, y).to_f64(),
                amplitude: a.to_f64(),
            })
        }
        _ => Err(Error::Convergence("selected trajectory does not cross zero".into())),
    }
}

/// Multiplier of the ball ground state obtained by rescaling a crossing.
pub fn lambda_from_crossing(sol: &CanonicalSolution) -> Result<f64> {
    if !(sol.u_at_r0 > 1.0) {
        return Err(Error::NoPositiveLambda { u_at_r0: sol.u_at_r0 });
    }
    Ok(1.0 / (sol.u_at_r0 - 1.0))
}

/// Physical profile `φ(r) = λ Φ(√λ r)` on `[0, r0/√λ]`.
pub(crate) fn rescale_profile(canonical: &RadialProfile, lambda: f64, ball: BallSpec) -> Result<RadialProfile> {
    let s = lambda.sqrt();
    let nodes: Vec<f64> = canonical.nodes().iter().map(|r| r / s).collect();
    let values = canonical.values().iter().map(|v| lambda * v).collect();
    let derivs = canonical.nodal_derivatives().iter().map(|d| lambda * s * d).collect();
    let mut nodes = nodes;
    let last = nodes.len() - 1;
    if !ball.is_whole_space() {
        nodes[last] = nodes[last].min(ball.radius());
    }
    RadialProfile::with_derivatives(RadialGrid::new(nodes)?, values, derivs, ball)
}
