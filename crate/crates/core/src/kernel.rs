//! Kernels and radial potentials of the ball.
//!
//! The Newton kernel `|x − y|^{2−N}` averaged over a sphere is
//! `min(r^{2−N}, |x|^{2−N}) = max(r, |x|)^{2−N}`, so every convolution with a radial density reduces to
//! the two cumulative moments
//! `q(r) = ω_N ∫₀^r s φ² ds` and `m(r) = ω_N ∫₀^r s^{N−1} φ² ds`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::profile::RadialProfile;
use crate::quadrature;

/// Spatial dimension `n ≥ 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dimension(u32);

impl Dimension {
    pub fn new(n: u32) -> Result<Self> {
        if n < 3 {
            return Err(Error::Dimension(n));
        }
        Ok(Self(n))
    }

    pub fn n(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Exponent `2 − N` of the Newton kernel.
    pub fn kernel_exponent(self) -> i32 {
        2 - self.0 as i32
    }

    /// Whether the uniqueness theory covers this dimension.
    pub fn uniqueness_guaranteed(self) -> bool {
        (3..=6).contains(&self.0)
    }
}

impl TryFrom<u32> for Dimension {
    type Error = Error;
    fn try_from(n: u32) -> Result<Self> {
        Self::new(n)
    }
}

impl From<Dimension> for u32 {
    fn from(d: Dimension) -> u32 {
        d.0
    }
}

/// Ball `B_R` centred at the origin. `radius = ∞` denotes the whole space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallSpec {
    dim: Dimension,
    radius: f64,
}

impl BallSpec {
    pub fn new(dim: Dimension, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Radius(radius));
        }
        Ok(Self { dim, radius })
    }

    pub fn whole_space(dim: Dimension) -> Self {
        Self { dim, radius: f64::INFINITY }
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn is_whole_space(&self) -> bool {
        self.radius.is_infinite()
    }

    /// `R^{2−N}`, zero for the whole space.
    pub fn boundary_kernel(&self) -> f64 {
        if self.is_whole_space() {
            0.0
        } else {
            self.radius.powi(self.dim.kernel_exponent())
        }
    }
}

/// Surface area `ω_N = 2π^{N/2}/Γ(N/2)` of the unit sphere in `ℝ^N`.
pub fn sphere_area(dim: Dimension) -> f64 {
    let half = dim.as_f64() / 2.0;
    (std::f64::consts::LN_2 + half * std::f64::consts::PI.ln() - ln_gamma(half)).exp()
}

/// Spherical average of `|r z − x|^{2−N}` over unit `z`, with `|x| = rho`.
pub fn newton_kernel(r: f64, rho: f64, dim: Dimension) -> Result<f64> {
    check_radius(r)?;
    check_radius(rho)?;
    if r == 0.0 && rho == 0.0 {
        return Err(Error::Singularity("newton kernel at r = rho = 0"));
    }
    Ok(r.max(rho).powi(dim.kernel_exponent()))
}

fn check_radius(r: f64) -> Result<()> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("radius {r} must be finite and nonnegative")));
    }
    Ok(())
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Dirichlet Green's function of the ball (kernel normalization `|x−y|^{2−N}`).
pub fn green_pointwise(x: &[f64], y: &[f64], ball: &BallSpec) -> Result<f64> {
    let n = ball.dim.n() as usize;
    if x.len() != n || y.len() != n {
        return Err(Error::Domain(format!(
            "points must have {n} coordinates (got {} and {})",
            x.len(),
            y.len()
        )));
    }
    let r = ball.radius;
    let (nx, ny) = (norm(x), norm(y));
    if !nx.is_finite() || !ny.is_finite() || nx > r || ny > r {
        return Err(Error::Domain(format!("points must lie in the closed ball of radius {r}")));
    }
    let e = ball.dim.kernel_exponent();
    let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if d == 0.0 {
        return Err(Error::Singularity("green function at x = y"));
    }
    if nx == 0.0 {
        return Ok(d.powi(e) - ball.boundary_kernel());
    }
    // |x|/R · |y − x̃| with x̃ = R² x / |x|²
    let s = r * r / (nx * nx);
    let dual: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - s * a) * (b - s * a))
        .sum::<f64>()
        .sqrt();
    Ok(d.powi(e) - (nx / r * dual).powi(e))
}

/// Average of [`green_pointwise`] over the sphere `|x| = r` for `|y| = rho`.
pub fn green_radial_avg(r: f64, rho: f64, ball: &BallSpec) -> Result<f64> {
    let k = newton_kernel(r, rho, ball.dim)?;
    if r > ball.radius || rho > ball.radius {
        return Err(Error::Domain(format!("radii ({r}, {rho}) exceed ball radius {}", ball.radius)));
    }
    Ok(k - ball.boundary_kernel())
}

/// Cumulative moments `(q, m)` on the profile's own grid.
pub fn moments(phi: &RadialProfile) -> (RadialProfile, RadialProfile) {
    let dim = phi.ball().dim();
    let w = sphere_area(dim);
    let x = phi.nodes();
    let g: Vec<f64> = phi.values().iter().map(|v| w * v * v).collect();
    let mut q = quadrature::cumulative_weighted(x, &g, 1);
    let mut m = quadrature::cumulative_weighted(x, &g, dim.n() - 1);
    make_monotone(&mut q);
    make_monotone(&mut m);
    (phi.map_values_from(q), phi.map_values_from(m))
}

// Nonnegative integrands give nondecreasing moments; the fourth-order panel
// rule can dip by round-off where φ vanishes on a stretch.
fn make_monotone(v: &mut [f64]) {
    for i in 1..v.len() {
        if v[i] < v[i - 1] {
            v[i] = v[i - 1];
        }
    }
}

/// `r^{2−N} m(r)` with the analytic value 0 at the origin.
pub(crate) fn inverse_power_times(r: f64, m: f64, dim: Dimension) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r.powi(dim.kernel_exponent()) * m
    }
}

/// `U_φ(r) = q(r) − r^{2−N} m(r)`.
pub fn u_potential(phi: &RadialProfile) -> RadialProfile {
    let dim = phi.ball().dim();
    let (q, m) = moments(phi);
    let vals = phi
        .nodes()
        .iter()
        .zip(q.values().iter().zip(m.values()))
        .map(|(&r, (&q, &m))| (q - inverse_power_times(r, m, dim)).max(0.0))
        .collect();
    phi.map_values_from(vals)
}

/// `V_φ(r) = −U_φ(r) + q(R) − R^{2−N} m(R)`.
pub fn v_potential(phi: &RadialProfile, ball: &BallSpec) -> RadialProfile {
    let u = u_potential(phi);
    let c = lambda_of(phi, ball) + 1.0;
    u.map_values(|_, v| c - v)
}

/// `λ(φ) = q(R) − R^{2−N} m(R) − 1`.
pub fn lambda_of(phi: &RadialProfile, ball: &BallSpec) -> f64 {
    let (q, m) = moments(phi);
    let qr = *q.values().last().expect("nonempty profile");
    let mr = *m.values().last().expect("nonempty profile");
    qr - ball.boundary_kernel() * mr - 1.0
}

impl RadialProfile {
    /// Same grid and ball, different values (no derivatives).
    pub(crate) fn map_values_from(&self, values: Vec<f64>) -> RadialProfile {
        RadialProfile::new(self.grid().clone(), values, *self.ball()).expect("same grid and ball")
    }
}
