//! Norms, the interaction energy `𝔻(u)`, Nehari projection and the radial
//! Schrödinger eigenvalue.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{green_radial_avg, sphere_area, v_potential, BallSpec, Dimension};
use crate::profile::RadialProfile;
use crate::quadrature::{gauss_legendre, integrate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergySource {
    NewtonRoute,
    DirectRoute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub h1_norm_sq: f64,
    pub dd: f64,
    pub t_u: f64,
    pub energy_at_projection: f64,
    pub source: EnergySource,
}

impl EnergyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        let fields = [r.h1_norm_sq, r.dd, r.t_u, r.energy_at_projection];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("energy report fields must be finite".into()));
        }
        Ok(r)
    }
}

fn radial_weight(dim: Dimension) -> impl Fn(f64) -> f64 {
    let e = dim.n() as i32 - 1;
    move |r: f64| r.powi(e)
}

/// `ω_N ∫₀^R (φ′² + φ²) r^{N−1} dr`.
pub fn h1_norm_sq(phi: &RadialProfile) -> f64 {
    let dim = phi.ball().dim();
    let w = radial_weight(dim);
    let d = phi.nodal_derivatives();
    let f: Vec<f64> = phi
        .nodes()
        .iter()
        .zip(phi.values().iter().zip(&d))
        .map(|(&r, (&v, &dv))| (dv * dv + v * v) * w(r))
        .collect();
    sphere_area(dim) * integrate(phi.nodes(), &f)
}

/// `ω_N ∫₀^R φ′² r^{N−1} dr`.
pub fn dirichlet_norm_sq(phi: &RadialProfile) -> f64 {
    let dim = phi.ball().dim();
    let w = radial_weight(dim);
    let d = phi.nodal_derivatives();
    let f: Vec<f64> = phi.nodes().iter().zip(&d).map(|(&r, &dv)| dv * dv * w(r)).collect();
    sphere_area(dim) * integrate(phi.nodes(), &f)
}

/// `ω_N ∫₀^R φ² r^{N−1} dr`.
pub fn l2_norm_sq(phi: &RadialProfile) -> f64 {
    let dim = phi.ball().dim();
    let w = radial_weight(dim);
    let f: Vec<f64> = phi.nodes().iter().zip(phi.values()).map(|(&r, &v)| v * v * w(r)).collect();
    sphere_area(dim) * integrate(phi.nodes(), &f)
}

/// `𝔻(φ)` through the Newton potential: `ω_N ∫ V_φ φ² r^{N−1} dr`.
pub fn dd_newton(phi: &RadialProfile, ball: &BallSpec) -> f64 {
    let dim = ball.dim();
    let w = radial_weight(dim);
    let v = v_potential(phi, ball);
    let f: Vec<f64> = phi
        .nodes()
        .iter()
        .zip(phi.values().iter().zip(v.values()))
        .map(|(&r, (&p, &v))| v * p * p * w(r))
        .collect();
    sphere_area(dim) * integrate(phi.nodes(), &f)
}

/// `𝔻(φ)` by brute-force double quadrature of the averaged Green's function.
pub fn dd_direct(phi: &RadialProfile, ball: &BallSpec) -> f64 {
    dd_direct_ordered(phi, ball, false)
}

const MAX_PANELS: usize = 256;

struct Panels {
    bounds: Vec<(f64, f64)>,
}

fn panels(phi: &RadialProfile) -> Panels {
    let x = phi.nodes();
    let intervals = x.len() - 1;
    let group = intervals.div_ceil(MAX_PANELS);
    let mut bounds = Vec::new();
    let mut i = 0;
    while i < intervals {
        let j = (i + group).min(intervals);
        bounds.push((x[i], x[j]));
        i = j;
    }
    Panels { bounds }
}

/// Double quadrature over panel pairs. Off-diagonal pairs use tensor
/// Gauss–Legendre; diagonal squares are folded onto the triangle `ρ < r`,
/// where the kernel is smooth, and integrated with a collapsed rule.
/// `swap` exchanges the roles of the two variables in the loops.
pub(crate) fn dd_direct_ordered(phi: &RadialProfile, ball: &BallSpec, swap: bool) -> f64 {
    let dim = ball.dim();
    let wr = radial_weight(dim);
    let p = panels(phi);
    let order = if p.bounds.len() < phi.len() - 1 { 10 } else { 6 };
    let (gx, gw) = gauss_legendre(order);
    let density = |r: f64| {
        let v = phi.eval(r);
        v * v * wr(r)
    };
    let kern = |r: f64, rho: f64| green_radial_avg(r, rho, ball).unwrap_or(0.0);

    // nodes and weights per panel
    let pts: Vec<Vec<(f64, f64, f64)>> = p
        .bounds
        .iter()
        .map(|&(a, b)| {
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            gx.iter()
                .zip(&gw)
                .map(|(&x, &w)| {
                    let r = c + h * x;
                    (r, w * h, density(r))
                })
                .collect()
        })
        .collect();

    let np = pts.len();
    let mut total = 0.0;
    for i in 0..np {
        let mut row = 0.0;
        for j in 0..np {
            let (pi, pj) = if swap { (&pts[j], &pts[i]) } else { (&pts[i], &pts[j]) };
            if i == j {
                let (a, b) = p.bounds[i];
                row += 2.0 * triangle(a, b, &gx, &gw, &density, &kern);
                continue;
            }
            let mut s = 0.0;
            for &(r, w1, f1) in pi {
                for &(rho, w2, f2) in pj {
                    s += w1 * w2 * f1 * f2 * kern(r, rho);
                }
            }
            row += s;
        }
        total += row;
    }
    let w = sphere_area(dim);
    w * w * total
}

// ∫_a^b ∫_a^r K(r, ρ) f(r) f(ρ) dρ dr with ρ = a + (r − a)s.
fn triangle(
    a: f64,
    b: f64,
    gx: &[f64],
    gw: &[f64],
    density: &impl Fn(f64) -> f64,
    kern: &impl Fn(f64, f64) -> f64,
) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for (&x, &w) in gx.iter().zip(gw) {
        let r = c + h * x;
        let fr = density(r);
        let jac = r - a;
        let mut inner = 0.0;
        for (&y, &v) in gx.iter().zip(gw) {
            let rho = a + jac * 0.5 * (1.0 + y);
            inner += 0.5 * v * density(rho) * kern(r, rho);
        }
        s += w * h * fr * jac * inner;
    }
    s
}

/// Nehari projection `t_u = (‖u‖²/𝔻(u))^{1/2}` and `sup_t I(tu)`.
pub fn nehari_scale(phi: &RadialProfile, ball: &BallSpec) -> Result<EnergyReport> {
    nehari_scale_with(phi, ball, EnergySource::NewtonRoute)
}

pub fn nehari_scale_with(phi: &RadialProfile, ball: &BallSpec, source: EnergySource) -> Result<EnergyReport> {
    if phi.values().iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("zero profile has no Nehari projection"));
    }
    let h = h1_norm_sq(phi);
    let dd = match source {
        EnergySource::NewtonRoute => dd_newton(phi, ball),
        EnergySource::DirectRoute => dd_direct(phi, ball),
    };
    if !(dd > 0.0) {
        return Err(Error::Degenerate("interaction energy is not positive"));
    }
    Ok(EnergyReport {
        h1_norm_sq: h,
        dd,
        t_u: (h / dd).sqrt(),
        energy_at_projection: h * h / (4.0 * dd),
        source,
    })
}

/// `I_R(φ) = ½‖φ‖² − ¼𝔻(φ)`.
pub fn energy(phi: &RadialProfile, ball: &BallSpec) -> f64 {
    0.5 * h1_norm_sq(phi) - 0.25 * dd_newton(phi, ball)
}

/// Default number of intervals of the eigenvalue grid.
pub const EIGEN_INTERVALS: usize = 4000;

/// Smallest Dirichlet eigenvalue of `−Δ + U(r)` on radial functions in `B_radius`.
pub fn smallest_eigenvalue(u: &RadialProfile, radius: f64, dim: Dimension) -> Result<f64> {
    smallest_eigenvalue_on(|r| u.eval(r.min(u.end())), radius, dim, EIGEN_INTERVALS)
}

/// Finite-volume discretization on `intervals` uniform cells with nodes
/// `r_i = i h`, unknowns `i = 0..intervals−1` and `u(radius) = 0`:
/// `K u = μ W u`, `K` symmetric tridiagonal, `W` the diagonal shell volumes.
/// Solved by inverse iteration with Rayleigh-quotient updates.
pub fn smallest_eigenvalue_on(u: impl Fn(f64) -> f64, radius: f64, dim: Dimension, intervals: usize) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Radius(radius));
    }
    if intervals < 8 {
        return Err(Error::Grid(format!("eigenvalue grid needs at least 8 intervals, got {intervals}")));
    }
    let n = dim.n() as i32;
    let nf = dim.as_f64();
    let m = intervals;
    let h = radius / m as f64;
    let face = |k: usize| {
        let r = (k as f64 + 0.5) * h;
        r.powi(n - 1)
    };
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m];
    let mut vol = vec![0.0; m];
    for i in 0..m {
        let r = i as f64 * h;
        let lo = if i == 0 { 0.0 } else { (r - 0.5 * h).powi(n) };
        let hi = (r + 0.5 * h).powi(n);
        vol[i] = (hi - lo) / nf;
        let a_right = face(i) / h;
        let a_left = if i == 0 { 0.0 } else { face(i - 1) / h };
        let ui = u(r);
        if !ui.is_finite() {
            return Err(Error::Domain(format!("potential is not finite at r = {r}")));
        }
        diag[i] = a_left + a_right + ui * vol[i];
        off[i] = -a_right;
    }
    let matvec = |x: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += off[i - 1] * x[i - 1];
                }
                if i + 1 < m {
                    s += off[i] * x[i + 1];
                }
                s
            })
            .collect()
    };
    let rayleigh = |x: &[f64]| {
        let kx = matvec(x);
        let num: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().zip(&vol).map(|(a, w)| a * a * w).sum();
        num / den
    };

    // shift below the spectrum: K ≥ min(U)·W
    let umin = (0..m).map(|i| u(i as f64 * h)).fold(f64::INFINITY, f64::min);
    let sigma = umin.min(0.0) - 1.0;

    let mut x: Vec<f64> = (0..m)
        .map(|i| (std::f64::consts::FRAC_PI_2 * i as f64 / m as f64).cos())
        .collect();
    let mut mu = rayleigh(&x);
    let mut history = vec![mu];
    for _ in 0..500 {
        let b: Vec<f64> = x.iter().zip(&vol).map(|(a, w)| a * w).collect();
        let d: Vec<f64> = diag.iter().zip(&vol).map(|(d, w)| d - sigma * w).collect();
        let y = thomas(&off, &d, &b)?;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.iter().map(|v| v / norm).collect();
        let next = rayleigh(&x);
        history.push(next);
        if (next - mu).abs() <= 1e-14 * next.abs().max(1.0) {
            return Ok(next);
        }
        mu = next;
    }
    Err(Error::Iterative {
        what: "inverse iteration",
        iterations: 500,
        history,
    })
}

// Symmetric tridiagonal solve with sub/super-diagonal `off`.
fn thomas(off: &[f64], diag: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut piv = diag[0];
    if piv == 0.0 {
        return Err(Error::Degenerate("singular tridiagonal system"));
    }
    c[0] = if m > 1 { off[0] / piv } else { 0.0 };
    d[0] = b[0] / piv;
    for i in 1..m {
        piv = diag[i] - off[i - 1] * c[i - 1];
        if piv == 0.0 {
            return Err(Error::Degenerate("singular tridiagonal system"));
        }
        if i + 1 < m {
            c[i] = off[i] / piv;
        }
        d[i] = (b[i] - off[i - 1] * d[i - 1]) / piv;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}
