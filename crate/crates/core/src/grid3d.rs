//! Three-dimensional cube grids masked to a ball, the 7-point Dirichlet
//! Poisson solver, and the coupled fixed-point oracle for
//! `−Δu + u = 4π w u`, `−Δw = u²`.
//!
//! A node belongs to the ball iff `|x| < R − h/2`. Every field is zero off the
//! mask, which is also the Dirichlet condition of the discrete operators.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::BallSpec;
use crate::profile::{RadialGrid, RadialProfile};

#[derive(Debug, Clone)]
pub struct GridFunction3D {
    n: usize,
    h: f64,
    ball: BallSpec,
    mask: Arc<[bool]>,
    values: Vec<f64>,
}

/// JSON sidecar of the flat binary field format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub n: usize,
    pub h: f64,
    #[serde(rename = "R")]
    pub radius: f64,
}

fn build_mask(n: usize, h: f64, radius: f64) -> Arc<[bool]> {
    let c = (n / 2) as f64;
    let lim = radius - 0.5 * h;
    let mut mask = vec![false; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let (x, y, z) = ((i as f64 - c) * h, (j as f64 - c) * h, (k as f64 - c) * h);
                mask[(i * n + j) * n + k] = (x * x + y * y + z * z).sqrt() < lim;
            }
        }
    }
    mask.into()
}

impl GridFunction3D {
    /// Zero field on `n³` nodes spanning `[−R, R]³`.
    pub fn zeros(ball: BallSpec, n: usize) -> Result<Self> {
        if ball.dim().n() != 3 {
            return Err(Error::Domain(format!("grid fields are three-dimensional, got N = {}", ball.dim().n())));
        }
        if ball.is_whole_space() {
            return Err(Error::Domain("grid fields need a finite ball".into()));
        }
        if n < 3 || n % 2 == 0 {
            return Err(Error::Grid(format!("nodes per axis must be odd and at least 3, got {n}")));
        }
        if n > 1025 {
            return Err(Error::Grid(format!("nodes per axis {n} exceeds 1025")));
        }
        let h = 2.0 * ball.radius() / (n - 1) as f64;
        Ok(Self {
            n,
            h,
            ball,
            mask: build_mask(n, h, ball.radius()),
            values: vec![0.0; n * n * n],
        })
    }

    /// Samples `f` on the masked nodes.
    pub fn from_fn(ball: BallSpec, n: usize, f: impl Fn([f64; 3]) -> f64 + Sync) -> Result<Self> {
        let mut g = Self::zeros(ball, n)?;
        let vals: Vec<f64> = (0..g.values.len())
            .into_par_iter()
            .map(|idx| if g.mask[idx] { f(g.point(idx)) } else { 0.0 })
            .collect();
        g.set_values(vals)?;
        Ok(g)
    }

    /// Same grid, new values; values off the mask must be zero.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        let mut g = Self {
            values: Vec::new(),
            ..self.clone_shape()
        };
        g.set_values(values)?;
        Ok(g)
    }

    fn clone_shape(&self) -> Self {
        Self {
            n: self.n,
            h: self.h,
            ball: self.ball,
            mask: Arc::clone(&self.mask),
            values: Vec::new(),
        }
    }

    fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n.pow(3) {
            return Err(Error::Grid(format!("expected {} values, got {}", self.n.pow(3), values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Grid(format!("non-finite value at flat index {i}")));
        }
        if let Some(i) = values.iter().zip(self.mask.iter()).position(|(v, &m)| !m && *v != 0.0) {
            return Err(Error::Grid(format!("nonzero value outside the ball mask at flat index {i}")));
        }
        self.values = values;
        Ok(())
    }

    // unchecked: callers keep the mask invariant
    fn from_raw(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            ..self.clone_shape()
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn ball(&self) -> &BallSpec {
        &self.ball
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        let c = (n / 2) as f64;
        let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
        [(i as f64 - c) * self.h, (j as f64 - c) * self.h, (k as f64 - c) * self.h]
    }

    pub fn radius_at(&self, idx: usize) -> f64 {
        let p = self.point(idx);
        (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
    }

    pub fn in_ball(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn interior_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Applies `f` to the masked values.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        let vals = self
            .values
            .par_iter()
            .zip(self.mask.par_iter())
            .map(|(&v, &m)| if m { f(v) } else { 0.0 })
            .collect();
        self.from_raw(vals)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn min_interior(&self) -> f64 {
        self.values
            .iter()
            .zip(self.mask.iter())
            .filter(|(_, &m)| m)
            .fold(f64::INFINITY, |a, (v, _)| a.min(*v))
    }

    /// `Σ |u|^p h³`.
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        self.h.powi(3) * slab_sum(self.n, &self.values, |_, v| v.abs().powf(p))
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.h.powi(3) * dot(self.n, &self.values, &self.values)
    }

    /// `Σ_edges (u_a − u_b)² h`, the energy of the 7-point Laplacian.
    pub fn dirichlet_norm_sq(&self) -> f64 {
        let n = self.n;
        let v = &self.values;
        let per_slab: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        let a = v[(i * n + j) * n + k];
                        let next = [
                            if i + 1 < n { v[((i + 1) * n + j) * n + k] } else { 0.0 },
                            if j + 1 < n { v[(i * n + j + 1) * n + k] } else { 0.0 },
                            if k + 1 < n { v[(i * n + j) * n + k + 1] } else { 0.0 },
                        ];
                        for b in next {
                            s += (a - b) * (a - b);
                        }
                    }
                }
                s
            })
            .collect();
        self.h * per_slab.iter().sum::<f64>()
    }

    pub fn h1_norm_sq(&self) -> f64 {
        self.dirichlet_norm_sq() + self.l2_norm_sq()
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            n: self.n,
            h: self.h,
            radius: self.ball.radius(),
        }
    }

    /// Row-major (x, y, z) little-endian `f64` values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_binary(&mut buf).expect("writing to a vector cannot fail");
        buf
    }

    /// Parses the binary body together with its JSON sidecar.
    pub fn from_binary(bytes: &[u8], sidecar: &str) -> Result<Self> {
        let meta: Sidecar = serde_json::from_str(sidecar)?;
        if meta.n < 3 || meta.n % 2 == 0 || meta.n > 1025 {
            return Err(Error::Parse(format!("sidecar n = {} must be odd in 3..=1025", meta.n)));
        }
        let ball = BallSpec::new(crate::kernel::Dimension::new(3)?, meta.radius)?;
        let g = Self::zeros(ball, meta.n)?;
        if !(meta.h.is_finite() && (meta.h / g.h - 1.0).abs() < 1e-12) {
            return Err(Error::Parse(format!("sidecar h = {} disagrees with 2R/(n−1) = {}", meta.h, g.h)));
        }
        let expected = meta.n.pow(3) * 8;
        if bytes.len() != expected {
            return Err(Error::Parse(format!("expected {expected} bytes, got {}", bytes.len())));
        }
        let vals = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        g.with_values(vals).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Deterministic parallel sum: one partial per x-slab, added in slab order.
fn slab_sum(n: usize, a: &[f64], f: impl Fn(usize, f64) -> f64 + Sync) -> f64 {
    let per: Vec<f64> = a
        .par_chunks(n * n)
        .enumerate()
        .map(|(s, c)| c.iter().enumerate().map(|(i, &v)| f(s * n * n + i, v)).sum::<f64>())
        .collect();
    per.iter().sum()
}

fn dot(n: usize, a: &[f64], b: &[f64]) -> f64 {
    slab_sum(n, a, |i, v| v * b[i])
}

/// `(−Δ_h + shift) x` on masked nodes, zero elsewhere.
fn apply(g: &GridFunction3D, shift: f64, x: &[f64], out: &mut [f64]) {
    let n = g.n;
    let diag = 6.0 / (g.h * g.h) + shift;
    let off = 1.0 / (g.h * g.h);
    let mask = &g.mask;
    out.par_chunks_mut(n * n).enumerate().for_each(|(i, slab)| {
        for j in 0..n {
            for k in 0..n {
                let idx = (i * n + j) * n + k;
                // masked nodes never touch the cube faces
                slab[j * n + k] = if mask[idx] {
                    diag * x[idx]
                        - off
                            * (x[idx - n * n] + x[idx + n * n] + x[idx - n] + x[idx + n] + x[idx - 1] + x[idx + 1])
                } else {
                    0.0
                };
            }
        }
    });
}

/// Conjugate gradients for `(−Δ_h + shift) x = b` to relative residual `rtol`.
fn cg(g: &GridFunction3D, shift: f64, b: &[f64], guess: Option<&[f64]>, rtol: f64, what: &'static str) -> Result<Vec<f64>> {
    let n = g.n;
    let len = b.len();
    let mut x = match guess {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; len],
    };
    let bnorm = dot(n, b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; len]);
    }
    let mut ax = vec![0.0; len];
    apply(g, shift, &x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(n, &r, &r);
    let max_iter = 20 * n + 200;
    let mut history = Vec::new();
    let mut ap = vec![0.0; len];
    for _ in 0..max_iter {
        let rel = rr.sqrt() / bnorm;
        history.push(rel);
        if rel <= rtol {
            return Ok(x);
        }
        apply(g, shift, &p, &mut ap);
        let pap = dot(n, &p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        x.par_iter_mut().zip(p.par_iter()).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(ap.par_iter()).for_each(|(r, a)| *r -= alpha * a);
        let rr_new = dot(n, &r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p.par_iter_mut().zip(r.par_iter()).for_each(|(p, r)| *p = r + beta * *p);
    }
    let tail = history.len().saturating_sub(50);
    Err(Error::Iterative {
        what,
        iterations: history.len(),
        history: history.split_off(tail),
    })
}

const CG_RTOL: f64 = 1e-10;

/// Discrete solution of `−Δw = f` with zero values off the mask.
pub fn poisson_solve(f: &GridFunction3D) -> Result<GridFunction3D> {
    poisson_solve_from(f, None)
}

/// As [`poisson_solve`], starting CG from `guess`.
pub fn poisson_solve_from(f: &GridFunction3D, guess: Option<&GridFunction3D>) -> Result<GridFunction3D> {
    let x = cg(f, 0.0, &f.values, guess.map(|g| &g.values[..]), CG_RTOL, "Poisson CG")?;
    Ok(f.from_raw(x))
}

/// Discrete solution of `(−Δ + 1)u = f`.
pub fn screened_solve_from(f: &GridFunction3D, guess: Option<&GridFunction3D>) -> Result<GridFunction3D> {
    let x = cg(f, 1.0, &f.values, guess.map(|g| &g.values[..]), CG_RTOL, "screened Poisson CG")?;
    Ok(f.from_raw(x))
}

/// `(−Δ_h + shift) u` as a field.
pub fn apply_operator(u: &GridFunction3D, shift: f64) -> GridFunction3D {
    let mut out = vec![0.0; u.values.len()];
    apply(u, shift, &u.values, &mut out);
    u.from_raw(out)
}

fn product(a: &GridFunction3D, b: &GridFunction3D) -> GridFunction3D {
    let v = a.values.par_iter().zip(b.values.par_iter()).map(|(x, y)| x * y).collect();
    a.from_raw(v)
}

/// `4π Σ w u² h³` with `−Δw = u²`; the factor turns the Dirichlet Green's
/// function of `−Δ` into the kernel `|x − y|^{−1}` minus its image.
pub fn dd_grid(u: &GridFunction3D) -> Result<f64> {
    Ok(dd_with(u, &poisson_solve(&product(u, u))?))
}

fn dd_with(u: &GridFunction3D, w: &GridFunction3D) -> f64 {
    4.0 * PI * u.h.powi(3) * slab_sum(u.n, &u.values, |i, v| w.values[i] * v * v)
}

#[derive(Debug, Clone)]
pub struct CoupledField {
    pub u: GridFunction3D,
    pub w: GridFunction3D,
    pub iteration: usize,
    /// Larger relative residual of the two discrete equations.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub enum OracleSeed {
    /// Positive random values (ChaCha8 with this seed) under a smooth envelope.
    Random(u64),
    /// A single bump centred at `(R/3, 0, 0)`.
    Asymmetric,
    /// A radial profile sampled at `|x|`.
    Profile(RadialProfile),
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub damping: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            damping: 0.8,
            rel_tol: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub field: CoupledField,
    /// `¼‖u‖²` of the converged field, in the grid norm.
    pub energy: f64,
    pub h1_norm_sq: f64,
    pub dd: f64,
    /// Relative `H¹` change per iteration.
    pub history: Vec<f64>,
}

fn seed_field(ball: BallSpec, n: usize, seed: &OracleSeed) -> Result<GridFunction3D> {
    let r = ball.radius();
    let envelope = move |p: [f64; 3]| {
        let s = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() / r;
        (1.0 - s * s).max(0.0)
    };
    match seed {
        OracleSeed::Random(s) => {
            let g = GridFunction3D::zeros(ball, n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*s);
            let vals = (0..g.values.len())
                .map(|idx| {
                    let noise: f64 = rng.gen_range(0.5..1.5);
                    if g.mask[idx] {
                        noise * envelope(g.point(idx))
                    } else {
                        0.0
                    }
                })
                .collect();
            g.with_values(vals)
        }
        OracleSeed::Asymmetric => GridFunction3D::from_fn(ball, n, move |p| {
            let d2 = (p[0] - r / 3.0).powi(2) + p[1] * p[1] + p[2] * p[2];
            (-d2 / 2.0).exp() * envelope(p)
        }),
        OracleSeed::Profile(profile) => {
            GridFunction3D::from_fn(ball, n, |p| profile.eval((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()).max(0.0))
        }
    }
}

fn nehari_factor(u: &GridFunction3D, w: &GridFunction3D) -> Result<(f64, f64, f64)> {
    let h1 = u.h1_norm_sq();
    let dd = dd_with(u, w);
    if !(h1 > 1e-300 && dd > 0.0) {
        return Err(Error::Degenerate("oracle iterate collapsed to the zero field"));
    }
    Ok(((h1 / dd).sqrt(), h1, dd))
}

/// Fixed-point iteration for the ground state of the coupled system on the
/// grid: `w ← (−Δ)⁻¹u²`, `ũ ← (−Δ+1)⁻¹(4πwu)`, Nehari-normalise `ũ`, damp.
pub fn ground_state_iterate(ball: &BallSpec, n_grid: usize, seed: &OracleSeed, opts: &OracleOptions) -> Result<OracleRun> {
    if ball.dim().n() != 3 {
        return Err(Error::Domain("the grid oracle is three-dimensional".into()));
    }
    if n_grid < 33 || n_grid % 2 == 0 {
        return Err(Error::Grid(format!("oracle grid must be odd and at least 33, got {n_grid}")));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) || !(opts.rel_tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Domain(format!("invalid oracle options {opts:?}")));
    }
    let mut u = seed_field(*ball, n_grid, seed)?;
    if !(u.max_abs() > 0.0) {
        return Err(Error::Degenerate("oracle seed vanishes on the grid"));
    }
    let mut w = poisson_solve(&product(&u, &u))?;
    let (t, _, _) = nehari_factor(&u, &w)?;
    u = u.map(|v| t * v);
    w = w.map(|v| t * t * v);

    let theta = opts.damping;
    let mut ut: Option<GridFunction3D> = None;
    let mut wt: Option<GridFunction3D> = None;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iteration = 0;
    while iteration < opts.max_iter {
        iteration += 1;
        let rhs = product(&w, &u).map(|v| 4.0 * PI * v);
        let next = screened_solve_from(&rhs, ut.as_ref())?;
        let wn = poisson_solve_from(&product(&next, &next), wt.as_ref())?;
        let (t, _, _) = nehari_factor(&next, &wn)?;
        let projected = next.map(|v| t * v);
        let damped = u.from_raw(
            u.values
                .par_iter()
                .zip(projected.values.par_iter())
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect(),
        );
        let diff = damped.from_raw(damped.values.iter().zip(&u.values).map(|(a, b)| a - b).collect());
        let change = (diff.h1_norm_sq() / damped.h1_norm_sq()).sqrt();
        history.push(change);
        w = poisson_solve_from(&product(&damped, &damped), Some(&wn.map(|v| t * t * v)))?;
        u = damped;
        ut = Some(next);
        wt = Some(wn);
        if change < opts.rel_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        let tail = history.len().saturating_sub(50);
        return Err(Error::Iterative {
            what: "grid ground-state iteration",
            iterations: iteration,
            history: history.split_off(tail),
        });
    }
    // final Nehari projection
    let (t, _, _) = nehari_factor(&u, &w)?;
    u = u.map(|v| t * v);
    w = w.map(|v| t * t * v);
    let (_, h1, dd) = nehari_factor(&u, &w)?;
    let residual = coupled_residual(&u, &w);
    Ok(OracleRun {
        field: CoupledField {
            u,
            w,
            iteration,
            residual,
        },
        energy: h1 * h1 / (4.0 * dd),
        h1_norm_sq: h1,
        dd,
        history,
    })
}

/// Relative residuals of `(−Δ+1)u = 4πwu` and `−Δw = u²`, the larger one.
pub fn coupled_residual(u: &GridFunction3D, w: &GridFunction3D) -> f64 {
    let n = u.n;
    let lu = apply_operator(u, 1.0);
    let src = product(w, u).map(|v| 4.0 * PI * v);
    let r1: Vec<f64> = lu.values.iter().zip(&src.values).map(|(a, b)| a - b).collect();
    let e1 = (dot(n, &r1, &r1) / dot(n, &src.values, &src.values)).sqrt();
    let lw = apply_operator(w, 0.0);
    let sq = product(u, u);
    let r2: Vec<f64> = lw.values.iter().zip(&sq.values).map(|(a, b)| a - b).collect();
    let e2 = (dot(n, &r2, &r2) / dot(n, &sq.values, &sq.values)).sqrt();
    e1.max(e2)
}

/// Shell means over shells `k h ≤ |x| < (k+1) h`, placed at the mean node
/// radius of each shell.
pub fn shell_profile(u: &GridFunction3D) -> Result<RadialProfile> {
    let shells = (u.ball.radius() / u.h).ceil() as usize + 1;
    let mut sum_r = vec![0.0; shells];
    let mut sum_v = vec![0.0; shells];
    let mut count = vec![0usize; shells];
    for idx in 0..u.values.len() {
        if !u.mask[idx] {
            continue;
        }
        let r = u.radius_at(idx);
        let k = ((r / u.h).floor() as usize).min(shells - 1);
        sum_r[k] += r;
        sum_v[k] += u.values[idx];
        count[k] += 1;
    }
    let mut nodes = Vec::new();
    let mut vals = Vec::new();
    for k in 0..shells {
        if count[k] > 0 {
            nodes.push(sum_r[k] / count[k] as f64);
            vals.push(sum_v[k] / count[k] as f64);
        }
    }
    RadialProfile::new(RadialGrid::new(nodes)?, vals, u.ball)
}

/// `‖u − S(u)‖₂ / ‖u‖₂`, with `S(u)` the shell means interpolated linearly
/// in the radius.
pub fn radial_deviation(u: &GridFunction3D) -> Result<f64> {
    let norm = u.l2_norm_sq();
    if !(norm > 0.0) {
        return Err(Error::Degenerate("radial deviation of the zero field"));
    }
    let s = shell_profile(u)?;
    let last = s.end();
    let dev = slab_sum(u.n, &u.values, |idx, v| {
        if !u.mask[idx] {
            return 0.0;
        }
        let r = u.radius_at(idx).min(last);
        let d = v - s.eval(r);
        d * d
    });
    Ok((u.h.powi(3) * dev / norm).sqrt())
}
