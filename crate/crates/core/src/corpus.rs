//! Seeded test functions shared by the verification suites and the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid3d::GridFunction3D;
use crate::kernel::{BallSpec, Dimension};
use crate::profile::{RadialGrid, RadialProfile};
use crate::rearrange::RearrangementInput;

pub const DEFAULT_SEED: u64 = 42;

/// Intervals of the uniform grid carrying each random profile.
pub const PROFILE_INTERVALS: usize = 400;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// `(1 − (r/R)²)·(c₀ + Σ cₖ cos(kπr/R))` with `c₀ > Σ|cₖ|`, so the profile is
/// positive on `[0, R)` and vanishes at `R`.
#[derive(Debug, Clone)]
pub struct CosineProfile {
    pub radius: f64,
    pub coeffs: Vec<f64>,
}

impl CosineProfile {
    pub fn random(rng: &mut impl Rng) -> Self {
        let radius = rng.gen_range(1.0..6.0);
        let mut coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        coeffs[0] = 0.1 + coeffs[1..].iter().map(|c| c.abs()).sum::<f64>() + rng.gen_range(0.0..1.0);
        Self { radius, coeffs }
    }

    pub fn value(&self, r: f64) -> f64 {
        let w = std::f64::consts::PI / self.radius;
        let s: f64 = self.coeffs.iter().enumerate().map(|(k, c)| c * (k as f64 * w * r).cos()).sum();
        (1.0 - (r / self.radius).powi(2)) * s
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let w = std::f64::consts::PI / self.radius;
        let s: f64 = self.coeffs.iter().enumerate().map(|(k, c)| c * (k as f64 * w * r).cos()).sum();
        let ds: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| -c * k as f64 * w * (k as f64 * w * r).sin())
            .sum();
        -2.0 * r / (self.radius * self.radius) * s + (1.0 - (r / self.radius).powi(2)) * ds
    }

    pub fn profile(&self, dim: Dimension, intervals: usize) -> Result<RadialProfile> {
        let ball = BallSpec::new(dim, self.radius)?;
        let df = |r: f64| self.derivative(r);
        RadialProfile::from_fn(RadialGrid::uniform(self.radius, intervals)?, ball, |r| self.value(r), Some(&df))
    }
}

/// `count` random smooth positive profiles in dimension `dim`.
pub fn radial_profiles(dim: Dimension, count: usize, seed: u64) -> Result<Vec<RadialProfile>> {
    let mut r = rng(seed, dim.n() as u64);
    (0..count)
        .map(|_| CosineProfile::random(&mut r).profile(dim, PROFILE_INTERVALS))
        .collect()
}

/// Gaussian bump `a·exp(−|x − c|²/w²)`.
#[derive(Debug, Clone, Copy)]
pub struct Bump {
    pub center: [f64; 3],
    pub width: f64,
    pub height: f64,
}

impl Bump {
    pub fn at(&self, p: [f64; 3]) -> f64 {
        let d2: f64 = (0..3).map(|i| (p[i] - self.center[i]).powi(2)).sum();
        self.height * (-d2 / (self.width * self.width)).exp()
    }
}

fn random_bump(r: &mut impl Rng, radius: f64) -> Bump {
    let reach = 0.5 * radius;
    Bump {
        center: [r.gen_range(-reach..reach), r.gen_range(-reach..reach), r.gen_range(-reach..reach)],
        width: r.gen_range(0.1..0.3) * radius,
        height: r.gen_range(0.5..2.0),
    }
}

/// Ball of the Talenti and oracle corpora.
pub fn corpus_ball() -> BallSpec {
    BallSpec::new(Dimension::new(3).expect("3 is a valid dimension"), 5.0).expect("5 is a valid radius")
}

pub const CORPUS_GRID: usize = 41;

/// `count` nonnegative sources, each a sum of one to three random bumps.
pub fn talenti_sources(count: usize, seed: u64) -> Result<Vec<GridFunction3D>> {
    let ball = corpus_ball();
    let mut r = rng(seed, 100);
    (0..count)
        .map(|_| {
            let k = r.gen_range(1..4);
            let bumps: Vec<Bump> = (0..k).map(|_| random_bump(&mut r, ball.radius())).collect();
            GridFunction3D::from_fn(ball, CORPUS_GRID, |p| bumps.iter().map(|b| b.at(p)).sum())
        })
        .collect()
}

/// Test functions for the rearrangement inequalities, cycling through four
/// families: radial profiles that are not monotone, radial decreasing
/// profiles, off-center bumps and symmetric pairs of bumps on the grid.
/// Grid functions are multiplied by `1 − |x|²/R²` so they vanish on the sphere.
pub fn rearrangement_inputs(count: usize, seed: u64) -> Result<Vec<RearrangementInput>> {
    let ball = corpus_ball();
    let radius = ball.radius();
    let mut r = rng(seed, 200);
    let taper = move |p: [f64; 3]| (1.0 - (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (radius * radius)).max(0.0);
    (0..count)
        .map(|i| match i % 4 {
            0 => {
                let centre = r.gen_range(0.3..0.7) * radius;
                let width = r.gen_range(0.1..0.25) * radius;
                let f = move |s: f64| (1.0 - (s / radius).powi(2)) * (-((s - centre) / width).powi(2)).exp();
                let p = RadialProfile::from_fn(RadialGrid::uniform(radius, 800)?, ball, f, None)?;
                Ok(RearrangementInput::Radial(p))
            }
            1 => {
                let width = r.gen_range(0.2..0.5) * radius;
                let f = move |s: f64| (1.0 - (s / radius).powi(2)) * (-(s / width).powi(2)).exp();
                let p = RadialProfile::from_fn(RadialGrid::uniform(radius, 800)?, ball, f, None)?;
                Ok(RearrangementInput::Radial(p))
            }
            2 => {
                let b = random_bump(&mut r, radius);
                Ok(RearrangementInput::Grid(GridFunction3D::from_fn(ball, CORPUS_GRID, |p| b.at(p) * taper(p))?))
            }
            _ => {
                let b = random_bump(&mut r, radius);
                let mirror = Bump {
                    center: b.center.map(|c| -c),
                    ..b
                };
                Ok(RearrangementInput::Grid(GridFunction3D::from_fn(ball, CORPUS_GRID, |p| {
                    (b.at(p) + mirror.at(p)) * taper(p)
                })?))
            }
        })
        .collect()
}
