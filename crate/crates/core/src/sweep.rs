//! Convergence of ball ground states to the whole-space ground state.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{h1_norm_sq, nehari_scale};
use crate::error::{Error, Result};
use crate::kernel::{sphere_area, BallSpec, Dimension};
use crate::profile::{format_f64, RadialGrid, RadialProfile};
use crate::quadrature::trapezoid;
use crate::shooting::Tolerances;
use crate::solver::{solve_ball, solve_whole_space, GroundState};

/// Corner width of the cutoff ramp as a fraction of `R`.
pub const CUTOFF_CORNER: f64 = 1.0 / 250.0;

/// Uniform intervals of the cutoff and of `Ψ_R = η_R φ_∞`.
pub const CUTOFF_INTERVALS: usize = 4000;

pub const CSV_HEADER: [&str; 7] = ["R", "c_R", "lambda_R", "amplitude", "profile_distance", "upper_bound", "gap"];

/// The C¹ ramp `η_R`: 1 on `[0, R/2]`, 0 at `R`, slope `−2/(R − 2δ)` between
/// corners of width `δ` where the slope changes linearly.
#[derive(Debug, Clone, Copy)]
pub struct Cutoff {
    radius: f64,
    delta: f64,
    slope: f64,
}

impl Cutoff {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Radius(radius));
        }
        let delta = CUTOFF_CORNER * radius;
        Ok(Self {
            radius,
            delta,
            slope: 2.0 / (radius - 2.0 * delta),
        })
    }

    /// Largest `|η′|`.
    pub fn max_slope(&self) -> f64 {
        self.slope
    }

    pub fn value(&self, r: f64) -> f64 {
        let (a, b, d, k) = (0.5 * self.radius, self.radius, self.delta, self.slope);
        if r <= a {
            1.0
        } else if r <= a + d {
            let t = r - a;
            1.0 - k * t * t / (2.0 * d)
        } else if r <= b - d {
            1.0 - k * (d / 2.0 + (r - a - d))
        } else if r <= b {
            let t = b - r;
            k * t * t / (2.0 * d)
        } else {
            0.0
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let (a, b, d, k) = (0.5 * self.radius, self.radius, self.delta, self.slope);
        if r <= a || r >= b {
            0.0
        } else if r <= a + d {
            -k * (r - a) / d
        } else if r <= b - d {
            -k
        } else {
            -k * (b - r) / d
        }
    }
}

/// `η_R` sampled on a uniform grid of `[0, R]`.
pub fn cutoff_profile(ball: &BallSpec) -> Result<RadialProfile> {
    let c = Cutoff::new(ball.radius())?;
    let df = |r: f64| c.derivative(r);
    RadialProfile::from_fn(RadialGrid::uniform(ball.radius(), CUTOFF_INTERVALS)?, *ball, |r| c.value(r), Some(&df))
}

/// Nehari scaling `s_R` of `Ψ_R = η_R φ_∞` on `B_R` and the bound `sup_t I_R(tΨ_R) ≥ c_R`.
pub fn upper_bound_energy(phi_inf: &GroundState, ball: &BallSpec) -> Result<(f64, f64)> {
    if !phi_inf.ball.is_whole_space() {
        return Err(Error::Domain("upper bound needs the whole-space ground state".into()));
    }
    if phi_inf.dim() != ball.dim() {
        return Err(Error::Domain("dimension mismatch between φ_∞ and the ball".into()));
    }
    let c = Cutoff::new(ball.radius())?;
    let p = &phi_inf.profile;
    let grid = RadialGrid::uniform(ball.radius(), CUTOFF_INTERVALS)?;
    let (values, derivs): (Vec<f64>, Vec<f64>) = grid
        .nodes()
        .iter()
        .map(|&r| {
            let (v, dv) = p.eval_with_derivative(r);
            (c.value(r) * v, c.derivative(r) * v + c.value(r) * dv)
        })
        .unzip();
    let psi = RadialProfile::with_derivatives(grid, values, derivs, *ball)?;
    let report = nehari_scale(&psi, ball)?;
    Ok((report.t_u, report.energy_at_projection))
}

/// `‖φ_R − φ_∞‖_{H¹}` with `φ_R` extended by zero outside `B_R`.
pub fn profile_distance(phi_r: &GroundState, phi_inf: &GroundState) -> Result<f64> {
    if phi_r.dim() != phi_inf.dim() {
        return Err(Error::Domain("dimension mismatch".into()));
    }
    let dim = phi_r.dim();
    let e = dim.n() as i32 - 1;
    let (a, b) = (&phi_r.profile, &phi_inf.profile);
    let radius = a.end();
    let mut nodes: Vec<f64> = a.nodes().iter().chain(b.nodes()).copied().collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let split = nodes.partition_point(|&r| r <= radius);
    let integrand = |r: f64, inside: bool| {
        let (va, da) = if inside { a.eval_with_derivative(r) } else { (0.0, 0.0) };
        let (vb, db) = b.eval_with_derivative(r);
        ((da - db).powi(2) + (va - vb).powi(2)) * r.powi(e)
    };
    let inner = &nodes[..split];
    let f: Vec<f64> = inner.iter().map(|&r| integrand(r, true)).collect();
    let mut total = trapezoid(inner, &f);
    let mut outer = vec![radius];
    outer.extend(nodes[split..].iter().filter(|&&r| r > radius));
    if outer.len() > 1 {
        let f: Vec<f64> = outer.iter().map(|&r| integrand(r, false)).collect();
        total += trapezoid(&outer, &f);
    }
    Ok((sphere_area(dim) * total).sqrt())
}

/// Values of one successful sweep row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c_r: f64,
    pub lambda_r: f64,
    pub amplitude: f64,
    pub profile_distance: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub s_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(flatten)]
    pub row: Option<SweepRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Whole-space reference values and one record per radius, sorted by `R`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sweep {
    pub dim: u32,
    pub c_inf: f64,
    pub lambda_inf: f64,
    pub h1_norm_inf: f64,
    pub records: Vec<SweepRecord>,
}

/// `[2, 4, 8, 16, 32]` in three dimensions, top radius halved above.
pub fn default_radii(dim: Dimension) -> Vec<f64> {
    if dim.n() == 3 {
        vec![2.0, 4.0, 8.0, 16.0, 32.0]
    } else {
        vec![2.0, 4.0, 8.0, 16.0]
    }
}

/// Sorts the radii and rejects empty lists, duplicates and nonpositive values.
pub fn validate_radii(radii: &[f64]) -> Result<Vec<f64>> {
    if radii.is_empty() {
        return Err(Error::Domain("radii list is empty".into()));
    }
    if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::Radius(*r));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Domain(format!("duplicate radius {}", w[0])));
    }
    Ok(sorted)
}

fn row(radius: f64, dim: Dimension, phi_inf: &GroundState, tol: &Tolerances) -> Result<SweepRow> {
    let ball = BallSpec::new(dim, radius)?;
    let gs = solve_ball(&ball, tol)?;
    let (s_r, upper_bound) = upper_bound_energy(phi_inf, &ball)?;
    Ok(SweepRow {
        c_r: gs.energy,
        lambda_r: gs.lambda,
        amplitude: gs.amplitude,
        profile_distance: profile_distance(&gs, phi_inf)?,
        upper_bound,
        gap: gs.energy - phi_inf.energy,
        s_r,
    })
}

/// Solves the whole-space problem, then every ball in parallel. Row failures
/// are recorded in the row; a whole-space failure aborts the sweep.
pub fn run_sweep(dim: Dimension, radii: &[f64], tol: &Tolerances) -> Result<Sweep> {
    let radii = validate_radii(radii)?;
    let phi_inf = solve_whole_space(dim, tol)?;
    let records = radii
        .par_iter()
        .map(|&radius| match row(radius, dim, &phi_inf, tol) {
            Ok(r) => SweepRecord {
                radius,
                row: Some(r),
                error: None,
            },
            Err(e) => SweepRecord {
                radius,
                row: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(Sweep {
        dim: dim.n(),
        c_inf: phi_inf.energy,
        lambda_inf: phi_inf.lambda,
        h1_norm_inf: h1_norm_sq(&phi_inf.profile).sqrt(),
        records,
    })
}

impl Sweep {
    pub fn succeeded(&self) -> usize {
        self.records.iter().filter(|r| r.row.is_some()).count()
    }

    /// CSV with one line per radius; failed rows carry `ERROR` in every value column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(CSV_HEADER)?;
        for rec in &self.records {
            let mut line = vec![format_f64(rec.radius)];
            match &rec.row {
                Some(r) => line.extend(
                    [r.c_r, r.lambda_r, r.amplitude, r.profile_distance, r.upper_bound, r.gap].map(format_f64),
                ),
                None => line.extend(std::iter::repeat("ERROR".to_string()).take(CSV_HEADER.len() - 1)),
            }
            w.write_record(&line)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_shape() {
        for radius in [0.5, 2.0, 32.0] {
            let c = Cutoff::new(radius).unwrap();
            assert_eq!(c.value(radius / 4.0), 1.0);
            assert!(c.value(radius).abs() < 1e-15);
            assert!(c.max_slope() <= 2.02 / radius);
            let n = 20000;
            let mut prev = 1.0;
            let mut steepest: f64 = 0.0;
            for k in 0..=n {
                let r = radius * k as f64 / n as f64;
                let v = c.value(r);
                assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
                prev = v;
                steepest = steepest.max(c.derivative(r).abs());
                if k > 0 && k < n {
                    let h = radius * 1e-7;
                    let fd = (c.value(r + h) - c.value(r - h)) / (2.0 * h);
                    assert!((fd - c.derivative(r)).abs() < 1e-4 / radius);
                }
            }
            assert!(steepest <= 2.02 / radius);
        }
    }

    #[test]
    fn radii_validation() {
        assert!(validate_radii(&[]).is_err());
        assert!(validate_radii(&[2.0, 2.0]).is_err());
        assert!(validate_radii(&[2.0, -1.0]).is_err());
        assert_eq!(validate_radii(&[8.0, 2.0]).unwrap(), vec![2.0, 8.0]);
    }

    #[test]
    fn error_rows_are_marked() {
        let s = Sweep {
            dim: 3,
            c_inf: 1.0,
            lambda_inf: 1.0,
            h1_norm_inf: 2.0,
            records: vec![SweepRecord {
                radius: 2.0,
                row: None,
                error: Some("x".into()),
            }],
        };
        let csv = s.to_csv_string();
        assert_eq!(csv, "R,c_R,lambda_R,amplitude,profile_distance,upper_bound,gap\n2.0000000000000000e0,ERROR,ERROR,ERROR,ERROR,ERROR,ERROR\n");
    }

    #[test]
    fn distance_to_itself_vanishes() {
        let dim = Dimension::new(3).unwrap();
        let tol = Tolerances {
            profile_intervals: 512,
            ..Default::default()
        };
        let inf = solve_whole_space(dim, &tol).unwrap();
        assert!(profile_distance(&inf, &inf).unwrap() < 1e-12);
        let (s, bound) = upper_bound_energy(&inf, &BallSpec::new(dim, 4.0).unwrap()).unwrap();
        assert!(s > 1.0 && bound > inf.energy);
    }
}
