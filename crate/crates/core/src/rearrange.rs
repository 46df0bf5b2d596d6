//! Symmetric decreasing rearrangement of radial profiles and grid fields,
//! Talenti's comparison, and the rearrangement energy inequalities.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::energy::{dd_newton, dirichlet_norm_sq, l2_norm_sq};
use crate::error::{Error, Result};
use crate::grid3d::{dd_grid, poisson_solve, GridFunction3D};
use crate::kernel::BallSpec;
use crate::profile::{RadialGrid, RadialProfile};

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub margin: f64,
    pub tolerance: f64,
    pub details: BTreeMap<String, f64>,
}

impl CheckReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        if r.check.is_empty() {
            return Err(Error::Parse("check name must not be empty".into()));
        }
        Ok(r)
    }
}

fn check_nonnegative(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| *v < 0.0) {
        Some(i) => Err(Error::Domain(format!(
            "rearrangement needs a nonnegative function, value {} at index {i}",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// Indices sorted by decreasing value; ties keep index order.
fn decreasing_order(values: &[f64], keep: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| keep(i)).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Radially decreasing profile equimeasurable with `φ ≥ 0`.
///
/// Each node owns the shell between the midpoints to its neighbours. Values
/// are sorted, their shell volumes accumulated from the origin, and the
/// sorted values placed at the radius enclosing half of their own shell
/// before interpolating linearly back onto the input nodes.
pub fn rearrange_radial(phi: &RadialProfile) -> Result<RadialProfile> {
    let v = phi.values();
    check_nonnegative(v)?;
    if v.windows(2).all(|w| w[1] <= w[0]) {
        return Ok(phi.clone());
    }
    let x = phi.nodes();
    let n = phi.ball().dim().as_f64();
    let m = x.len();
    let mut edges = Vec::with_capacity(m + 1);
    edges.push(x[0]);
    edges.extend(x.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    edges.push(x[m - 1]);
    let vol: Vec<f64> = edges.windows(2).map(|e| e[1].powf(n) - e[0].powf(n)).collect();

    let order = decreasing_order(v, |_| true);
    let mut cum = x[0].powf(n);
    let mut rho = Vec::with_capacity(m);
    let mut sorted = Vec::with_capacity(m);
    for &i in &order {
        rho.push((cum + 0.5 * vol[i]).powf(1.0 / n));
        sorted.push(v[i]);
        cum += vol[i];
    }
    let values = x
        .iter()
        .map(|&r| {
            let k = rho.partition_point(|&p| p <= r);
            if k == 0 {
                sorted[0]
            } else if k == m {
                sorted[m - 1]
            } else {
                let t = (r - rho[k - 1]) / (rho[k] - rho[k - 1]);
                sorted[k - 1] + t * (sorted[k] - sorted[k - 1])
            }
        })
        .collect();
    RadialProfile::new(phi.grid().clone(), values, *phi.ball())
}

/// Equal-volume radius of the `k`-th sorted cell (1-based) at fraction `s` of
/// its own volume.
fn cell_radius(k: usize, s: f64, h: f64) -> f64 {
    (3.0 * (k as f64 - 1.0 + s) * h.powi(3) / (4.0 * PI)).cbrt()
}

/// Decreasing radial profile of a nonnegative grid field: sorted cell values
/// at the equal-volume radii `(3(k − ½)h³/4π)^{1/3}`, plus the origin.
pub fn rearrange_grid3d(u: &GridFunction3D) -> Result<RadialProfile> {
    check_nonnegative(u.values())?;
    let order = decreasing_order(u.values(), |i| u.in_ball(i));
    if order.is_empty() {
        return Err(Error::Grid("the ball mask contains no nodes".into()));
    }
    let h = u.h();
    let mut nodes = Vec::with_capacity(order.len() + 1);
    let mut values = Vec::with_capacity(order.len() + 1);
    nodes.push(0.0);
    values.push(u.values()[order[0]]);
    for (k, &i) in order.iter().enumerate() {
        nodes.push(cell_radius(k + 1, 0.5, h));
        values.push(u.values()[i]);
    }
    RadialProfile::new(RadialGrid::new(nodes)?, values, *u.ball())
}

/// Discrete symmetrization on the grid: the sorted values go to the masked
/// nodes in order of increasing `|x|` (ties by index).
pub fn symmetrize(u: &GridFunction3D) -> Result<GridFunction3D> {
    check_nonnegative(u.values())?;
    let order = decreasing_order(u.values(), |i| u.in_ball(i));
    let mut by_radius: Vec<usize> = order.clone();
    let radius: Vec<f64> = (0..u.values().len()).map(|i| u.radius_at(i)).collect();
    by_radius.sort_by(|&a, &b| radius[a].total_cmp(&radius[b]).then(a.cmp(&b)));
    let mut vals = vec![0.0; u.values().len()];
    for (&src, &dst) in order.iter().zip(&by_radius) {
        vals[dst] = u.values()[src];
    }
    u.with_values(vals)
}

/// Radial solution of `−Δv = f*` on `B_R`, `v(R) = 0`, for the step function
/// taking the sorted grid values on consecutive equal-volume shells.
struct RadialPoisson {
    /// Shell outer radii `ρ_k`.
    rho: Vec<f64>,
    /// Sorted source values.
    f: Vec<f64>,
    /// Enclosed source `∫_{B_ρk} f*`.
    mass: Vec<f64>,
    /// `v(ρ_k)`.
    v_outer: Vec<f64>,
}

impl RadialPoisson {
    fn new(sorted: Vec<f64>, h: f64, radius: f64) -> Self {
        let k = sorted.len();
        let rho: Vec<f64> = (1..=k).map(|i| cell_radius(i, 1.0, h)).collect();
        let mut mass = Vec::with_capacity(k);
        let mut acc = 0.0;
        for f in &sorted {
            acc += f * h.powi(3);
            mass.push(acc);
        }
        let mut v_outer = vec![0.0; k];
        let mut v = acc / (4.0 * PI) * (1.0 / rho[k - 1] - 1.0 / radius);
        for i in (0..k).rev() {
            v_outer[i] = v;
            let a = if i == 0 { 0.0 } else { rho[i - 1] };
            if i > 0 {
                v += Self::shell_integral(&sorted, &mass, &rho, i, a);
            }
        }
        Self {
            rho,
            f: sorted,
            mass,
            v_outer,
        }
    }

    /// `∫_s^{ρ_i} M(t)/(4π t²) dt` inside shell `i`, which starts at `ρ_{i−1}`.
    fn shell_integral(f: &[f64], mass: &[f64], rho: &[f64], i: usize, s: f64) -> f64 {
        let (a, m_in) = if i == 0 { (0.0, 0.0) } else { (rho[i - 1], mass[i - 1]) };
        let b = rho[i];
        let c = m_in - f[i] * 4.0 * PI / 3.0 * a.powi(3);
        let first = if c == 0.0 { 0.0 } else { c / (4.0 * PI) * (1.0 / s - 1.0 / b) };
        first + f[i] * (b * b - s * s) / 6.0
    }

    fn eval(&self, r: f64) -> f64 {
        let i = self.rho.partition_point(|&p| p < r).min(self.rho.len() - 1);
        self.v_outer[i] + Self::shell_integral(&self.f, &self.mass, &self.rho, i, r)
    }
}

fn same_ball(a: &BallSpec, b: &BallSpec) -> Result<()> {
    if a.dim() != b.dim() || (a.radius() - b.radius()).abs() > 1e-12 * a.radius() {
        return Err(Error::Domain(format!(
            "ball mismatch: field lives on R = {}, check asked for R = {}",
            a.radius(),
            b.radius()
        )));
    }
    Ok(())
}

/// Talenti comparison `u* ≤ v` for `−Δu = f` on the grid and the radial
/// `−Δv = f*`, with tolerance `4h·max f·R`.
pub fn talenti_check(f: &GridFunction3D, ball: &BallSpec) -> Result<CheckReport> {
    same_ball(f.ball(), ball)?;
    check_nonnegative(f.values())?;
    let u = poisson_solve(f)?;
    let u_star = rearrange_grid3d(&u.map(|v| v.max(0.0)))?;
    let order = decreasing_order(f.values(), |i| f.in_ball(i));
    let sorted: Vec<f64> = order.iter().map(|&i| f.values()[i]).collect();
    let h = f.h();
    let radial = RadialPoisson::new(sorted, h, ball.radius());

    let tolerance = 4.0 * h * f.max_abs() * ball.radius();
    let mut margin = f64::INFINITY;
    let mut at = 0.0;
    for (r, us) in u_star.nodes().iter().zip(u_star.values()).skip(1) {
        let gap = radial.eval(*r) - us;
        if gap < margin {
            margin = gap;
            at = *r;
        }
    }
    let mut details = BTreeMap::new();
    details.insert("h".into(), h);
    details.insert("max_f".into(), f.max_abs());
    details.insert("max_u".into(), u.max_abs());
    details.insert("v_at_origin".into(), radial.eval(0.0));
    details.insert("radius_of_min_margin".into(), at);
    Ok(CheckReport {
        check: "talenti".into(),
        pass: margin >= -tolerance,
        margin,
        tolerance,
        details,
    })
}

#[derive(Debug, Clone)]
pub enum RearrangementInput {
    Radial(RadialProfile),
    Grid(GridFunction3D),
}

/// Averages a profile over shells `[k w, (k+1) w)`, placing each mean at the
/// mean node radius of its shell; the origin keeps its own value.
pub fn shell_average(p: &RadialProfile, width: f64) -> Result<RadialProfile> {
    let mut nodes = vec![0.0];
    let mut values = vec![p.values()[0]];
    let (mut sr, mut sv, mut count, mut shell) = (0.0, 0.0, 0usize, 0usize);
    for (&r, &v) in p.nodes().iter().zip(p.values()).skip(1) {
        let k = (r / width).floor() as usize;
        if k != shell && count > 0 {
            nodes.push(sr / count as f64);
            values.push(sv / count as f64);
            (sr, sv, count) = (0.0, 0.0, 0);
        }
        shell = k;
        sr += r;
        sv += v;
        count += 1;
    }
    if count > 0 {
        nodes.push(sr / count as f64);
        values.push(sv / count as f64);
    }
    RadialProfile::new(RadialGrid::new(nodes)?, values, *p.ball())
}

/// Samples `p(|x|)` on the mask of `like`.
pub fn radial_on_grid(p: &RadialProfile, like: &GridFunction3D) -> Result<GridFunction3D> {
    let end = p.end();
    let vals = (0..like.values().len())
        .map(|i| if like.in_ball(i) { p.eval(like.radius_at(i).min(end)) } else { 0.0 })
        .collect();
    like.with_values(vals)
}

/// `‖∇u*‖² ≤ ‖∇u‖²`, `‖u*‖₂ = ‖u‖₂` and `𝔻(u*) ≥ 𝔻(u)`, each up to the
/// relative tolerance `4h/R`.
///
/// A grid input is rearranged by [`rearrange_grid3d`], averaged over shells of
/// width `h` and sampled back onto the same grid, so both sides use the grid
/// norms and the grid interaction.
///
/// `margin` is the smallest relative slack of the three relations; the check
/// passes when it is at least `−tolerance`.
pub fn rearrangement_energy_check(input: &RearrangementInput, ball: &BallSpec) -> Result<CheckReport> {
    let (grad, grad_s, l2, l2_s, dd, dd_s, h) = match input {
        RearrangementInput::Radial(phi) => {
            same_ball(phi.ball(), ball)?;
            let plain = RadialProfile::new(phi.grid().clone(), phi.values().to_vec(), *ball)?;
            let star = rearrange_radial(&plain)?;
            let h = phi.nodes().windows(2).fold(0.0f64, |a, w| a.max(w[1] - w[0]));
            (
                dirichlet_norm_sq(&plain),
                dirichlet_norm_sq(&star),
                l2_norm_sq(&plain),
                l2_norm_sq(&star),
                dd_newton(&plain, ball),
                dd_newton(&star, ball),
                h,
            )
        }
        RearrangementInput::Grid(u) => {
            same_ball(u.ball(), ball)?;
            let star = radial_on_grid(&shell_average(&rearrange_grid3d(u)?, u.h())?, u)?;
            (
                u.dirichlet_norm_sq(),
                star.dirichlet_norm_sq(),
                u.l2_norm_sq(),
                star.l2_norm_sq(),
                dd_grid(u)?,
                dd_grid(&star)?,
                u.h(),
            )
        }
    };
    if !(l2 > 0.0) {
        return Err(Error::Degenerate("rearrangement check of the zero function"));
    }
    let tolerance = 4.0 * h / ball.radius();
    let m_grad = if grad > 0.0 { (grad - grad_s) / grad } else { 0.0 };
    let m_l2 = -((l2_s - l2) / l2).abs();
    let m_dd = (dd_s - dd) / dd;
    let margin = m_grad.min(m_l2).min(m_dd);
    let details = BTreeMap::from([
        ("grad_sq".to_string(), grad),
        ("grad_sq_star".to_string(), grad_s),
        ("l2_sq".to_string(), l2),
        ("l2_sq_star".to_string(), l2_s),
        ("dd".to_string(), dd),
        ("dd_star".to_string(), dd_s),
        ("h".to_string(), h),
    ]);
    Ok(CheckReport {
        check: "rearrangement_energy".into(),
        pass: margin >= -tolerance,
        margin,
        tolerance,
        details,
    })
}
