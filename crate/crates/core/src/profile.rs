//! Radial grids and sampled radial functions.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::kernel::BallSpec;

/// Strictly increasing node set `r_0 < r_1 < … < r_M` with `r_0 ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Grid(format!("need at least 2 nodes, got {}", nodes.len())));
        }
        if let Some(bad) = nodes.iter().find(|r| !r.is_finite()) {
            return Err(Error::Grid(format!("non-finite node {bad}")));
        }
        if nodes[0] < 0.0 {
            return Err(Error::Grid(format!("first node {} is negative", nodes[0])));
        }
        if let Some(i) = nodes.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Grid(format!(
                "nodes not strictly increasing at index {}: {} then {}",
                i + 1,
                nodes[i],
                nodes[i + 1]
            )));
        }
        Ok(Self { nodes })
    }

    /// `intervals + 1` equally spaced nodes on `[0, end]`.
    pub fn uniform(end: f64, intervals: usize) -> Result<Self> {
        if !(end > 0.0 && end.is_finite()) || intervals == 0 {
            return Err(Error::Grid(format!("cannot build uniform grid on [0, {end}] with {intervals} intervals")));
        }
        let h = end / intervals as f64;
        let mut nodes: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
        nodes[intervals] = end;
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Index `i` with `nodes[i] ≤ r < nodes[i+1]`, clamped to valid intervals.
    pub fn locate(&self, r: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }
}

/// A radial function sampled on a [`RadialGrid`] starting at the origin.
///
/// Between nodes the profile is a cubic Hermite interpolant when nodal
/// derivatives are carried, piecewise linear otherwise. Beyond the last node
/// it is extended by zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: RadialGrid,
    values: Vec<f64>,
    derivs: Option<Vec<f64>>,
    ball: BallSpec,
}

impl RadialProfile {
    pub fn new(grid: RadialGrid, values: Vec<f64>, ball: BallSpec) -> Result<Self> {
        Self::build(grid, values, None, ball)
    }

    pub fn with_derivatives(grid: RadialGrid, values: Vec<f64>, derivs: Vec<f64>, ball: BallSpec) -> Result<Self> {
        Self::build(grid, values, Some(derivs), ball)
    }

    fn build(grid: RadialGrid, values: Vec<f64>, derivs: Option<Vec<f64>>, ball: BallSpec) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Profile(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if grid.first() != 0.0 {
            return Err(Error::Profile(format!("first node must be 0, got {}", grid.first())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Profile(format!("non-finite value {v}")));
        }
        if let Some(d) = &derivs {
            if d.len() != grid.len() {
                return Err(Error::Profile(format!("{} derivatives for {} nodes", d.len(), grid.len())));
            }
            if let Some(v) = d.iter().find(|v| !v.is_finite()) {
                return Err(Error::Profile(format!("non-finite derivative {v}")));
            }
        }
        if grid.last() > ball.radius() * (1.0 + 1e-12) {
            return Err(Error::Profile(format!(
                "last node {} lies outside the ball of radius {}",
                grid.last(),
                ball.radius()
            )));
        }
        Ok(Self { grid, values, derivs, ball })
    }

    /// Samples `f` (and optionally its derivative) on `grid`.
    pub fn from_fn(grid: RadialGrid, ball: BallSpec, f: impl Fn(f64) -> f64, df: Option<&dyn Fn(f64) -> f64>) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        match df {
            Some(df) => {
                let d = grid.nodes().iter().map(|&r| df(r)).collect();
                Self::with_derivatives(grid, values, d, ball)
            }
            None => Self::new(grid, values, ball),
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivatives(&self) -> Option<&[f64]> {
        self.derivs.as_deref()
    }

    pub fn ball(&self) -> &BallSpec {
        &self.ball
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> f64 {
        self.grid.last()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Same nodes, new values; derivatives are dropped.
    pub fn map_values(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&r, &v)| f(r, v))
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
            derivs: None,
            ball: self.ball,
        }
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| t * v).collect(),
            derivs: self.derivs.as_ref().map(|d| d.iter().map(|v| t * v).collect()),
            ball: self.ball,
        }
    }

    pub fn with_ball(mut self, ball: BallSpec) -> Result<Self> {
        if self.end() > ball.radius() * (1.0 + 1e-12) {
            return Err(Error::Profile(format!("profile extends to {} beyond radius {}", self.end(), ball.radius())));
        }
        self.ball = ball;
        Ok(self)
    }

    /// Nodal derivative: carried values when present, else fourth-order
    /// finite differences of the samples.
    pub fn nodal_derivatives(&self) -> Vec<f64> {
        match &self.derivs {
            Some(d) => d.clone(),
            None => crate::quadrature::differentiate(self.nodes(), &self.values, 1, 5),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.eval_with_derivative(r).0
    }

    pub fn eval_derivative(&self, r: f64) -> f64 {
        self.eval_with_derivative(r).1
    }

    /// Value and derivative of the interpolant at `r` (zero beyond the last node).
    pub fn eval_with_derivative(&self, r: f64) -> (f64, f64) {
        let x = self.nodes();
        if r > self.end() || r < 0.0 {
            return (0.0, 0.0);
        }
        let i = self.grid.locate(r);
        let (x0, x1) = (x[i], x[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let h = x1 - x0;
        let t = (r - x0) / h;
        match &self.derivs {
            Some(d) => {
                let (d0, d1) = (d[i] * h, d[i + 1] * h);
                let t2 = t * t;
                let t3 = t2 * t;
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + t;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                let v = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
                let dh00 = 6.0 * t2 - 6.0 * t;
                let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
                let dh01 = -6.0 * t2 + 6.0 * t;
                let dh11 = 3.0 * t2 - 2.0 * t;
                let dv = (dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1) / h;
                (v, dv)
            }
            None => (y0 + t * (y1 - y0), (y1 - y0) / h),
        }
    }

    /// Resamples onto another grid; derivatives are carried when available.
    pub fn resample(&self, grid: RadialGrid) -> Result<Self> {
        let vd: Vec<(f64, f64)> = grid.nodes().iter().map(|&r| self.eval_with_derivative(r)).collect();
        let values = vd.iter().map(|p| p.0).collect();
        if self.derivs.is_some() {
            Self::with_derivatives(grid, values, vd.iter().map(|p| p.1).collect(), self.ball)
        } else {
            Self::new(grid, values, self.ball)
        }
    }

    /// Writes the `r,value` CSV form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["r", "value"])?;
        for (r, v) in self.nodes().iter().zip(&self.values) {
            w.write_record([format_f64(*r), format_f64(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Parses the `r,value` CSV form.
    pub fn read_csv<R: Read>(input: R, ball: BallSpec) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "r" || &headers[1] != "value" {
            return Err(Error::Parse(format!("expected header `r,value`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Parse(format!("row {}: expected 2 fields", line + 1)));
            }
            nodes.push(parse_f64(&rec[0], line + 1)?);
            values.push(parse_f64(&rec[1], line + 1)?);
        }
        Self::new(RadialGrid::new(nodes)?, values, ball)
    }

    pub fn from_csv_str(s: &str, ball: BallSpec) -> Result<Self> {
        Self::read_csv(s.as_bytes(), ball)
    }
}

/// Shortest round-trip representation with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, row: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("row {row}: `{s}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Dimension;

    fn ball(r: f64) -> BallSpec {
        BallSpec::new(Dimension::new(3).unwrap(), r).unwrap()
    }

    #[test]
    fn grid_rejects_bad_nodes() {
        assert!(RadialGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(RadialGrid::new(vec![-0.1, 1.0]).is_err());
        assert!(RadialGrid::new(vec![0.0, f64::NAN]).is_err());
        assert!(RadialGrid::new(vec![0.0]).is_err());
        assert!(RadialGrid::new(vec![0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn profile_must_start_at_origin_and_fit_ball() {
        let g = RadialGrid::new(vec![0.1, 1.0]).unwrap();
        assert!(RadialProfile::new(g, vec![1.0, 0.0], ball(1.0)).is_err());
        let g = RadialGrid::new(vec![0.0, 2.0]).unwrap();
        assert!(RadialProfile::new(g, vec![1.0, 0.0], ball(1.0)).is_err());
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let g = RadialGrid::uniform(2.0, 7).unwrap();
        let f = |r: f64| 1.0 + r - 0.5 * r * r + 0.1 * r.powi(3);
        let df = |r: f64| 1.0 - r + 0.3 * r * r;
        let p = RadialProfile::from_fn(g, ball(2.0), f, Some(&df)).unwrap();
        for k in 0..50 {
            let r = 2.0 * k as f64 / 49.0;
            let (v, d) = p.eval_with_derivative(r);
            assert!((v - f(r)).abs() < 1e-13);
            assert!((d - df(r)).abs() < 1e-12);
        }
        assert_eq!(p.eval(2.5), 0.0);
    }

    #[test]
    fn linear_interpolation_without_derivatives() {
        let g = RadialGrid::new(vec![0.0, 1.0, 3.0]).unwrap();
        let p = RadialProfile::new(g, vec![2.0, 1.0, 0.0], ball(3.0)).unwrap();
        assert!((p.eval(0.5) - 1.5).abs() < 1e-15);
        assert!((p.eval(2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = RadialGrid::uniform(1.0, 10).unwrap();
        let p = RadialProfile::from_fn(g, ball(1.0), |r| (1.0 - r * r) / 3.0, None).unwrap();
        let s = p.to_csv_string();
        assert!(s.starts_with("r,value\n"));
        assert!(!s.contains('\r'));
        let back = RadialProfile::from_csv_str(&s, ball(1.0)).unwrap();
        assert_eq!(back.values(), p.values());
        assert_eq!(back.nodes(), p.nodes());
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(RadialProfile::from_csv_str("x,y\n0,1\n1,0\n", ball(1.0)).is_err());
        assert!(RadialProfile::from_csv_str("r,value\n0,abc\n1,0\n", ball(1.0)).is_err());
        assert!(RadialProfile::from_csv_str("r,value\n0,1\n", ball(1.0)).is_err());
    }
}
