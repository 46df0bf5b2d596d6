//! Validated run configuration and the text forms of radii.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::DEFAULT_SEED;
use crate::error::{Error, Result};
use crate::kernel::{BallSpec, Dimension};
use crate::shooting::Tolerances;
use crate::sweep::validate_radii;

/// A finite ball radius or the whole space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Radius {
    Finite(f64),
    Infinite,
}

impl Radius {
    pub fn ball(self, dim: Dimension) -> Result<BallSpec> {
        match self {
            Radius::Finite(r) => BallSpec::new(dim, r),
            Radius::Infinite => Ok(BallSpec::whole_space(dim)),
        }
    }
}

impl FromStr for Radius {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") {
            return Ok(Radius::Infinite);
        }
        let r: f64 = t.parse().map_err(|_| Error::Parse(format!("radius must be a number or \"inf\", got {s:?}")))?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Radius(r));
        }
        Ok(Radius::Finite(r))
    }
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radius::Finite(r) => write!(f, "{r}"),
            Radius::Infinite => f.write_str("inf"),
        }
    }
}

/// Comma-separated radii, sorted, with duplicates rejected.
pub fn parse_radii(s: &str) -> Result<Vec<f64>> {
    let radii = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<Radius>()? {
            Radius::Finite(r) => Ok(r),
            Radius::Infinite => Err(Error::Parse("sweep radii must be finite".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    validate_radii(&radii)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dim: u32,
    pub radius: Radius,
    pub tolerances: Tolerances,
    pub grid: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 3,
            radius: Radius::Finite(5.0),
            tolerances: Tolerances::default(),
            grid: crate::corpus::CORPUS_GRID,
            out: None,
            seed: DEFAULT_SEED,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        Dimension::new(self.dim)?;
        if let Radius::Finite(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Radius(r));
            }
        }
        self.tolerances.validate()?;
        if self.grid % 2 == 0 || !(33..=1025).contains(&self.grid) {
            return Err(Error::Domain(format!("grid must be odd and in 33..=1025, got {}", self.grid)));
        }
        Ok(())
    }

    pub fn ball(&self) -> Result<BallSpec> {
        self.validate()?;
        self.radius.ball(Dimension::new(self.dim)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_forms() {
        assert_eq!("inf".parse::<Radius>().unwrap(), Radius::Infinite);
        assert_eq!(" 2.5 ".parse::<Radius>().unwrap(), Radius::Finite(2.5));
        assert!("0".parse::<Radius>().is_err());
        assert!("-1".parse::<Radius>().is_err());
        assert!("NaN".parse::<Radius>().is_err());
        assert!("abc".parse::<Radius>().is_err());
        assert_eq!(Radius::Finite(2.0).to_string(), "2");
    }

    #[test]
    fn radii_lists() {
        assert_eq!(parse_radii("2,4,8,16,32").unwrap(), vec![2.0, 4.0, 8.0, 16.0, 32.0]);
        assert!(parse_radii("").is_err());
        assert!(parse_radii("2,2").is_err());
        assert!(parse_radii("2,inf").is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::default();
        c.validate().unwrap();
        c.grid = 40;
        assert!(c.validate().is_err());
        c.grid = 41;
        c.dim = 2;
        assert!(matches!(c.validate(), Err(Error::Dimension(2))));
    }
}
