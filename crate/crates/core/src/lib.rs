//! Positive radial ground states of the Choquard (Schrödinger–Newton)
//! equation `−Δu + u = (|x|^{2−N} ∗ u²) u` on a ball with Dirichlet data and
//! on the whole space.

pub mod config;
pub mod corpus;
pub mod energy;
pub mod error;
pub mod grid3d;
pub mod kernel;
pub mod ode;
pub mod profile;
pub mod quadrature;
pub mod real;
pub mod rearrange;
pub mod shooting;
pub mod solver;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use kernel::{BallSpec, Dimension};
pub use profile::{RadialGrid, RadialProfile};
pub use shooting::{CanonicalSolution, ShootingState, Tolerances, TrajectoryOutcome};
pub use solver::{GroundState, AmplitudeScan};
