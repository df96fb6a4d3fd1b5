//! Numerics for critical semilinear elliptic equations
//! `−Δu + V(x)u = f(u) + b(x)g(u)` on ℝᴺ.
//!
//! Radial grids carry the energy functionals and the ground-state solvers;
//! Cartesian boxes carry the profile decomposition of bounded sequences.

pub mod constants;
pub mod energy;
pub mod error;
pub mod hypothesis;
pub mod linalg;
pub mod nonlinearity;
pub mod potential;
pub mod problem;
pub mod profiles;
pub mod radial;
pub mod serde_num;
pub mod solver;

pub use error::{Error, Result};
