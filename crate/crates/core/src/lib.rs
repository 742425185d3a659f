//! Finite-difference solvers for the reactor model
//!
//! ```text
//! ∂t u1 − Δu1 = u1 u2 − b u1,   ∂ν u1 + α u1 = 0
//! ∂t u2 − Δu2 = a u1,           ∂ν u2 + β |u2|^(γ−2) u2 = 0
//! ```
//!
//! on intervals and rectangles: the first Robin eigenpair, the elliptic
//! solves behind the stationary fixed-point map, positive steady states,
//! time integration with blow-up/decay classification, weighted-mass
//! diagnostics and the threshold experiments built on top of them.

pub mod elliptic;
pub mod error;
pub mod evolve;
pub mod experiments;
pub mod functionals;
pub mod grid;
pub mod linalg;
pub mod params;
pub mod spectral;
pub mod steady;

pub use error::{Error, Result};
pub use grid::{Axis, Field, Grid, StatePair};
pub use params::{Params, SolverOptions};
