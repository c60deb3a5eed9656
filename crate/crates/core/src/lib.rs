//! Multiplicity solver for the one-dimensional prescribed mean curvature
//! Neumann problem
//!
//! ```text
//! −(u′/√(1+u′²))′ = a(x) f(u),   u′(0) = u′(1) = 0,
//! ```
//!
//! by regularizing the flux, shooting in the phase plane, and following the
//! regularized solutions to their bounded-variation limit.

pub mod numeric;
pub mod ode;
pub mod problem;
pub mod regularization;
pub mod integrator;
pub mod eigen;
pub mod shooting;
pub mod bv_limit;
pub mod phase;

pub use integrator::{integrate_cauchy, Trajectory};
pub use problem::{Nonlinearity, Problem, WeightFamily, WeightFunction};
pub use regularization::RegularizedOperator;
