//! Thermodynamic reductions and GENERIC dynamics on a one-dimensional kinetic
//! phase space.
//!
//! The crate is generic over the floating point type through [`Real`]; the
//! aliases at the bottom of this file fix `f64`, which is what the scenario
//! runner and the command line tool use.

pub mod error;
pub mod dynamics;
pub mod functionals;
pub mod grid;
pub mod io;
pub mod poisson_grad;
pub mod reduction;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::Real;

pub type PhaseGrid = grid::PhaseGrid<f64>;
pub type ScalarField = grid::ScalarField<f64>;
pub type DistFn = grid::DistFn<f64>;
pub type ExtendedState = grid::ExtendedState<f64>;
