//! Numerical laboratory for nonlinear Dirichlet forms on finite measure spaces.
//!
//! The crate provides exact piecewise-linear normal contractions, convex energy
//! functionals (mixed Dirichlet energies, quadratic forms, shifted forms), residual
//! checks for the contraction property and its equivalent formulations
//! (Cipriani-Grillo, Benilan-Picard, Brigati-Hartarsky), a proximal resolvent with
//! order and contractivity certificates, and a seeded sweep harness that drives all
//! of the above over generated instances.

pub mod contraction;
pub mod criteria;
pub mod error;
pub mod exec;
pub mod functional;
pub mod harness;
pub mod instance;
pub mod resolvent;
pub mod rng;
pub mod space;

pub use error::{Error, Result};
pub use space::{L2Fn, MeasureSpace};
