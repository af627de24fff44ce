//! Numerical laboratory for the J-flow on the flat complex 2-torus.
//!
//! The crate evolves Kähler potentials under the J-flow and its
//! ε-regularized degenerate variant, solves the equivalent complex
//! Monge–Ampère equation by Newton–Krylov, and evaluates the energy
//! functionals and a priori estimate monitors that accompany the flow.

pub mod calculus;
pub mod cohomology;
pub mod presets;
pub mod error;
pub mod functionals;
pub mod ma;
pub mod flow;
pub mod diagnostics;
pub mod snapshot;
pub mod cli;

pub use error::{Error, Result};
