//! Numerical analysis on marked configuration spaces: marked Poisson
//! measures, the diffeomorphism ⋉ current group action, the intrinsic
//! gradient/divergence calculus on cylinder functions and the Charlier chaos.

pub mod error;
pub mod jet;
pub mod mark_space;
pub mod quadrature;
pub mod base_space;
pub mod configuration;
pub mod sampling;
pub mod group_action;
pub mod calculus;
pub mod chaos;

pub use error::{Error, Result};
