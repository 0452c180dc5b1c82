//! Modulational instability of two-component condensates in a deep optical lattice.
//!
//! The crate covers the coupled discrete nonlinear Schrödinger model
//! ([`model`]), its Bogoliubov spectrum in closed form ([`bogoliubov`]) and as
//! a numerical eigenproblem ([`linearization`]), phase-diagram scans
//! ([`stability_map`]), RK4 time evolution ([`integrator`]) and the
//! growth-rate experiments that tie simulation back to linear theory
//! ([`experiments`]).

pub mod bogoliubov;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod linearization;
pub mod model;
pub mod stability_map;
pub mod validation;

pub use error::{Error, Result};
