//! Spatial SIS epidemics on a network of patches with mass-action incidence.
//!
//! The crate computes the basic reproduction number, enumerates endemic
//! equilibria through a scalar reduction, integrates the dynamics, and
//! evaluates the limiting profiles as the dispersal rates shrink.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod linalg;
pub mod model;
pub mod sampling;

pub use error::{Error, Result};
pub use model::{build_model, Model};
