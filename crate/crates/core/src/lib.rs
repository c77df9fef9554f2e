//! Simulation and verification of Brownian flows generated by finite-driver SDEs.
//!
//! The crate couples an Euler scheme with shared noise, so that any number of
//! starting points move under one realization, and sets the sampled flows
//! against closed-form tail bounds.

// Negated comparisons are used on purpose: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod integrator;
pub mod model;
pub mod noise;
pub mod report;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::{FlowError, Result};
pub use integrator::{evolve, evolve_with, step, PointCloud};
pub use model::{beta0, gamma0, CertifiedConstants, FlowModel, ModelSpec};
pub use noise::{NoiseSource, Seed};
pub use report::BoundReport;
