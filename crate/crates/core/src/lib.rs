//! Turing-Hopf bifurcation analysis for two-component delayed
//! reaction-diffusion systems with Neumann boundary conditions.
//!
//! The pipeline runs [`model`] → [`spectrum`] → [`eigenbasis`] →
//! [`normalform`] → [`amplitude`], and [`simulate`] integrates the PDE directly
//! to check the predictions.

pub mod amplitude;
pub mod cli;
mod cser;
pub mod eigenbasis;
pub mod expr;
pub mod model;
pub mod normalform;
pub mod pipeline;
pub mod simulate;
pub mod spectrum;

/// Holling-Tanner model file shipped with the crate.
pub const HOLLING_TANNER: &str = include_str!("../models/holling_tanner.toml");
