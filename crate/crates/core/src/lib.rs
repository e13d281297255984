//! hp-adaptive discontinuous Petrov-Galerkin finite elements on triangular meshes.
//!
//! The crate couples an ultra-weak DPG solver with optimal test functions to a continuous
//! hp-mesh model: local patch solves pick polynomial orders, the built-in residual estimator
//! yields an error density, and a variational density optimum plus element anisotropy define a
//! metric field that drives remeshing.

pub mod error;
pub mod anisotropy;
pub mod approximation;
pub mod dpg_core;
pub mod dpg_star;
pub mod driver;
pub mod geometry;
pub mod hp_model;
pub mod problems;
pub mod remesh;

pub use error::{Error, Result};
