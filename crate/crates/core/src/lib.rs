//! Physics for Gaussian splat point clouds.
//!
//! The crate turns a splat point cloud into a simulation-ready particle set and
//! runs it through a Material Point Method solver:
//!
//! - [`pointset`]: PLY ingest/export, unit-cube normalization and the
//!   index-aligned label store.
//! - [`ipf`]: instance-aware interior filling (DBSCAN, quickhull, ray-cast
//!   occupancy and importance-weighted candidate selection).
//! - [`constitutive`]: elastic stress models, plastic return maps and the
//!   stress-norm sensitivity to log Young's modulus.
//! - [`mpm`]: the MLS-MPM engine.
//! - [`bgdo`]: snapshot-based Young's modulus calibration.
//! - [`cli`]: configuration, scene generation and the pipeline driver.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod alloc_track;
pub mod bgdo;
pub mod cli;
pub mod constitutive;
pub mod ipf;
pub mod mpm;
pub mod pointset;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
