//! Gauge-theoretic inverse-problem laboratory.
//!
//! Parallel transport of matrix gauge potentials along paths and broken
//! billiard rays in planar domains with obstacles, holonomy invariants,
//! Dirichlet-to-Neumann maps for the magnetic matrix Schrödinger operator,
//! and reconstruction of the gauge relating two potentials.

pub mod billiards;
pub mod cli;
pub mod dtn;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod reconstruct;
pub mod transport;

pub use error::*;
pub use linalg::{CMat, Vec2, C64};
