//! Matrix-free total-variation reconstruction for parallel-beam 3D CT.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: volumes, sinograms, view directions and the Joseph-style
//!   forward/back projector pair.
//! - [`regularizer`]: forward differences and Huber-smoothed isotropic TV.
//! - [`problem`]: the nonnegativity-constrained objective
//!   `½‖Ax − b‖² + α·TV(x)`, its gradient, the gradient map and stopping test.
//! - [`solvers`]: gradient projection (GP), Barzilai-Borwein with nonmonotone
//!   line search (GPBB) and Nesterov's method with online μ/L estimation (UPN).
//! - [`data`]: ellipsoid phantoms, relative-norm Gaussian noise and file IO.
//! - [`cli`]: the `tvtomo` command line driver.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod geometry;
pub mod problem;
pub mod regularizer;
pub mod solvers;
mod vecops;

pub use error::{Error, Result};
pub use geometry::{make_geometry, Projector, ProjectionGeometry, Sinogram, Volume, VolumeGrid};
pub use problem::{GradientMapResult, Objective, Problem};
pub use regularizer::TvConfig;
pub use solvers::{ConvergenceRecord, SolverKind, SolverOptions, SolverResult};
