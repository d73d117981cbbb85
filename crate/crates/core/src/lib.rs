//! Regularized three-dimensional vortex dynamics: discrete filaments,
//! vortex blobs and periodic vortex loops, with energy diagnostics and
//! adaptive filament refinement.

pub mod blobs;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod filament;
pub mod io;
pub mod kernel;
pub mod loops;
pub mod quadrature;
pub mod refine;
pub mod scenario;
pub mod sim;
pub mod sum;

pub use error::{Result, VortexError};
pub use kernel::{Kernel, Mat3, Vec3};
