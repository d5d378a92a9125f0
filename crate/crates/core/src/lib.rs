//! Planning and verification toolkit for high-frequency Helmholtz finite
//! element computations on non-uniform meshes.
//!
//! The pipeline: classify the phase space of a scatterer with billiard rays
//! ([`billiards`]), turn wavenumber and solution-operator growth into
//! per-region mesh budgets ([`planner`]), mesh and solve the PML-truncated
//! problem ([`pml`], [`fem`]), and measure local quasi-optimality and
//! relative errors ([`experiments`]). [`graph_paths`] certifies the
//! Neumann-series bounds behind the error-propagation matrices.

pub mod billiards;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod geometry;
pub mod graph_paths;
pub mod io;
pub mod planner;
pub mod pml;

pub use error::{Error, Result};
pub use geometry::{build_two_wall_scene, classify_point, RegionTag, Scene, TagSet, Vec2};
pub use num_complex::Complex64;

/// Version tag written into every JSON and CSV artifact.
pub const FORMAT_VERSION: u32 = 1;
