//! Finite elements.

pub mod assembly;
pub mod delaunay;
pub mod lagrange;
pub mod mesh;
pub mod multifrontal;
pub mod norms;
pub mod quadrature;
pub mod solve;
pub mod space;

pub use assembly::{assemble, ComplexSystem, Medium};
pub use delaunay::generate_mesh;
pub use mesh::{BoundaryEdge, BoundaryTag, Mesh, MeshQuality};
pub use space::{FeSpace, FieldFunction};
pub use norms::{difference_norm, error_norm, local_norm};
pub use solve::{best_approximation, galerkin, reference_solution, solve};
