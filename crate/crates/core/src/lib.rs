//! Linear finite elements for Dirichlet eigenproblems of second-order
//! elliptic operators `-div(D grad u) + b.grad u + c u = lambda u`.
//!
//! The crate covers mesh handling, assembly of the stiffness and mass
//! matrices, geometric sufficient conditions for a nonnegative principal
//! eigenfunction, algebraic checks on the assembled matrix, and a sparse
//! shift-invert eigensolver.

pub mod eigen;
pub mod error;
pub mod assembly;
pub mod conditions;
pub mod exec;
pub mod linalg;
pub mod coefficients;
pub mod geometry;
pub mod matrix_analysis;
pub mod mesh;
pub mod quadrature;
pub mod vtk;

pub use error::{Error, Result};
pub use exec::Execution;
pub use mesh::{SimplicialMesh, StructuredKind};
