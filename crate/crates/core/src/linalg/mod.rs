//! Numerical kernel: sparse storage, sparse LU, dense fallbacks and the
//! small Hessenberg eigensolver used on Arnoldi projections.

pub mod balance;
pub mod dense;
pub mod hessenberg;
pub mod lu;
pub mod ordering;
pub mod sparse;

pub use balance::{balance_scaling, similarity_scale};
pub use dense::{DenseLu, DenseMatrix};
pub use hessenberg::{hessenberg_eigen, hessenberg_reduce, RealSchur};
pub use lu::{LuFactors, PivotPolicy};
pub use sparse::SparseMatrix;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
