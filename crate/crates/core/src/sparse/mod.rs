//! Sparse complex matrices, fill-reducing ordering, direct and iterative
//! solvers.

pub mod csr;
pub mod gmres;
pub mod lu;
pub mod ordering;

pub use csr::{CsrMatrix, Triplets};
pub use gmres::{gmres, GmresOptions, GmresResult};
pub use lu::SparseLu;
