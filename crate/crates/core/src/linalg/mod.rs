//! Sparse storage, incomplete factorizations and restarted GMRES.

mod gmres;
mod precond;
mod sparse;

pub use gmres::{gmres, GmresConfig, SolveStats};
pub use precond::{BlockDiagonal, BlockPartition, Identity, Ilu0, Preconditioner};
pub use sparse::{SparseMatrix, TripletBuilder};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("zero pivot in row {0} during incomplete factorization")]
    ZeroPivot(usize),
    #[error(
        "GMRES did not converge: relative residual {residual:.3e} after {iterations} iterations"
    )]
    NotConverged { iterations: usize, residual: f64 },
    #[error("GMRES breakdown: {0}")]
    Breakdown(String),
    #[error("invalid block partition: {0}")]
    Partition(String),
}
