//! Sparse storage, Krylov solvers and the dense eigensolver behind the spectral oracle.

mod csr;
mod eig;
mod solvers;

pub use csr::{CooBuilder, CsrMatrix, PatternSum};
pub use eig::{generalized_eig, EigenDecomposition, DENSE_EIG_CAP};
pub use solvers::{bicgstab_solve, bicgstab_solve_from, cg_solve, cg_solve_from, Solution, SolverOptions};
