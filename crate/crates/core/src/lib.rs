//! Finite-element solvers for `dw/dt + C w + D^{1/2} w = psi`, where `D` is a
//! second-order elliptic operator with Robin boundary conditions.
//!
//! The square root is never formed: `D^{-1/2}` is applied by integrating a
//! pseudo-time problem (see [`fracpow`]), and the time schemes in [`schemes`]
//! only need that action. A dense spectral oracle checks everything on small meshes.

pub mod analytic;
pub mod error;
pub mod fem;
pub mod fracpow;
pub mod harness;
pub mod mesh;
pub mod scalar;
pub mod schemes;
pub mod sparse;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Real;

pub type Csr64 = sparse::CsrMatrix<f64>;
pub type Field64 = fem::Field<f64>;
pub type Operator64 = fem::DiscreteOperator<f64>;
pub type Oracle64 = fracpow::SpectralOracle<f64>;
pub type SchemeConfig64 = schemes::SchemeConfig<f64>;
pub type Trajectory64 = schemes::Trajectory<f64>;
