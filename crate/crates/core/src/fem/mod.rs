//! P1 finite elements: coefficient fields, assembled operators and nodal fields.

mod assembly;
mod coefficients;
mod quadrature;

pub use assembly::{assemble_convection, assemble_mass, assemble_stiffness, l2_project, Convection};
pub use coefficients::{bubble_stream, bubble_velocity, Coefficients, ScalarField, VectorField};

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::{dot, Real};
use crate::sparse::{cg_solve, CsrMatrix, PatternSum, SolverOptions};

/// Nodal coefficient vector of a P1 function.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field<T> {
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn new(values: Vec<T>) -> Self {
        Field { values }
    }

    pub fn zeros(n: usize) -> Self {
        Field {
            values: vec![T::zero(); n],
        }
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    /// `<u, v> = u^T M v`.
    pub fn m_inner(&self, other: &[T], mass: &CsrMatrix<T>) -> T {
        mass.bilinear(&self.values, other)
    }

    /// Discrete L2 norm `sqrt(u^T M u)`.
    pub fn m_norm(&self, mass: &CsrMatrix<T>) -> T {
        mass.bilinear(&self.values, &self.values).max(T::zero()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        crate::scalar::all_finite(&self.values)
    }
}

impl<T> From<Vec<T>> for Field<T> {
    fn from(values: Vec<T>) -> Self {
        Field { values }
    }
}

impl<T> Deref for Field<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.values
    }
}

impl<T> DerefMut for Field<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

/// `sqrt(x^T M x)` on a plain slice.
pub fn m_norm<T: Real>(mass: &CsrMatrix<T>, x: &[T]) -> T {
    mass.bilinear(x, x).max(T::zero()).sqrt()
}

/// The Galerkin pair `(M, A)` defining `D = M^{-1} A`, an optional skew
/// convection matrix `C`, and the lower spectral bound `delta`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator<T> {
    mass: CsrMatrix<T>,
    stiffness: CsrMatrix<T>,
    convection: Option<CsrMatrix<T>>,
    delta: T,
    pattern: PatternSum<T>,
}

impl<T: Real> DiscreteOperator<T> {
    /// Checks shapes, symmetry of `M` and `A` and `delta > 0`.
    pub fn new(mass: CsrMatrix<T>, stiffness: CsrMatrix<T>, delta: T) -> Result<Self> {
        let n = mass.n_rows();
        if !mass.is_square() || !stiffness.is_square() || stiffness.n_rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: stiffness.n_rows(),
            });
        }
        if !(delta > T::zero() && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        let tol = T::of(1e-13);
        if !mass.is_symmetric(tol) {
            return Err(Error::Validation {
                line: None,
                message: "mass matrix is not symmetric".into(),
            });
        }
        if !stiffness.is_symmetric(tol) {
            return Err(Error::Validation {
                line: None,
                message: "stiffness matrix is not symmetric".into(),
            });
        }
        let pattern = PatternSum::new(&stiffness, &mass)?;
        Ok(DiscreteOperator {
            mass,
            stiffness,
            convection: None,
            delta,
            pattern,
        })
    }

    /// Attaches a convection matrix, which must satisfy `C = -C^T` exactly.
    pub fn with_convection(mut self, c: CsrMatrix<T>) -> Result<Self> {
        if c.n_rows() != self.dim() || !c.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: c.n_rows(),
            });
        }
        let t = c.transpose();
        if c.col_indices() != t.col_indices() || c.values().iter().zip(t.values()).any(|(&a, &b)| a != -b) {
            return Err(Error::Validation {
                line: None,
                message: "convection matrix is not exactly skew-symmetric".into(),
            });
        }
        self.convection = Some(c);
        Ok(self)
    }

    /// Assembles `M`, `A` and, for a nonzero velocity, `C` at `t = 0`.
    pub fn assemble(mesh: &Mesh, coeff: &Coefficients, delta: T) -> Result<Self> {
        let mass = assemble_mass(mesh);
        let stiffness = assemble_stiffness(mesh, coeff)?;
        let op = Self::new(mass, stiffness, delta)?;
        if coeff.velocity.is_zero() {
            Ok(op)
        } else {
            let conv = assemble_convection(mesh, coeff, 0.0)?;
            op.with_convection(conv.matrix)
        }
    }

    pub fn dim(&self) -> usize {
        self.mass.n_rows()
    }

    pub fn mass(&self) -> &CsrMatrix<T> {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix<T> {
        &self.stiffness
    }

    pub fn convection(&self) -> Option<&CsrMatrix<T>> {
        self.convection.as_ref()
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    /// `alpha A + beta M` on the shared sparsity pattern.
    pub fn combine(&self, alpha: T, beta: T) -> CsrMatrix<T> {
        self.pattern.combine(alpha, &self.stiffness, beta, &self.mass)
    }

    /// Solves `M x = b`.
    pub fn solve_mass(&self, b: &[T], opts: &SolverOptions<T>) -> Result<(Vec<T>, usize)> {
        let sol = cg_solve(&self.mass, b, opts)?;
        Ok((sol.x, sol.iterations))
    }

    /// `D w = M^{-1} A w`.
    pub fn apply_operator(&self, w: &[T], opts: &SolverOptions<T>) -> Result<Vec<T>> {
        Ok(self.solve_mass(&self.stiffness.mul_vec(w), opts)?.0)
    }

    pub fn m_norm(&self, x: &[T]) -> T {
        m_norm(&self.mass, x)
    }

    pub fn m_inner(&self, x: &[T], y: &[T]) -> T {
        debug_assert_eq!(x.len(), y.len());
        let mx = self.mass.mul_vec(y);
        dot(x, &mx)
    }
}
