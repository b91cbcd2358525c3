//! Dense symmetric-definite generalized eigensolver `A x = lambda M x`.
//!
//! The pencil is reduced to standard form with the Cholesky factor of `M`,
//! `C = L^{-1} A L^{-T}`, and `C` is diagonalized by cyclic Jacobi rotations.
//! Intended for the spectral oracle on small meshes only.

use super::CsrMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest dimension accepted by [`generalized_eig`].
pub const DENSE_EIG_CAP: usize = 5000;

const MAX_SWEEPS: usize = 60;

/// Eigenpairs of a symmetric-definite pencil, eigenvalues ascending and
/// eigenvectors `M`-orthonormal.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<T> {
    n: usize,
    values: Vec<T>,
    // Column-major: eigenvector k occupies vectors[k*n .. (k+1)*n].
    vectors: Vec<T>,
}

impl<T: Real> EigenDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.values
    }

    pub fn eigenvector(&self, k: usize) -> &[T] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }

    pub fn min_eigenvalue(&self) -> T {
        self.values[0]
    }

    pub fn max_eigenvalue(&self) -> T {
        self.values[self.n - 1]
    }
}

/// Full spectrum of `A x = lambda M x` for symmetric `A` and SPD `M`.
pub fn generalized_eig<T: Real>(a: &CsrMatrix<T>, m: &CsrMatrix<T>) -> Result<EigenDecomposition<T>> {
    let n = a.n_rows();
    if !a.is_square() || !m.is_square() || m.n_rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.n_rows(),
        });
    }
    if n > DENSE_EIG_CAP {
        return Err(Error::DimensionCap { n, cap: DENSE_EIG_CAP });
    }
    if n == 0 {
        return Ok(EigenDecomposition {
            n,
            values: vec![],
            vectors: vec![],
        });
    }
    let l = cholesky(&m.to_dense(), n)?;

    // C = L^{-1} A L^{-T}, built column by column: X = L^{-1} A, then C = L^{-1} X^T.
    let a_dense = a.to_dense();
    let mut x = a_dense; // row-major; overwritten by L^{-1} A
    forward_solve_columns(&l, &mut x, n);
    let mut c = transpose(&x, n);
    forward_solve_columns(&l, &mut c, n);
    for i in 0..n {
        for j in 0..i {
            let avg = T::of(0.5) * (c[i * n + j] + c[j * n + i]);
            c[i * n + j] = avg;
            c[j * n + i] = avg;
        }
    }

    let mut q = vec![T::zero(); n * n];
    for i in 0..n {
        q[i * n + i] = T::one();
    }
    jacobi_diagonalize(&mut c, &mut q, n)?;

    // Eigenvectors of the pencil: Phi = L^{-T} Q.
    backward_solve_transposed_columns(&l, &mut q, n);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| c[i * n + i].partial_cmp(&c[j * n + j]).unwrap().then(i.cmp(&j)));
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        values.push(c[k * n + k]);
        let mut col: Vec<T> = (0..n).map(|i| q[i * n + k]).collect();
        // Fix the sign so the largest-magnitude component is positive.
        let pivot = col.iter().fold(T::zero(), |best, &v| if v.abs() > best.abs() { v } else { best });
        if pivot < T::zero() {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        vectors.extend(col);
    }
    Ok(EigenDecomposition { n, values, vectors })
}

/// Lower Cholesky factor of a dense row-major SPD matrix.
fn cholesky<T: Real>(m: &[T], n: usize) -> Result<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > T::zero()) {
            return Err(Error::NotPositiveDefinite(format!(
                "Cholesky pivot {j} is {d}; mass matrix is not SPD"
            )));
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

/// Overwrites every column `b` of row-major `x` with `L^{-1} b`.
fn forward_solve_columns<T: Real>(l: &[T], x: &mut [T], n: usize) {
    for i in 0..n {
        let (done, rest) = x.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        for k in 0..i {
            let lik = l[i * n + k];
            if lik != T::zero() {
                let row_k = &done[k * n..(k + 1) * n];
                for (xi, &xk) in row_i.iter_mut().zip(row_k) {
                    *xi -= lik * xk;
                }
            }
        }
        let inv = T::one() / l[i * n + i];
        row_i.iter_mut().for_each(|v| *v *= inv);
    }
}

/// Overwrites every column `b` of row-major `x` with `L^{-T} b`.
fn backward_solve_transposed_columns<T: Real>(l: &[T], x: &mut [T], n: usize) {
    for i in (0..n).rev() {
        let (head, tail) = x.split_at_mut((i + 1) * n);
        let row_i = &mut head[i * n..];
        for k in i + 1..n {
            let lki = l[k * n + i];
            if lki != T::zero() {
                let row_k = &tail[(k - i - 1) * n..(k - i) * n];
                for (xi, &xk) in row_i.iter_mut().zip(row_k) {
                    *xi -= lki * xk;
                }
            }
        }
        let inv = T::one() / l[i * n + i];
        row_i.iter_mut().for_each(|v| *v *= inv);
    }
}

fn transpose<T: Real>(x: &[T], n: usize) -> Vec<T> {
    let mut t = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = x[i * n + j];
        }
    }
    t
}

/// Cyclic Jacobi on symmetric row-major `c`; accumulates rotations into `q`.
fn jacobi_diagonalize<T: Real>(c: &mut [T], q: &mut [T], n: usize) -> Result<()> {
    let eps = T::epsilon();
    for _sweep in 0..MAX_SWEEPS {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += c[i * n + i] * c[i * n + i];
            for j in i + 1..n {
                off += c[i * n + j] * c[i * n + j];
            }
        }
        if off.sqrt() <= eps * T::of(1e-2) * diag.sqrt() || off == T::zero() {
            return Ok(());
        }
        let floor = eps * eps * (diag + off + off).sqrt();
        let mut rotations = 0usize;
        for p in 0..n {
            for r in p + 1..n {
                let apr = c[p * n + r];
                if apr == T::zero() {
                    continue;
                }
                let (app, arr) = (c[p * n + p], c[r * n + r]);
                // Skip entries already negligible against both diagonals.
                if apr.abs() <= eps * T::of(1e-3) * app.abs().min(arr.abs()) || apr.abs() <= floor {
                    c[p * n + r] = T::zero();
                    c[r * n + p] = T::zero();
                    continue;
                }
                rotations += 1;
                let theta = (arr - app) / (T::of(2.0) * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let cs = T::one() / (t * t + T::one()).sqrt();
                let sn = t * cs;
                let tau = sn / (T::one() + cs);
                c[p * n + p] = app - t * apr;
                c[r * n + r] = arr + t * apr;
                c[p * n + r] = T::zero();
                c[r * n + p] = T::zero();
                for k in 0..n {
                    if k == p || k == r {
                        continue;
                    }
                    let g = c[k * n + p];
                    let h = c[k * n + r];
                    let gp = g - sn * (h + g * tau);
                    let hr = h + sn * (g - h * tau);
                    c[k * n + p] = gp;
                    c[p * n + k] = gp;
                    c[k * n + r] = hr;
                    c[r * n + k] = hr;
                }
                for k in 0..n {
                    let g = q[k * n + p];
                    let h = q[k * n + r];
                    q[k * n + p] = g - sn * (h + g * tau);
                    q[k * n + r] = h + sn * (g - h * tau);
                }
            }
        }
        if rotations == 0 {
            return Ok(());
        }
    }
    Err(Error::NotConverged {
        method: "jacobi eigensolver",
        iterations: MAX_SWEEPS,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pencil() {
        let a = CsrMatrix::diagonal(&[4.0, 1.0]);
        let m = CsrMatrix::identity(2);
        let eig = generalized_eig(&a, &m).unwrap();
        assert_eq!(eig.eigenvalues(), &[1.0, 4.0]);
        assert_eq!(eig.eigenvector(0), &[0.0, 1.0]);
        assert_eq!(eig.eigenvector(1), &[1.0, 0.0]);
    }

    #[test]
    fn identity_pencil_has_unit_spectrum() {
        let m = CsrMatrix::<f64>::from_dense(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
        let eig = generalized_eig(&m, &m).unwrap();
        for &l in eig.eigenvalues() {
            assert!((l - 1.0).abs() < 1e-13, "{l}");
        }
    }

    #[test]
    fn two_by_two_against_closed_form() {
        // A = [[2,1],[1,2]], M = I: eigenvalues 1 and 3.
        let a = CsrMatrix::<f64>::from_dense(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let eig = generalized_eig(&a, &CsrMatrix::identity(2)).unwrap();
        assert!((eig.eigenvalues()[0] - 1.0).abs() < 1e-15);
        assert!((eig.eigenvalues()[1] - 3.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((eig.eigenvector(1)[0] - h).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_mass() {
        let m = CsrMatrix::diagonal(&[1.0, -1.0]);
        assert!(matches!(
            generalized_eig(&CsrMatrix::identity(2), &m),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn dimension_cap() {
        let big = CsrMatrix::<f64>::identity(DENSE_EIG_CAP + 1);
        assert!(matches!(generalized_eig(&big, &big), Err(Error::DimensionCap { .. })));
    }
}
