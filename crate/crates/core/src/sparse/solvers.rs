//! Jacobi-preconditioned Krylov solvers.

use super::CsrMatrix;
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, norm2, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Relative residual target `||S x - b|| <= tol ||b||`.
    pub tol: T,
    /// Iteration cap; `None` means `10 n`.
    pub max_iter: Option<usize>,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            tol: T::of(1e-10),
            max_iter: None,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        SolverOptions { tol, max_iter: None }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero() && self.tol < T::one()) {
            return Err(Error::InvalidArgument(format!("solver tolerance {} not in (0, 1)", self.tol)));
        }
        Ok(())
    }

    fn cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Final true relative residual.
    pub residual: T,
}

fn check_system<T: Real>(s: &CsrMatrix<T>, b: &[T], guess: Option<&[T]>) -> Result<()> {
    if !s.is_square() {
        return Err(Error::InvalidArgument(format!(
            "system matrix must be square, got {}x{}",
            s.n_rows(),
            s.n_cols()
        )));
    }
    if b.len() != s.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: s.n_rows(),
            found: b.len(),
        });
    }
    if let Some(g) = guess {
        if g.len() != s.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: s.n_rows(),
                found: g.len(),
            });
        }
    }
    if !crate::scalar::all_finite(b) {
        return Err(Error::NonFinite("right-hand side"));
    }
    Ok(())
}

fn inverse_diagonal<T: Real>(s: &CsrMatrix<T>, require_positive: bool) -> Result<Vec<T>> {
    s.diagonal_values()
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            if require_positive && d <= T::zero() {
                Err(Error::NotPositiveDefinite(format!("diagonal entry {i} is {d}")))
            } else if d == T::zero() {
                Ok(T::one())
            } else {
                Ok(T::one() / d)
            }
        })
        .collect()
}

fn residual<T: Real>(s: &CsrMatrix<T>, x: &[T], b: &[T], r: &mut [T]) {
    s.mul_vec_into(x, r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Solves SPD `S x = b` by preconditioned conjugate gradients from `x = 0`.
pub fn cg_solve<T: Real>(s: &CsrMatrix<T>, b: &[T], opts: &SolverOptions<T>) -> Result<Solution<T>> {
    cg_solve_from(s, b, None, opts, |_, _| {})
}

/// Conjugate gradients from an initial guess. `monitor(k, x_k)` is called
/// after every iteration.
pub fn cg_solve_from<T: Real>(
    s: &CsrMatrix<T>,
    b: &[T],
    guess: Option<&[T]>,
    opts: &SolverOptions<T>,
    mut monitor: impl FnMut(usize, &[T]),
) -> Result<Solution<T>> {
    opts.validate()?;
    check_system(s, b, guess)?;
    let n = b.len();
    let inv_diag = inverse_diagonal(s, true)?;
    let b_norm = norm2(b);
    let mut x = guess.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    if b_norm == T::zero() {
        return Ok(Solution {
            x: vec![T::zero(); n],
            iterations: 0,
            residual: T::zero(),
        });
    }
    let target = opts.tol * b_norm;
    let cap = opts.cap(n);

    let mut r = vec![T::zero(); n];
    residual(s, &x, b, &mut r);
    if norm2(&r) <= target {
        return Ok(Solution {
            residual: norm2(&r) / b_norm,
            x,
            iterations: 0,
        });
    }
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut sp = vec![T::zero(); n];
    let mut iterations = 0;
    while iterations < cap {
        s.mul_vec_into(&p, &mut sp);
        let psp = dot(&p, &sp);
        if !(psp > T::zero()) {
            return Err(Error::NotPositiveDefinite(format!(
                "p^T S p = {psp} at CG iteration {iterations}"
            )));
        }
        let alpha = rz / psp;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &sp, &mut r);
        iterations += 1;
        monitor(iterations, &x);

        if norm2(&r) <= target {
            // Guard against drift of the recursive residual.
            residual(s, &x, b, &mut r);
            let true_norm = norm2(&r);
            if true_norm <= target {
                return Ok(Solution {
                    x,
                    iterations,
                    residual: true_norm / b_norm,
                });
            }
            for ((zi, &ri), &d) in z.iter_mut().zip(&r).zip(&inv_diag) {
                *zi = ri * d;
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        for ((zi, &ri), &d) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *zi = ri * d;
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    residual(s, &x, b, &mut r);
    Err(Error::NotConverged {
        method: "cg",
        iterations,
        residual: (norm2(&r) / b_norm).as_f64(),
    })
}

/// Solves general `S x = b` by right-Jacobi-preconditioned BiCGStab from `x = 0`.
pub fn bicgstab_solve<T: Real>(s: &CsrMatrix<T>, b: &[T], opts: &SolverOptions<T>) -> Result<Solution<T>> {
    bicgstab_solve_from(s, b, None, opts)
}

pub fn bicgstab_solve_from<T: Real>(
    s: &CsrMatrix<T>,
    b: &[T],
    guess: Option<&[T]>,
    opts: &SolverOptions<T>,
) -> Result<Solution<T>> {
    const METHOD: &str = "bicgstab";
    opts.validate()?;
    check_system(s, b, guess)?;
    let n = b.len();
    let inv_diag = inverse_diagonal(s, false)?;
    let b_norm = norm2(b);
    if b_norm == T::zero() {
        return Ok(Solution {
            x: vec![T::zero(); n],
            iterations: 0,
            residual: T::zero(),
        });
    }
    let target = opts.tol * b_norm;
    let cap = opts.cap(n);
    let tiny = T::min_positive_value().sqrt();

    let mut x = guess.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    let mut r = vec![T::zero(); n];
    residual(s, &x, b, &mut r);
    if norm2(&r) <= target {
        return Ok(Solution {
            residual: norm2(&r) / b_norm,
            x,
            iterations: 0,
        });
    }
    let r_hat = r.clone();
    let mut p = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut p_hat = vec![T::zero(); n];
    let mut s_hat = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
    let mut iterations = 0;

    let breakdown = |iteration, reason| Error::Breakdown {
        method: METHOD,
        iteration,
        reason,
    };

    while iterations < cap {
        let rho_next = dot(&r_hat, &r);
        if rho_next.abs() <= tiny * norm2(&r_hat) * norm2(&r) {
            return Err(breakdown(iterations, "rho vanished"));
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            p_hat[i] = p[i] * inv_diag[i];
        }
        s.mul_vec_into(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == T::zero() || !rv.is_finite() {
            return Err(breakdown(iterations, "(r_hat, v) vanished"));
        }
        alpha = rho / rv;
        // r now holds the intermediate residual s.
        axpy(-alpha, &v, &mut r);
        axpy(alpha, &p_hat, &mut x);
        iterations += 1;
        if norm2(&r) <= target {
            if let Some(sol) = accept(s, b, x.clone(), iterations, target, b_norm) {
                return Ok(sol);
            }
        }
        for i in 0..n {
            s_hat[i] = r[i] * inv_diag[i];
        }
        s.mul_vec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == T::zero() {
            return Err(breakdown(iterations, "t vanished"));
        }
        omega = dot(&t, &r) / tt;
        if omega.abs() <= tiny || !omega.is_finite() {
            return Err(breakdown(iterations, "omega vanished"));
        }
        axpy(omega, &s_hat, &mut x);
        axpy(-omega, &t, &mut r);
        if !crate::scalar::all_finite(&x) {
            return Err(Error::NonFinite("bicgstab iterate"));
        }
        if norm2(&r) <= target {
            if let Some(sol) = accept(s, b, x.clone(), iterations, target, b_norm) {
                return Ok(sol);
            }
            // Recursive residual drifted: restart from the true one.
            residual(s, &x, b, &mut r);
        }
    }
    residual(s, &x, b, &mut r);
    Err(Error::NotConverged {
        method: METHOD,
        iterations,
        residual: (norm2(&r) / b_norm).as_f64(),
    })
}

fn accept<T: Real>(
    s: &CsrMatrix<T>,
    b: &[T],
    x: Vec<T>,
    iterations: usize,
    target: T,
    b_norm: T,
) -> Option<Solution<T>> {
    let mut r = vec![T::zero(); b.len()];
    residual(s, &x, b, &mut r);
    let true_norm = norm2(&r);
    (true_norm <= target).then(|| Solution {
        x,
        iterations,
        residual: true_norm / b_norm,
    })
}
