//! Inverse square root of `D = M^{-1} A` by pseudo-time continuation, and the
//! dense spectral oracle used to check it.
//!
//! With `G = D - delta I`, the function `y(s) = delta^{1/2} (s G + delta I)^{-1/2} y(0)`
//! solves `(s G + delta I) dy/ds + G y / 2 = 0`. Starting from `y(0) = delta^{-1/2} w`
//! the end value `y(1)` equals `D^{-1/2} w`. Each pseudo-step is an SPD solve.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result, ResultExt};
use crate::fem::{DiscreteOperator, Field};
use crate::scalar::{all_finite, dot, Real};
use crate::sparse::{cg_solve_from, generalized_eig, CsrMatrix, EigenDecomposition, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    BackwardEuler,
    #[default]
    CrankNicolson,
}

impl FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "be" | "backward_euler" => Ok(Integrator::BackwardEuler),
            "cn" | "crank_nicolson" => Ok(Integrator::CrankNicolson),
            other => Err(Error::Config(format!("unknown integrator `{other}` (expected be or cn)"))),
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::BackwardEuler => "be",
            Integrator::CrankNicolson => "cn",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoParabolicConfig<T> {
    /// Number of pseudo-time steps `K`; the step is `1 / K`.
    pub steps: usize,
    pub integrator: Integrator,
    /// Relative residual for the inner CG solves.
    pub inner_tol: T,
}

impl<T: Real> Default for PseudoParabolicConfig<T> {
    fn default() -> Self {
        PseudoParabolicConfig {
            steps: 100,
            integrator: Integrator::CrankNicolson,
            inner_tol: T::of(1e-10),
        }
    }
}

impl<T: Real> PseudoParabolicConfig<T> {
    pub fn new(steps: usize, integrator: Integrator) -> Self {
        PseudoParabolicConfig {
            steps,
            integrator,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("pseudo-time step count must be at least 1".into()));
        }
        if !(self.inner_tol > T::zero() && self.inner_tol < T::one()) {
            return Err(Error::Config(format!("inner tolerance {} not in (0, 1)", self.inner_tol)));
        }
        Ok(())
    }
}

/// Output of [`apply_inv_sqrt_traced`].
#[derive(Debug, Clone)]
pub struct InvSqrtTrace<T> {
    pub value: Field<T>,
    /// `||y_k||_M` for `k = 0..=K`.
    pub norms: Vec<T>,
    pub cg_iterations: usize,
}

/// `D^{-1/2} w` by `K` pseudo-time steps.
pub fn apply_inv_sqrt<T: Real>(op: &DiscreteOperator<T>, w: &[T], cfg: &PseudoParabolicConfig<T>) -> Result<Field<T>> {
    Ok(integrate(op, w, cfg, false)?.value)
}

/// As [`apply_inv_sqrt`], also recording the M-norm of every pseudo-time level.
pub fn apply_inv_sqrt_traced<T: Real>(
    op: &DiscreteOperator<T>,
    w: &[T],
    cfg: &PseudoParabolicConfig<T>,
) -> Result<InvSqrtTrace<T>> {
    integrate(op, w, cfg, true)
}

fn integrate<T: Real>(
    op: &DiscreteOperator<T>,
    w: &[T],
    cfg: &PseudoParabolicConfig<T>,
    trace: bool,
) -> Result<InvSqrtTrace<T>> {
    cfg.validate()?;
    if w.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: w.len(),
        });
    }
    if !all_finite(w) {
        return Err(Error::NonFinite("pseudo-time input"));
    }
    let delta = op.delta();
    let eta = T::one() / T::of(cfg.steps as f64);
    let half = T::of(0.5);
    let quarter = T::of(0.25);
    let opts = SolverOptions::with_tol(cfg.inner_tol);

    let scale = delta.sqrt().recip();
    let mut y: Vec<T> = w.iter().map(|&v| v * scale).collect();
    let mut norms = Vec::with_capacity(if trace { cfg.steps + 1 } else { 0 });
    if trace {
        norms.push(op.m_norm(&y));
    }
    let mut rhs = vec![T::zero(); y.len()];
    let mut cg_iterations = 0;
    let mut prev: Option<Vec<T>> = None;
    // alpha G + delta M = alpha A + delta (1 - alpha) M
    let system = |alpha: T| op.combine(alpha, delta * (T::one() - alpha));
    for k in 0..cfg.steps {
        let (lhs_alpha, rhs_alpha) = match cfg.integrator {
            Integrator::BackwardEuler => {
                let s = T::of((k + 1) as f64) * eta;
                (s + half * eta, s)
            }
            Integrator::CrankNicolson => {
                let s = (T::of(k as f64) + half) * eta;
                (s + quarter * eta, s - quarter * eta)
            }
        };
        system(rhs_alpha).mul_vec_into(&y, &mut rhs);
        let lhs = system(lhs_alpha);
        // Linear extrapolation in pseudo-time as the starting guess.
        let guess: Vec<T> = match &prev {
            Some(p) => y.iter().zip(p).map(|(&a, &b)| a + a - b).collect(),
            None => y.clone(),
        };
        let sol = cg_solve_from(&lhs, &rhs, Some(&guess), &opts, |_, _| {})
            .context(|| format!("pseudo-time step {} of {}", k + 1, cfg.steps))?;
        cg_iterations += sol.iterations;
        prev = Some(std::mem::replace(&mut y, sol.x));
        if !all_finite(&y) {
            return Err(Error::NonFinite("pseudo-time state"));
        }
        if trace {
            norms.push(op.m_norm(&y));
        }
    }
    Ok(InvSqrtTrace {
        value: Field::new(y),
        norms,
        cg_iterations,
    })
}

/// `D^{1/2} w`, realized as `M^{-1} A D^{-1/2} w`.
pub fn apply_sqrt<T: Real>(op: &DiscreteOperator<T>, w: &[T], cfg: &PseudoParabolicConfig<T>) -> Result<Field<T>> {
    let g = apply_inv_sqrt(op, w, cfg)?;
    let opts = SolverOptions::with_tol(cfg.inner_tol);
    Ok(Field::new(op.apply_operator(&g, &opts)?))
}

/// Full eigendecomposition of `(A, M)`, used to apply exact spectral functions on small meshes.
#[derive(Debug, Clone)]
pub struct SpectralOracle<T> {
    eig: EigenDecomposition<T>,
    mass: CsrMatrix<T>,
}

impl<T: Real> SpectralOracle<T> {
    pub fn new(op: &DiscreteOperator<T>) -> Result<Self> {
        let eig = generalized_eig(op.stiffness(), op.mass()).context(|| "spectral oracle".to_string())?;
        Ok(SpectralOracle {
            eig,
            mass: op.mass().clone(),
        })
    }

    pub fn from_parts(eig: EigenDecomposition<T>, mass: CsrMatrix<T>) -> Result<Self> {
        if eig.dim() != mass.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: mass.n_rows(),
                found: eig.dim(),
            });
        }
        Ok(SpectralOracle { eig, mass })
    }

    pub fn dim(&self) -> usize {
        self.eig.dim()
    }

    pub fn eigenvalues(&self) -> &[T] {
        self.eig.eigenvalues()
    }

    pub fn eigenvector(&self, k: usize) -> &[T] {
        self.eig.eigenvector(k)
    }

    pub fn decomposition(&self) -> &EigenDecomposition<T> {
        &self.eig
    }

    pub fn mass(&self) -> &CsrMatrix<T> {
        &self.mass
    }

    /// Modal coefficients `c_k = phi_k^T M w`.
    pub fn coefficients(&self, w: &[T]) -> Result<Vec<T>> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: w.len(),
            });
        }
        let mw = self.mass.mul_vec(w);
        Ok((0..self.dim()).map(|k| dot(self.eig.eigenvector(k), &mw)).collect())
    }

    /// `sum_k c_k phi_k`.
    pub fn synthesize(&self, c: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut out = vec![T::zero(); n];
        for (k, &ck) in c.iter().enumerate() {
            if ck != T::zero() {
                crate::scalar::axpy(ck, self.eig.eigenvector(k), &mut out);
            }
        }
        out
    }

    /// `sum_k f(lambda_k) c_k phi_k`.
    pub fn apply_function(&self, w: &[T], f: impl Fn(T) -> T) -> Result<Vec<T>> {
        let mut c = self.coefficients(w)?;
        for (ck, &l) in c.iter_mut().zip(self.eigenvalues()) {
            *ck *= f(l);
        }
        Ok(self.synthesize(&c))
    }

    /// `D^p w`.
    pub fn apply_power(&self, w: &[T], p: T) -> Result<Vec<T>> {
        self.apply_function(w, |l| l.powf(p))
    }
}

/// `sum_k lambda_k^p (phi_k^T M w) phi_k`.
pub fn oracle_apply_power<T: Real>(
    eig: &EigenDecomposition<T>,
    mass: &CsrMatrix<T>,
    w: &[T],
    p: T,
) -> Result<Field<T>> {
    if eig.dim() != mass.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: mass.n_rows(),
            found: eig.dim(),
        });
    }
    let mw = mass.mul_vec(w);
    if w.len() != eig.dim() {
        return Err(Error::DimensionMismatch {
            expected: eig.dim(),
            found: w.len(),
        });
    }
    let mut out = vec![T::zero(); w.len()];
    for (k, &l) in eig.eigenvalues().iter().enumerate() {
        let phi = eig.eigenvector(k);
        crate::scalar::axpy(l.powf(p) * dot(phi, &mw), phi, &mut out);
    }
    Ok(Field::new(out))
}

/// A way of applying `D^{-1/2}` inside a time scheme.
pub trait InverseSqrt<T: Real>: Send + Sync {
    /// Returns `D^{-1/2} w` and the number of inner iterations spent.
    fn apply(&self, op: &DiscreteOperator<T>, w: &[T]) -> Result<(Vec<T>, usize)>;
}

impl<T: Real> InverseSqrt<T> for PseudoParabolicConfig<T> {
    fn apply(&self, op: &DiscreteOperator<T>, w: &[T]) -> Result<(Vec<T>, usize)> {
        let out = integrate(op, w, self, false)?;
        Ok((out.value.into_vec(), out.cg_iterations))
    }
}

impl<T: Real> InverseSqrt<T> for SpectralOracle<T> {
    fn apply(&self, _op: &DiscreteOperator<T>, w: &[T]) -> Result<(Vec<T>, usize)> {
        Ok((self.apply_function(w, |l| l.sqrt().recip())?, 0))
    }
}
