//! Time integrators for `dw/dt + C w + D^{1/2} w = psi`.
//!
//! Implicit updates are solved for the increment `w_{n+1} - w_n`, so a zero
//! time step returns the previous level unchanged.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result, ResultExt};
use crate::fem::{DiscreteOperator, Field};
use crate::fracpow::{InverseSqrt, PseudoParabolicConfig, SpectralOracle};
use crate::scalar::{all_finite, axpy, Real};
use crate::sparse::{bicgstab_solve, cg_solve, CsrMatrix, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Explicit,
    Regularized2,
    Explicit3,
    Regularized3,
    Regularized2Convection,
    OracleBackwardEuler,
    OracleExact,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 7] = [
        SchemeKind::Explicit,
        SchemeKind::Regularized2,
        SchemeKind::Explicit3,
        SchemeKind::Regularized3,
        SchemeKind::Regularized2Convection,
        SchemeKind::OracleBackwardEuler,
        SchemeKind::OracleExact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Explicit => "explicit",
            SchemeKind::Regularized2 => "regularized2",
            SchemeKind::Explicit3 => "explicit3",
            SchemeKind::Regularized3 => "regularized3",
            SchemeKind::Regularized2Convection => "regularized2_convection",
            SchemeKind::OracleBackwardEuler => "oracle_backward_euler",
            SchemeKind::OracleExact => "oracle_exact",
        }
    }

    pub fn is_three_level(self) -> bool {
        matches!(self, SchemeKind::Explicit3 | SchemeKind::Regularized3)
    }

    pub fn needs_oracle(self) -> bool {
        matches!(self, SchemeKind::OracleBackwardEuler | SchemeKind::OracleExact)
    }

    /// Schemes whose stability is stated for `sigma >= 1/4`.
    pub fn is_regularized(self) -> bool {
        matches!(
            self,
            SchemeKind::Regularized2 | SchemeKind::Regularized3 | SchemeKind::Regularized2Convection
        )
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

/// How `D^{-1/2}` is applied inside the non-oracle schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SqrtMethod {
    #[default]
    PseudoParabolic,
    /// Exact spectral function from the attached oracle (small meshes).
    Spectral,
}

impl FromStr for SqrtMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pseudo_parabolic" => Ok(SqrtMethod::PseudoParabolic),
            "spectral" | "oracle" => Ok(SqrtMethod::Spectral),
            other => Err(Error::Config(format!("unknown sqrt method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig<T> {
    pub scheme: SchemeKind,
    pub tau: T,
    pub n_steps: usize,
    pub sigma: T,
    pub frac: PseudoParabolicConfig<T>,
    pub sqrt_method: SqrtMethod,
    /// Outer (time-level) solver settings.
    pub solver: SolverOptions<T>,
}

impl<T: Real> SchemeConfig<T> {
    /// `tau = t_final / n_steps`, `sigma = 1/4`, default pseudo-time settings.
    pub fn new(scheme: SchemeKind, t_final: T, n_steps: usize) -> Self {
        let tau = if n_steps == 0 {
            T::zero()
        } else {
            t_final / T::of(n_steps as f64)
        };
        SchemeConfig {
            scheme,
            tau,
            n_steps,
            sigma: T::of(0.25),
            frac: PseudoParabolicConfig::default(),
            sqrt_method: SqrtMethod::PseudoParabolic,
            solver: SolverOptions::default(),
        }
    }

    pub fn with_sigma(mut self, sigma: T) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_frac(mut self, frac: PseudoParabolicConfig<T>) -> Self {
        self.frac = frac;
        self
    }

    pub fn with_sqrt_method(mut self, m: SqrtMethod) -> Self {
        self.sqrt_method = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= T::zero() && self.tau.is_finite()) {
            return Err(Error::Config(format!("time step must be finite and >= 0, got {}", self.tau)));
        }
        if !(self.sigma >= T::zero() && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        self.frac.validate()
    }

    /// Non-fatal configuration issues (currently: sigma below the stability threshold).
    pub fn warnings(&self) -> Vec<String> {
        let mut out = vec![];
        if self.scheme.is_regularized() && self.sigma < T::of(0.25) {
            out.push(format!(
                "sigma = {} < 0.25: {} is not guaranteed to be stable",
                self.sigma, self.scheme
            ));
        }
        out
    }
}

/// Right-hand side `psi(t)` as a nodal field; `None` means zero.
pub trait Source<T>: Send + Sync {
    fn eval(&self, t: T) -> Option<Vec<T>>;
}

/// `psi = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSource;

impl<T> Source<T> for ZeroSource {
    fn eval(&self, _t: T) -> Option<Vec<T>> {
        None
    }
}

/// Source given by a closure of time.
#[derive(Clone)]
pub struct FnSource<T>(pub Arc<dyn Fn(T) -> Vec<T> + Send + Sync>);

impl<T> FnSource<T> {
    pub fn new(f: impl Fn(T) -> Vec<T> + Send + Sync + 'static) -> Self {
        FnSource(Arc::new(f))
    }
}

impl<T> Source<T> for FnSource<T> {
    fn eval(&self, t: T) -> Option<Vec<T>> {
        Some((self.0)(t))
    }
}

/// New time level plus the work spent producing it.
#[derive(Debug, Clone)]
pub struct StepOutput<T> {
    pub w: Vec<T>,
    pub cg_iterations: usize,
    pub pseudo_iterations: usize,
}

fn check_len<T>(op: &DiscreteOperator<T>, v: &[T]) -> Result<()>
where
    T: Real,
{
    if v.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: v.len(),
        });
    }
    Ok(())
}

/// `-tau A D^{-1/2} x + tau M psi`.
fn sqrt_rhs<T: Real>(
    op: &DiscreteOperator<T>,
    inv: &dyn InverseSqrt<T>,
    x: &[T],
    psi: Option<&[T]>,
    tau: T,
) -> Result<(Vec<T>, usize)> {
    check_len(op, x)?;
    if tau == T::zero() {
        return Ok((vec![T::zero(); x.len()], 0));
    }
    let (g, pseudo) = inv.apply(op, x)?;
    let mut r = op.stiffness().mul_vec(&g);
    r.iter_mut().for_each(|v| *v *= -tau);
    if let Some(psi) = psi {
        check_len(op, psi)?;
        axpy(tau, &op.mass().mul_vec(psi), &mut r);
    }
    Ok((r, pseudo))
}

fn finish<T: Real>(w_n: &[T], sol: crate::sparse::Solution<T>, pseudo: usize) -> Result<StepOutput<T>> {
    let mut w = w_n.to_vec();
    axpy(T::one(), &sol.x, &mut w);
    if !all_finite(&w) {
        return Err(Error::NonFinite("time level"));
    }
    Ok(StepOutput {
        w,
        cg_iterations: sol.iterations,
        pseudo_iterations: pseudo,
    })
}

/// `w_{n+1} = w_n - tau D^{1/2} w_n + tau psi_n`.
pub fn step_explicit<T: Real>(
    op: &DiscreteOperator<T>,
    inv: &dyn InverseSqrt<T>,
    w_n: &[T],
    psi_n: Option<&[T]>,
    tau: T,
    solver: &SolverOptions<T>,
) -> Result<StepOutput<T>> {
    let (r, pseudo) = sqrt_rhs(op, inv, w_n, psi_n, tau)?;
    let sol = cg_solve(op.mass(), &r, solver).context(|| "explicit step".to_string())?;
    finish(w_n, sol, pseudo)
}

/// `((1 + s tau) M + s tau A)(w_{n+1} - w_n) = -tau A D^{-1/2} w_n + tau M psi_{n+1}`.
pub fn step_regularized2<T: Real>(
    op: &DiscreteOperator<T>,
    inv: &dyn InverseSqrt<T>,
    w_n: &[T],
    psi_np1: Option<&[T]>,
    tau: T,
    sigma: T,
    solver: &SolverOptions<T>,
) -> Result<StepOutput<T>> {
    let (r, pseudo) = sqrt_rhs(op, inv, w_n, psi_np1, tau)?;
    let st = sigma * tau;
    let b = op.combine(st, T::one() + st);
    let sol = cg_solve(&b, &r, solver).context(|| "regularized two-level step".to_string())?;
    finish(w_n, sol, pseudo)
}

/// `(M + s tau^2 A)(w_{n+1} - w_n) = -tau A D^{-1/2} (3 w_n - w_{n-1})/2 + tau M psi_{n+1/2}`.
///
/// With `sigma = 0` this is the explicit three-level Adams scheme.
pub fn step_regularized3<T: Real>(
    op: &DiscreteOperator<T>,
    inv: &dyn InverseSqrt<T>,
    w_n: &[T],
    w_nm1: &[T],
    psi_half: Option<&[T]>,
    tau: T,
    sigma: T,
    solver: &SolverOptions<T>,
) -> Result<StepOutput<T>> {
    check_len(op, w_nm1)?;
    let half = T::of(0.5);
    let extrap: Vec<T> = w_n
        .iter()
        .zip(w_nm1)
        .map(|(&a, &b)| half * (T::of(3.0) * a - b))
        .collect();
    let (r, pseudo) = sqrt_rhs(op, inv, &extrap, psi_half, tau)?;
    let s = op.combine(sigma * tau * tau, T::one());
    let sol = cg_solve(&s, &r, solver).context(|| "three-level step".to_string())?;
    finish(w_n, sol, pseudo)
}

/// Explicit three-level Adams step.
pub fn step_explicit3<T: Real>(
    op: &DiscreteOperator<T>,
    inv: &dyn InverseSqrt<T>,
    w_n: &[T],
    w_nm1: &[T],
    psi_half: Option<&[T]>,
    tau: T,
    solver: &SolverOptions<T>,
) -> Result<StepOutput<T>> {
    step_regularized3(op, inv, w_n, w_nm1, psi_half, tau, T::zero(), solver)
}

/// Second-order first level for the three-level schemes:
/// `w^1 = w^0 - tau D^{1/2} w^0 + (tau^2/2) D w^0 + tau psi^0`.
pub fn startup_first_level<T: Real>(
    op: &DiscreteOperator<T>,
    inv: &dyn InverseSqrt<T>,
    w0: &[T],
    psi0: Option<&[T]>,
    tau: T,
    solver: &SolverOptions<T>,
) -> Result<StepOutput<T>> {
    let (mut r, pseudo) = sqrt_rhs(op, inv, w0, psi0, tau)?;
    if tau != T::zero() {
        axpy(T::of(0.5) * tau * tau, &op.stiffness().mul_vec(w0), &mut r);
    }
    let sol = cg_solve(op.mass(), &r, solver).context(|| "startup step".to_string())?;
    finish(w0, sol, pseudo)
}

/// Regularized scheme with skew convection, solved by BiCGStab:
/// `((1+s tau) M + (tau/2) C + s tau A) w_{n+1} = ((1+s tau) M - (tau/2) C + s tau A) w_n - tau A g_n + tau M psi`.
pub fn step_regularized2_convection<T: Real>(
    op: &DiscreteOperator<T>,
    inv: &dyn InverseSqrt<T>,
    w_n: &[T],
    psi_np1: Option<&[T]>,
    tau: T,
    sigma: T,
    solver: &SolverOptions<T>,
) -> Result<StepOutput<T>> {
    let (mut r, pseudo) = sqrt_rhs(op, inv, w_n, psi_np1, tau)?;
    let st = sigma * tau;
    let b = op.combine(st, T::one() + st);
    let system = match op.convection() {
        Some(c) if c.nnz() > 0 => {
            // The increment absorbs the difference of the two sides: -tau C w_n.
            axpy(-tau, &c.mul_vec(w_n), &mut r);
            CsrMatrix::linear_combination(&[(T::one(), &b), (T::of(0.5) * tau, c)])?
        }
        _ => b,
    };
    let sol = bicgstab_solve(&system, &r, solver).context(|| "convection step".to_string())?;
    finish(w_n, sol, pseudo)
}

/// `(I + tau D^{1/2}) w_{n+1} = w_n + tau psi_{n+1}` in the eigenbasis.
pub fn oracle_backward_euler_step<T: Real>(
    oracle: &SpectralOracle<T>,
    w_n: &[T],
    psi_np1: Option<&[T]>,
    tau: T,
) -> Result<Vec<T>> {
    let mut rhs = w_n.to_vec();
    if let Some(psi) = psi_np1 {
        axpy(tau, psi, &mut rhs);
    }
    oracle.apply_function(&rhs, |l| (T::one() + tau * l.sqrt()).recip())
}

/// Exact propagation over one step with `psi` frozen:
/// `c_k <- e^{-tau r_k} c_k + (1 - e^{-tau r_k}) psi_k / r_k`, `r_k = lambda_k^{1/2}`.
pub fn oracle_exact_step<T: Real>(
    oracle: &SpectralOracle<T>,
    w_n: &[T],
    psi: Option<&[T]>,
    tau: T,
) -> Result<Vec<T>> {
    let mut c = oracle.coefficients(w_n)?;
    let p = psi.map(|p| oracle.coefficients(p)).transpose()?;
    for (k, (ck, &l)) in c.iter_mut().zip(oracle.eigenvalues()).enumerate() {
        let r = l.sqrt();
        let decay = (-tau * r).exp();
        *ck *= decay;
        if let Some(p) = &p {
            *ck += (T::one() - decay) / r * p[k];
        }
    }
    Ok(oracle.synthesize(&c))
}

/// `||w||_G^2` with `G = (1 + s tau) I + s tau D - (tau/2) D^{1/2}`, via the oracle.
pub fn g_norm_squared<T: Real>(oracle: &SpectralOracle<T>, w: &[T], tau: T, sigma: T) -> Result<T> {
    let c = oracle.coefficients(w)?;
    let half = T::of(0.5);
    Ok(c.iter()
        .zip(oracle.eigenvalues())
        .map(|(&ck, &l)| ck * ck * (T::one() + sigma * tau + sigma * tau * l - half * tau * l.sqrt()))
        .sum())
}

/// `||psi||^2_{D^{-1/2}} = sum_k lambda_k^{-1/2} psi_k^2`, via the oracle.
pub fn inv_sqrt_norm_squared<T: Real>(oracle: &SpectralOracle<T>, psi: &[T]) -> Result<T> {
    let c = oracle.coefficients(psi)?;
    Ok(c.iter().zip(oracle.eigenvalues()).map(|(&ck, &l)| ck * ck / l.sqrt()).sum())
}

/// Per-level diagnostics; level 0 has zero iteration counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelDiagnostics<T> {
    pub m_norm: T,
    /// Present for two-level schemes when an oracle is attached.
    pub g_norm: Option<T>,
    pub cg_iterations: usize,
    pub pseudo_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Field<T>>,
    pub diagnostics: Vec<LevelDiagnostics<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &Field<T> {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn total_cg_iterations(&self) -> usize {
        self.diagnostics.iter().map(|d| d.cg_iterations).sum()
    }

    pub fn total_pseudo_iterations(&self) -> usize {
        self.diagnostics.iter().map(|d| d.pseudo_iterations).sum()
    }
}

/// A failed run: the levels computed before the failure and the error.
#[derive(Debug)]
pub struct PartialRun<T> {
    pub trajectory: Trajectory<T>,
    pub error: Error,
}

impl<T> From<PartialRun<T>> for Error {
    fn from(p: PartialRun<T>) -> Error {
        let completed = p.trajectory.states.len();
        p.error.context(format!("time stepping failed after {completed} levels"))
    }
}

/// Operator, initial state, source and optional oracle.
pub struct Problem<'a, T> {
    pub op: &'a DiscreteOperator<T>,
    pub w0: &'a [T],
    pub source: &'a dyn Source<T>,
    pub oracle: Option<&'a SpectralOracle<T>>,
}

impl<'a, T: Real> Problem<'a, T> {
    pub fn homogeneous(op: &'a DiscreteOperator<T>, w0: &'a [T]) -> Self {
        Problem {
            op,
            w0,
            source: &ZeroSource,
            oracle: None,
        }
    }

    pub fn with_oracle(mut self, oracle: &'a SpectralOracle<T>) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn with_source(mut self, source: &'a dyn Source<T>) -> Self {
        self.source = source;
        self
    }
}

/// Runs `cfg.n_steps` steps. Configuration errors are reported before any
/// stepping; a failing step returns the completed prefix with the error.
pub fn run<T: Real>(problem: &Problem<'_, T>, cfg: &SchemeConfig<T>) -> std::result::Result<Trajectory<T>, PartialRun<T>> {
    let empty = || Trajectory {
        times: vec![],
        states: vec![],
        diagnostics: vec![],
    };
    let fail = |trajectory, error| PartialRun { trajectory, error };
    if let Err(e) = validate_run(problem, cfg) {
        return Err(fail(empty(), e));
    }
    let op = problem.op;
    let tau = cfg.tau;
    let sigma_g = match cfg.scheme {
        SchemeKind::Explicit => Some(T::zero()),
        SchemeKind::Regularized2 | SchemeKind::Regularized2Convection => Some(cfg.sigma),
        _ => None,
    };
    let diagnose = |w: &[T], cg: usize, pseudo: usize| -> Result<LevelDiagnostics<T>> {
        let g_norm = match (problem.oracle, sigma_g) {
            (Some(o), Some(s)) => Some(g_norm_squared(o, w, tau, s)?.max(T::zero()).sqrt()),
            _ => None,
        };
        Ok(LevelDiagnostics {
            m_norm: op.m_norm(w),
            g_norm,
            cg_iterations: cg,
            pseudo_iterations: pseudo,
        })
    };

    let mut traj = empty();
    traj.times.push(T::zero());
    traj.states.push(Field::new(problem.w0.to_vec()));
    match diagnose(problem.w0, 0, 0) {
        Ok(d) => traj.diagnostics.push(d),
        Err(e) => return Err(fail(empty(), e)),
    }

    let oracle_inv;
    let inv: &dyn InverseSqrt<T> = match cfg.sqrt_method {
        SqrtMethod::PseudoParabolic => &cfg.frac,
        SqrtMethod::Spectral => {
            oracle_inv = problem.oracle.expect("checked in validate_run");
            oracle_inv
        }
    };
    let src = |t: T| -> Result<Option<Vec<T>>> {
        let v = problem.source.eval(t);
        if let Some(v) = &v {
            check_len(op, v)?;
        }
        Ok(v)
    };
    let half = T::of(0.5);

    for n in 0..cfg.n_steps {
        let t_n = T::of(n as f64) * tau;
        let t_np1 = T::of((n + 1) as f64) * tau;
        let w_n = &traj.states[n];
        let step = || -> Result<StepOutput<T>> {
            let solver = &cfg.solver;
            match cfg.scheme {
                SchemeKind::Explicit => step_explicit(op, inv, w_n, src(t_n)?.as_deref(), tau, solver),
                SchemeKind::Regularized2 => {
                    step_regularized2(op, inv, w_n, src(t_np1)?.as_deref(), tau, cfg.sigma, solver)
                }
                SchemeKind::Regularized2Convection => {
                    step_regularized2_convection(op, inv, w_n, src(t_np1)?.as_deref(), tau, cfg.sigma, solver)
                }
                SchemeKind::Explicit3 | SchemeKind::Regularized3 => {
                    if n == 0 {
                        startup_first_level(op, inv, w_n, src(T::zero())?.as_deref(), tau, solver)
                    } else {
                        let sigma = if cfg.scheme == SchemeKind::Explicit3 {
                            T::zero()
                        } else {
                            cfg.sigma
                        };
                        let psi = src(t_n + half * tau)?;
                        step_regularized3(op, inv, w_n, &traj.states[n - 1], psi.as_deref(), tau, sigma, solver)
                    }
                }
                SchemeKind::OracleBackwardEuler => {
                    let oracle = problem.oracle.expect("checked in validate_run");
                    let w = oracle_backward_euler_step(oracle, w_n, src(t_np1)?.as_deref(), tau)?;
                    Ok(StepOutput {
                        w,
                        cg_iterations: 0,
                        pseudo_iterations: 0,
                    })
                }
                SchemeKind::OracleExact => {
                    let oracle = problem.oracle.expect("checked in validate_run");
                    let w = oracle_exact_step(oracle, w_n, src(t_n + half * tau)?.as_deref(), tau)?;
                    Ok(StepOutput {
                        w,
                        cg_iterations: 0,
                        pseudo_iterations: 0,
                    })
                }
            }
        };
        let out = match step().and_then(|o| {
            if all_finite(&o.w) {
                Ok(o)
            } else {
                Err(Error::NonFinite("time level"))
            }
        }) {
            Ok(o) => o,
            Err(e) => return Err(fail(traj, e.context(format!("step {}", n + 1)))),
        };
        let d = match diagnose(&out.w, out.cg_iterations, out.pseudo_iterations) {
            Ok(d) => d,
            Err(e) => return Err(fail(traj, e)),
        };
        traj.times.push(t_np1);
        traj.states.push(Field::new(out.w));
        traj.diagnostics.push(d);
    }
    Ok(traj)
}

fn validate_run<T: Real>(problem: &Problem<'_, T>, cfg: &SchemeConfig<T>) -> Result<()> {
    cfg.validate()?;
    check_len(problem.op, problem.w0)?;
    if !all_finite(problem.w0) {
        return Err(Error::NonFinite("initial state"));
    }
    let needs_oracle = cfg.scheme.needs_oracle() || cfg.sqrt_method == SqrtMethod::Spectral;
    if needs_oracle && problem.oracle.is_none() {
        return Err(Error::Config(format!(
            "{} with sqrt method {:?} needs a spectral oracle",
            cfg.scheme, cfg.sqrt_method
        )));
    }
    if let Some(o) = problem.oracle {
        if o.dim() != problem.op.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.op.dim(),
                found: o.dim(),
            });
        }
    }
    Ok(())
}
