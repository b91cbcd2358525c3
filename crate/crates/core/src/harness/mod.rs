//! Experiment runner: builds the quarter-disk problem with the Bessel reference
//! solution, runs a scheme, and reports discrete L2 / max nodal errors.

mod config;
mod output;

pub use config::{ExperimentConfig, MeshSource};
pub use output::{
    dump_matrices, reports_csv, vtk_string, write_reports_csv, write_trajectory_csv, write_vtk, REPORT_COLUMNS,
};

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::analytic::ExactSolution;
use crate::error::{Error, Result, ResultExt};
use crate::fem::{assemble_convection, l2_project, Coefficients, DiscreteOperator, Field};
use crate::fracpow::{apply_inv_sqrt, PseudoParabolicConfig, SpectralOracle};
use crate::mesh::{generate_quarter_disk, load_mesh, Mesh};
use crate::schemes::{run, Problem, SchemeKind, SqrtMethod, Trajectory, ZeroSource};
use crate::sparse::SolverOptions;

/// Meshes up to this size get a spectral oracle (and G-norm diagnostics) automatically.
pub const AUTO_ORACLE_MAX_VERTICES: usize = 200;

/// Mesh, operators and reference solution for one configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub grid: String,
    pub mesh: Mesh,
    pub coeff: Coefficients,
    pub op: DiscreteOperator<f64>,
    pub exact: ExactSolution,
    /// Relative skew defect of the convection quadrature, if a velocity is set.
    pub convection_defect: Option<f64>,
}

impl Setup {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let source = cfg.mesh_source()?;
        let mesh = match &source {
            MeshSource::Generate(level) => generate_quarter_disk(*level)?,
            MeshSource::File(p) => load_mesh(p)?,
        };
        let coeff = Coefficients::robin_arc(cfg.mu).with_velocity(cfg.velocity_field()?);
        let mut op = DiscreteOperator::assemble(&mesh, &Coefficients::robin_arc(cfg.mu), cfg.delta)?;
        let mut convection_defect = None;
        if !coeff.velocity.is_zero() {
            let c = assemble_convection(&mesh, &coeff, 0.0)?;
            convection_defect = Some(c.relative_defect());
            op = op.with_convection(c.matrix)?;
        }
        Ok(Setup {
            grid: source.label(),
            exact: ExactSolution::new(cfg.mu)?,
            mesh,
            coeff,
            op,
            convection_defect,
        })
    }

    /// `w0 = P u(., 0)`.
    pub fn initial_state(&self) -> Result<Field<f64>> {
        let u = self.exact;
        l2_project(&self.mesh, self.op.mass(), |p| u.at_point(p, 0.0), &SolverOptions::with_tol(1e-13))
    }

    pub fn exact_nodal(&self, t: f64) -> Vec<f64> {
        self.mesh.vertices().iter().map(|&p| self.exact.at_point(p, t)).collect()
    }

    /// `(eps2, eps_inf, e)` with `e_i = w_i - u(x_i, t)`.
    pub fn nodal_error(&self, w: &[f64], t: f64) -> (f64, f64, Vec<f64>) {
        let e: Vec<f64> = w.iter().zip(self.exact_nodal(t)).map(|(a, b)| a - b).collect();
        let eps2 = self.op.m_norm(&e);
        let eps_inf = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (eps2, eps_inf, e)
    }

    pub fn oracle(&self) -> Result<SpectralOracle<f64>> {
        SpectralOracle::new(&self.op)
    }
}

/// Errors at the final time plus run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub grid: String,
    pub n_vertices: usize,
    pub scheme: String,
    pub mu: f64,
    pub sigma: f64,
    pub n_steps: usize,
    pub tau: f64,
    pub k_pseudo: usize,
    pub integrator: String,
    pub eps2: f64,
    pub eps_inf: f64,
    pub cg_iterations: usize,
    pub pseudo_iterations: usize,
    pub wall_time_s: f64,
}

fn needs_oracle(cfg: &ExperimentConfig, setup: &Setup) -> Result<bool> {
    let scheme = cfg.scheme_kind()?;
    let sqrt: SqrtMethod = cfg.sqrt_method.parse()?;
    Ok(scheme.needs_oracle() || sqrt == SqrtMethod::Spectral || setup.op.dim() <= AUTO_ORACLE_MAX_VERTICES)
}

/// Runs one configuration on a prepared setup.
pub fn simulate(
    cfg: &ExperimentConfig,
    setup: &Setup,
    oracle: Option<&SpectralOracle<f64>>,
) -> Result<(ErrorReport, Trajectory<f64>)> {
    let start = Instant::now();
    let scheme_cfg = cfg.scheme_config()?;
    let w0 = setup.initial_state()?;
    let mut problem = Problem::homogeneous(&setup.op, &w0).with_source(&ZeroSource);
    if let Some(o) = oracle {
        problem = problem.with_oracle(o);
    }
    let traj = run(&problem, &scheme_cfg)?;
    let (eps2, eps_inf, _) = setup.nodal_error(traj.last(), cfg.t_final);
    if !(eps2.is_finite() && eps_inf.is_finite()) {
        return Err(Error::NonFinite("error norms"));
    }
    let report = ErrorReport {
        grid: setup.grid.clone(),
        n_vertices: setup.mesh.n_vertices(),
        scheme: scheme_cfg.scheme.to_string(),
        mu: cfg.mu,
        sigma: cfg.sigma,
        n_steps: cfg.n_steps,
        tau: scheme_cfg.tau,
        k_pseudo: cfg.k_pseudo,
        integrator: scheme_cfg.frac.integrator.to_string(),
        eps2,
        eps_inf,
        cg_iterations: traj.total_cg_iterations(),
        pseudo_iterations: traj.total_pseudo_iterations(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((report, traj))
}

/// Builds the problem, runs it to `t_final` and writes any requested outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    let setup = Setup::build(cfg)?;
    let oracle = if needs_oracle(cfg, &setup)? {
        Some(setup.oracle()?)
    } else {
        None
    };
    let (report, traj) = simulate(cfg, &setup, oracle.as_ref())?;
    write_outputs(cfg, &setup, &report, &traj)?;
    Ok(report)
}

fn write_outputs(cfg: &ExperimentConfig, setup: &Setup, report: &ErrorReport, traj: &Trajectory<f64>) -> Result<()> {
    if let Some(path) = &cfg.out {
        write_reports_csv(std::slice::from_ref(report), path)?;
    }
    if let Some(path) = &cfg.trajectory_out {
        write_trajectory_csv(traj, path)?;
    }
    if let Some(path) = &cfg.vtk {
        let (_, _, e) = setup.nodal_error(traj.last(), cfg.t_final);
        let exact = setup.exact_nodal(cfg.t_final);
        write_vtk(
            &setup.mesh,
            &[("w", traj.last()), ("exact", &exact), ("error", &e)],
            path,
        )?;
    }
    if let Some(dir) = &cfg.matrix_dump {
        let mut mats = vec![("M", setup.op.mass()), ("A", setup.op.stiffness())];
        if let Some(c) = setup.op.convection() {
            mats.push(("C", c));
        }
        dump_matrices(dir, &mats)?;
    }
    Ok(())
}

/// Reports of a sweep over step counts, sorted by `N`.
#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub reports: Vec<ErrorReport>,
    /// Step counts whose runs failed, with the error message.
    pub failures: Vec<(usize, String)>,
    /// Least-squares slope of `log eps2` against `log tau` over the pre-floor range.
    pub fitted_order: Option<f64>,
}

impl ConvergenceTable {
    pub fn eps2(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.eps2).collect()
    }
}

/// Least-squares slope of `log err` against `log tau`.
pub fn fit_order(taus: &[f64], errs: &[f64]) -> Option<f64> {
    if taus.len() != errs.len() || taus.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = taus
        .iter()
        .zip(errs)
        .filter(|(t, e)| **t > 0.0 && **e > 0.0)
        .map(|(t, e)| (t.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Order fitted over the leading run of strictly decreasing errors (before a
/// spatial error floor takes over), with reports sorted by increasing `N`.
pub fn pre_floor_order(reports: &[ErrorReport]) -> Option<f64> {
    let mut end = 1;
    while end < reports.len() && reports[end].eps2 < reports[end - 1].eps2 {
        end += 1;
    }
    let r = &reports[..end.min(reports.len())];
    let taus: Vec<f64> = r.iter().map(|r| r.tau).collect();
    let errs: Vec<f64> = r.iter().map(|r| r.eps2).collect();
    fit_order(&taus, &errs)
}

/// Runs `base` for every `N` in `n_list` concurrently and writes the CSV if
/// `base.out` is set. Failed entries are listed, the rest of the table is kept.
pub fn convergence_study(base: &ExperimentConfig, n_list: &[usize]) -> Result<ConvergenceTable> {
    if n_list.is_empty() {
        return Err(Error::Config("empty step-count list".into()));
    }
    let setup = Setup::build(base)?;
    let oracle = if needs_oracle(base, &setup)? {
        Some(setup.oracle()?)
    } else {
        None
    };
    let mut results: Vec<(usize, Result<ErrorReport>)> = n_list
        .par_iter()
        .map(|&n| {
            let cfg = ExperimentConfig {
                n_steps: n,
                ..base.clone()
            };
            (n, simulate(&cfg, &setup, oracle.as_ref()).map(|r| r.0))
        })
        .collect();
    results.sort_by_key(|(n, _)| *n);
    let mut reports = vec![];
    let mut failures = vec![];
    for (n, r) in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => failures.push((n, e.to_string())),
        }
    }
    let fitted_order = pre_floor_order(&reports);
    if let Some(path) = &base.out {
        write_reports_csv(&reports, path)?;
    }
    Ok(ConvergenceTable {
        reports,
        failures,
        fitted_order,
    })
}

/// Output of [`convection_demo`].
#[derive(Debug, Clone)]
pub struct ConvectionDemo {
    pub report: ErrorReport,
    /// G-norm at every level.
    pub g_norms: Vec<f64>,
    pub non_increasing: bool,
    pub skew_defect: Option<f64>,
}

/// Regularized convection scheme with `psi = 0`, logging the oracle G-norm per level.
pub fn convection_demo(cfg: &ExperimentConfig) -> Result<ConvectionDemo> {
    let cfg = ExperimentConfig {
        scheme: SchemeKind::Regularized2Convection.name().into(),
        ..cfg.clone()
    };
    let setup = Setup::build(&cfg)?;
    let oracle = setup.oracle().context(|| "convection demo needs the spectral oracle".to_string())?;
    let (report, traj) = simulate(&cfg, &setup, Some(&oracle))?;
    write_outputs(&cfg, &setup, &report, &traj)?;
    let g_norms: Vec<f64> = traj.diagnostics.iter().filter_map(|d| d.g_norm).collect();
    let non_increasing = g_norms.windows(2).all(|w| w[1] <= w[0]);
    Ok(ConvectionDemo {
        report,
        g_norms,
        non_increasing,
        skew_defect: setup.convection_defect,
    })
}

/// Kind of random input for [`oracle_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputKind {
    /// Independent standard normal nodal values.
    WhiteNoise,
    /// Standard normal coefficients on the eigenvectors with `lambda <= cutoff`.
    LowModes { cutoff: f64 },
}

/// Relative M-norm errors of the pseudo-time `D^{-1/2}` against the oracle.
#[derive(Debug, Clone)]
pub struct OracleCheck {
    /// With the configured `K`.
    pub errors: Vec<f64>,
    /// With `K / 2`.
    pub errors_half: Vec<f64>,
}

impl OracleCheck {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }

    /// Mean of the per-input ratios `err(K/2) / err(K)`.
    pub fn mean_ratio(&self) -> f64 {
        let r: Vec<f64> = self.errors_half.iter().zip(&self.errors).map(|(h, e)| h / e).collect();
        r.iter().sum::<f64>() / r.len() as f64
    }
}

/// Random inputs from a seeded ChaCha generator.
pub fn random_inputs(
    oracle: &SpectralOracle<f64>,
    kind: InputKind,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = oracle.dim();
    (0..count)
        .map(|_| match kind {
            InputKind::WhiteNoise => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
            InputKind::LowModes { cutoff } => {
                let c: Vec<f64> = oracle
                    .eigenvalues()
                    .iter()
                    .map(|&l| if l <= cutoff { StandardNormal.sample(&mut rng) } else { 0.0 })
                    .collect();
                oracle.synthesize(&c)
            }
        })
        .collect()
}

pub fn oracle_check(
    op: &DiscreteOperator<f64>,
    oracle: &SpectralOracle<f64>,
    cfg: &PseudoParabolicConfig<f64>,
    inputs: &[Vec<f64>],
) -> Result<OracleCheck> {
    let half = PseudoParabolicConfig {
        steps: (cfg.steps / 2).max(1),
        ..*cfg
    };
    let rel = |c: &PseudoParabolicConfig<f64>, w: &[f64]| -> Result<f64> {
        let exact = oracle.apply_power(w, -0.5)?;
        let got = apply_inv_sqrt(op, w, c)?;
        let e: Vec<f64> = got.iter().zip(&exact).map(|(a, b)| a - b).collect();
        Ok(op.m_norm(&e) / op.m_norm(&exact))
    };
    let pairs: Vec<Result<(f64, f64)>> = inputs.par_iter().map(|w| Ok((rel(cfg, w)?, rel(&half, w)?))).collect();
    let mut errors = vec![];
    let mut errors_half = vec![];
    for p in pairs {
        let (e, h) = p?;
        errors.push(e);
        errors_half.push(h);
    }
    Ok(OracleCheck { errors, errors_half })
}
