//! Exit criteria. Each test prints one `criterion N: PASS|FAIL` line and then asserts it.

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sqrtdiff::analytic::robin_roots;
use sqrtdiff::fem::{assemble_convection, Coefficients, VectorField};
use sqrtdiff::fracpow::{apply_inv_sqrt_traced, Integrator, PseudoParabolicConfig, SpectralOracle};
use sqrtdiff::harness::{
    convergence_study, fit_order, oracle_check, random_inputs, ExperimentConfig, InputKind, Setup,
};
use sqrtdiff::mesh::generate_quarter_disk;
use sqrtdiff::schemes::{
    g_norm_squared, inv_sqrt_norm_squared, run, FnSource, Problem, SchemeConfig, SchemeKind, SqrtMethod,
};
use sqrtdiff::{Field64, Operator64, Oracle64};

static SERIAL: Mutex<()> = Mutex::new(());

/// Criteria run one at a time so their wall-clock limits are measured alone.
fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Written straight to the stderr handle, which the test harness does not capture.
macro_rules! say {
    ($($arg:tt)*) => {
        let _ = writeln!(std::io::stderr(), $($arg)*);
    };
}

fn verdict(criterion: u32, pass: bool, detail: impl std::fmt::Display) {
    say!("criterion {criterion}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn level1(mu: f64) -> (Operator64, Oracle64) {
    let mesh = generate_quarter_disk(1).unwrap();
    let op = Operator64::assemble(&mesh, &Coefficients::robin_arc(mu), 1.0).unwrap();
    let oracle = SpectralOracle::new(&op).unwrap();
    (op, oracle)
}

fn m_dist(op: &Operator64, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    op.m_norm(&d)
}

#[test]
fn criterion_1_robin_roots() {
    let _serial = serial();
    let start = Instant::now();
    let table = [
        (1.0, 1.25578371, 7.15579917),
        (10.0, 2.17949660, 7.95688342),
        (100.0, 2.38090166, 8.56783165),
    ];
    let mut worst: f64 = 0.0;
    for (mu, nu1, nu3) in table {
        let r = robin_roots(mu, 3).unwrap();
        worst = worst.max((r.nu(1) - nu1).abs()).max((r.nu(3) - nu3).abs());
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        worst <= 1e-7 && elapsed < Duration::from_secs(1),
        format!("max |nu - table| = {worst:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_2_inverse_sqrt_matches_oracle() {
    let _serial = serial();
    let start = Instant::now();
    let (op, oracle) = level1(10.0);
    let cfg = PseudoParabolicConfig::new(100, Integrator::CrankNicolson);
    let inputs = random_inputs(&oracle, InputKind::WhiteNoise, 20, 2024);
    let check = oracle_check(&op, &oracle, &cfg, &inputs).unwrap();
    let elapsed = start.elapsed();

    // Reference only: the same check restricted to smooth inputs.
    let smooth = random_inputs(&oracle, InputKind::LowModes { cutoff: 30.0 }, 20, 2024);
    let low = oracle_check(&op, &oracle, &cfg, &smooth).unwrap();
    say!("criterion 2 (info): inputs with lambda <= 30 only: max err {:.2e}, ratio {:.2}",
        low.max_error(),
        low.mean_ratio()
    );

    let (max, ratio) = (check.max_error(), check.mean_ratio());
    verdict(
        2,
        max <= 1e-3 && (3.3..=4.7).contains(&ratio) && elapsed < Duration::from_secs(10),
        format!("random inputs: max rel err {max:.3e} (<= 1e-3), K 50->100 ratio {ratio:.2} (3.3-4.7), {elapsed:?}"),
    );
}

#[test]
fn criterion_3_pseudo_time_decay() {
    let _serial = serial();
    let start = Instant::now();
    let (op, oracle) = level1(10.0);
    let inputs = random_inputs(&oracle, InputKind::WhiteNoise, 20, 7);
    let mut violations = 0;
    let mut final_violations = 0;
    let mut checked = 0;
    for integrator in [Integrator::BackwardEuler, Integrator::CrankNicolson] {
        let cfg = PseudoParabolicConfig::new(100, integrator);
        for w in &inputs {
            let t = apply_inv_sqrt_traced(&op, w, &cfg).unwrap();
            checked += t.norms.len() - 1;
            violations += t.norms.windows(2).filter(|p| p[1] > p[0]).count();
            if t.norms[cfg.steps] > op.m_norm(w) / op.delta().sqrt() {
                final_violations += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        3,
        violations == 0 && final_violations == 0 && elapsed < Duration::from_secs(10),
        format!("{violations} increasing steps of {checked}, {final_violations} final-bound violations, {elapsed:?}"),
    );
}

#[test]
fn criterion_4_two_level_stability() {
    let _serial = serial();
    let (op, oracle) = level1(10.0);
    let inputs = random_inputs(&oracle, InputKind::WhiteNoise, 5, 11);
    let taus = [0.01, 0.1, 1.0, 10.0];
    let cases: Vec<(f64, &Vec<f64>)> = taus.iter().flat_map(|&t| inputs.iter().map(move |w| (t, w))).collect();
    let increases: Vec<(f64, usize)> = cases
        .par_iter()
        .map(|&(tau, w0)| {
            let mut cfg = SchemeConfig::new(SchemeKind::Regularized2, tau * 100.0, 100);
            cfg.tau = tau;
            let traj = run(&Problem::homogeneous(&op, w0).with_oracle(&oracle), &cfg).unwrap();
            let g: Vec<f64> = traj.diagnostics.iter().map(|d| d.g_norm.unwrap()).collect();
            (tau, g.windows(2).filter(|p| p[1] > p[0]).count())
        })
        .collect();
    let bad: usize = increases.iter().map(|x| x.1).sum();

    let lmax = *oracle.eigenvalues().last().unwrap();
    let tau = 4.0 / lmax.sqrt();
    let w0 = &inputs[0];
    let mut cfg = SchemeConfig::new(SchemeKind::Explicit, tau * 100.0, 100);
    cfg.tau = tau;
    let traj = run(&Problem::homogeneous(&op, w0), &cfg).unwrap();
    let growth = traj.diagnostics.iter().map(|d| d.m_norm).fold(0.0, f64::max) / op.m_norm(w0);

    verdict(
        4,
        bad == 0 && growth >= 10.0,
        format!("{bad} G-norm increases over 20 runs x 100 steps; explicit tau = 4/sqrt(lambda_max) grows x{growth:.2e}"),
    );
}

/// Max over levels of the M-norm distance to the exact semi-discrete solution.
fn semi_discrete_error(op: &Operator64, oracle: &Oracle64, w0: &[f64], cfg: &SchemeConfig<f64>) -> f64 {
    let traj = run(&Problem::homogeneous(op, w0).with_oracle(oracle), cfg).unwrap();
    let c0 = oracle.coefficients(w0).unwrap();
    traj.states
        .iter()
        .zip(&traj.times)
        .map(|(w, &t)| {
            let c: Vec<f64> = c0.iter().zip(oracle.eigenvalues()).map(|(c, l)| c * (-l.sqrt() * t).exp()).collect();
            m_dist(op, w, &oracle.synthesize(&c))
        })
        .fold(0.0, f64::max)
}

fn level1_smooth() -> (Setup, Oracle64, Field64) {
    let setup = Setup::build(&ExperimentConfig {
        mesh_level: Some(1),
        ..ExperimentConfig::default()
    })
    .unwrap();
    let oracle = setup.oracle().unwrap();
    let w0 = setup.initial_state().unwrap();
    (setup, oracle, w0)
}

const ORDER_NS: [usize; 4] = [25, 50, 100, 200];

fn fitted_order(op: &Operator64, oracle: &Oracle64, w0: &[f64], make: impl Fn(usize) -> SchemeConfig<f64> + Sync) -> (f64, Vec<f64>) {
    let errs: Vec<f64> = ORDER_NS.par_iter().map(|&n| semi_discrete_error(op, oracle, w0, &make(n))).collect();
    let taus: Vec<f64> = ORDER_NS.iter().map(|&n| 0.25 / n as f64).collect();
    (fit_order(&taus, &errs).unwrap(), errs)
}

#[test]
fn criterion_5_three_level_stability_and_orders() {
    let _serial = serial();
    let start = Instant::now();
    let (setup, oracle, w0) = level1_smooth();
    let op = &setup.op;

    // Boundedness over 1000 steps, relative to both starting levels.
    let inputs = random_inputs(&oracle, InputKind::WhiteNoise, 5, 5);
    let taus = [0.001, 0.01, 0.1, 1.0, 10.0];
    let growth_of = |method: SqrtMethod, tau: f64, w0: &Vec<f64>| {
        let mut cfg = SchemeConfig::new(SchemeKind::Regularized3, tau * 1000.0, 1000).with_sqrt_method(method);
        cfg.tau = tau;
        // A run that overflows counts as unbounded.
        let Ok(traj) = run(&Problem::homogeneous(op, w0).with_oracle(&oracle), &cfg) else {
            return f64::INFINITY;
        };
        let m: Vec<f64> = traj.diagnostics.iter().map(|d| d.m_norm).collect();
        m[1..].iter().cloned().fold(0.0, f64::max) / m[0].max(m[1])
    };
    let growth = taus
        .par_iter()
        .map(|&tau| inputs.iter().map(|w| growth_of(SqrtMethod::Spectral, tau, w)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);

    let exact = |scheme: SchemeKind| {
        fitted_order(op, &oracle, &w0, |n| SchemeConfig::new(scheme, 0.25, n).with_sqrt_method(SqrtMethod::Spectral))
    };
    let (p3, e3) = exact(SchemeKind::Regularized3);
    let (p2, e2) = exact(SchemeKind::Regularized2);
    let elapsed = start.elapsed();
    say!("criterion 5 (info): regularized3 errors {}, regularized2 errors {}", sci(&e3), sci(&e2));

    // Reference only: the pseudo-parabolic root with K = 100 on the same check.
    let pp = taus
        .iter()
        .map(|&tau| growth_of(SqrtMethod::PseudoParabolic, tau, &inputs[0]))
        .fold(0.0, f64::max);
    say!("criterion 5 (info): pseudo-parabolic K = 100 root, max growth x{pp:.3e}");

    verdict(
        5,
        growth <= 10.0 && (1.75..=2.25).contains(&p3) && (0.75..=1.25).contains(&p2) && elapsed < Duration::from_secs(60),
        format!("regularized3 max growth x{growth:.3} over 1000 steps, order {p3:.3}; regularized2 order {p2:.3}; {elapsed:?}"),
    );
}

#[test]
fn criterion_5_orders_with_pseudo_parabolic_root() {
    let _serial = serial();
    let (setup, oracle, w0) = level1_smooth();
    let with_k = |scheme: SchemeKind, k: usize| {
        fitted_order(&setup.op, &oracle, &w0, |n| {
            SchemeConfig::new(scheme, 0.25, n).with_frac(PseudoParabolicConfig::new(k, Integrator::CrankNicolson))
        })
    };
    let (p3, e3) = with_k(SchemeKind::Regularized3, 3200);
    let (p2, e2) = with_k(SchemeKind::Regularized2, 800);
    say!("criterion 5 (info): regularized3 K = 3200 errors {}, regularized2 K = 800 errors {}", sci(&e3), sci(&e2));
    verdict(
        5,
        (1.75..=2.25).contains(&p3) && (0.75..=1.25).contains(&p2),
        format!("pseudo-parabolic root: regularized3 order {p3:.3}, regularized2 order {p2:.3}"),
    );
}

const REFERENCE_EPS2: [f64; 4] = [0.01521770, 0.00784386, 0.00398968, 0.00203974];

#[test]
fn criterion_6_error_table_grid_2() {
    let _serial = serial();
    let start = Instant::now();
    let base = ExperimentConfig {
        mesh_level: Some(2),
        mu: 10.0,
        sigma: 0.25,
        t_final: 0.25,
        k_pseudo: 100,
        integrator: "cn".into(),
        ..ExperimentConfig::default()
    };
    let table = convergence_study(&base, &[25, 50, 100, 200]).unwrap();
    let eps = table.eps2();
    let n_vertices = table.reports[0].n_vertices;
    let grid_ok = (n_vertices as f64 - 461.0).abs() <= 0.2 * 461.0;
    let band_ok = eps.iter().zip(REFERENCE_EPS2).all(|(e, p)| *e <= 3.0 * p && *e >= p / 3.0);
    let decreasing = eps.windows(2).all(|w| w[1] < w[0]);
    let elapsed = start.elapsed();
    verdict(
        6,
        grid_ok && band_ok && decreasing && table.failures.is_empty() && elapsed < Duration::from_secs(300),
        format!("{n_vertices} vertices, eps2 = {eps:.5?} vs {REFERENCE_EPS2:?}, {elapsed:?}"),
    );
}

#[test]
fn criterion_7_error_grows_with_mu() {
    let _serial = serial();
    let reference = [0.00267418, 0.00398968, 0.00447231];
    let mus = [1.0, 10.0, 100.0];
    let eps: Vec<f64> = mus
        .par_iter()
        .map(|&mu| {
            let cfg = ExperimentConfig {
                mesh_level: Some(2),
                mu,
                n_steps: 100,
                ..ExperimentConfig::default()
            };
            sqrtdiff::harness::run_experiment(&cfg).unwrap().eps2
        })
        .collect();

    // Reference only: the same runs with a finer pseudo-time grid.
    let fine: Vec<f64> = mus
        .par_iter()
        .map(|&mu| {
            let cfg = ExperimentConfig {
                mesh_level: Some(2),
                mu,
                n_steps: 100,
                k_pseudo: 400,
                ..ExperimentConfig::default()
            };
            sqrtdiff::harness::run_experiment(&cfg).unwrap().eps2
        })
        .collect();
    say!("criterion 7 (info): with K = 400, eps2 = {fine:.6?}");

    let ordered = eps[0] < eps[1] && eps[1] < eps[2];
    let band = eps.iter().zip(reference).all(|(e, p)| *e <= 3.0 * p && *e >= p / 3.0);
    verdict(7, ordered && band, format!("eps2(mu = 1, 10, 100) = {eps:.6?} vs {reference:?}"));
}

#[test]
fn criterion_8_convection() {
    let _serial = serial();
    let mesh = generate_quarter_disk(1).unwrap();
    let coeff = Coefficients::robin_arc(10.0).with_velocity(VectorField::BubbleRotation { amplitude: 1.0 });
    let conv = assemble_convection::<f64>(&mesh, &coeff, 0.0).unwrap();
    let c = &conv.matrix;
    let t = c.transpose();
    let exact_skew = c.col_indices() == t.col_indices() && c.values().iter().zip(t.values()).all(|(a, b)| *a == -*b);

    let base = ExperimentConfig {
        mesh_level: Some(1),
        n_steps: 200,
        t_final: 2.0,
        velocity: "bubble_rotation".into(),
        ..ExperimentConfig::default()
    };
    let demo = sqrtdiff::harness::convection_demo(&base).unwrap();

    let no_flow = sqrtdiff::harness::convection_demo(&ExperimentConfig {
        velocity: "zero".into(),
        ..base.clone()
    })
    .unwrap();
    let diffusion = sqrtdiff::harness::run_experiment(&ExperimentConfig {
        scheme: "regularized2".into(),
        velocity: "zero".into(),
        ..base.clone()
    })
    .unwrap();
    let reduction = (no_flow.report.eps2 - diffusion.eps2).abs().max((no_flow.report.eps_inf - diffusion.eps_inf).abs());

    verdict(
        8,
        exact_skew && demo.g_norms.len() == 201 && demo.non_increasing && reduction <= 1e-10,
        format!(
            "C = -C^T exact: {exact_skew}; G-norm non-increasing over {} steps: {}; zero-velocity difference {reduction:.1e}",
            demo.g_norms.len() - 1,
            demo.non_increasing
        ),
    );
}

#[test]
fn criterion_9_a_priori_estimate() {
    let _serial = serial();
    let (op, oracle) = level1(10.0);
    let n_steps = 50;
    let tau = 0.02;
    let sigma = 0.25;
    let worst = (0..5u64)
        .into_par_iter()
        .map(|seed| {
            let w0 = random_inputs(&oracle, InputKind::WhiteNoise, 1, 100 + seed).remove(0);
            let psi_seq = random_inputs(&oracle, InputKind::WhiteNoise, n_steps + 1, 200 + seed);
            let psi_for = psi_seq.clone();
            let source = FnSource::new(move |t: f64| psi_for[(t / tau).round() as usize].clone());
            let mut cfg = SchemeConfig::new(SchemeKind::Regularized2, tau * n_steps as f64, n_steps);
            cfg.tau = tau;
            cfg.sigma = sigma;
            let traj = run(&Problem::homogeneous(&op, &w0).with_oracle(&oracle).with_source(&source), &cfg).unwrap();
            let g0 = g_norm_squared(&oracle, &w0, tau, sigma).unwrap();
            let mut budget = g0;
            let mut worst: f64 = f64::NEG_INFINITY;
            for n in 0..n_steps {
                budget += 0.5 * tau * inv_sqrt_norm_squared(&oracle, &psi_seq[n + 1]).unwrap();
                let lhs = g_norm_squared(&oracle, &traj.states[n + 1], tau, sigma).unwrap();
                worst = worst.max((lhs - budget) / budget);
            }
            worst
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    verdict(
        9,
        worst <= 1e-6,
        format!("max (lhs - rhs) / rhs = {worst:.3e} over 5 sequences x {n_steps} steps (slack 1e-6)"),
    );
}
