use std::sync::OnceLock;

use sqrtdiff::fem::Coefficients;
use sqrtdiff::fracpow::SpectralOracle;
use sqrtdiff::harness::{random_inputs, InputKind};
use sqrtdiff::mesh::generate_quarter_disk;
use sqrtdiff::schemes::{
    inv_sqrt_norm_squared, oracle_backward_euler_step, oracle_exact_step, run, Problem, SchemeConfig, SchemeKind,
    SqrtMethod,
};
use sqrtdiff::{Operator64, Oracle64};

fn level1() -> &'static (Operator64, Oracle64) {
    static CELL: OnceLock<(Operator64, Oracle64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mesh = generate_quarter_disk(1).unwrap();
        let op = Operator64::assemble(&mesh, &Coefficients::robin_arc(10.0), 1.0).unwrap();
        let oracle = SpectralOracle::new(&op).unwrap();
        (op, oracle)
    })
}

fn max_growth(kind: SchemeKind, tau: f64, steps: usize, method: SqrtMethod, w0: &[f64]) -> f64 {
    let (op, oracle) = level1();
    let mut cfg = SchemeConfig::new(kind, tau * steps as f64, steps).with_sqrt_method(method);
    cfg.tau = tau;
    match run(&Problem::homogeneous(op, w0).with_oracle(oracle), &cfg) {
        Ok(t) => t.diagnostics.iter().map(|d| d.m_norm).fold(0.0, f64::max) / op.m_norm(w0),
        Err(_) => f64::INFINITY,
    }
}

fn lambda_max() -> f64 {
    *level1().1.eigenvalues().last().unwrap()
}

#[test]
fn explicit_scheme_blows_up_past_its_bound() {
    let w0 = random_inputs(&level1().1, InputKind::WhiteNoise, 1, 1).remove(0);
    let tau = 2.5 / lambda_max().sqrt();
    assert!(max_growth(SchemeKind::Explicit, tau, 50, SqrtMethod::Spectral, &w0) > 10.0);
    let tau = 0.9 / lambda_max().sqrt();
    assert!(max_growth(SchemeKind::Explicit, tau, 200, SqrtMethod::Spectral, &w0) <= 1.0 + 1e-12);
}

#[test]
fn explicit_three_level_stability_condition() {
    let w0 = random_inputs(&level1().1, InputKind::WhiteNoise, 1, 2).remove(0);
    let s = lambda_max().sqrt();
    let stable = max_growth(SchemeKind::Explicit3, 0.9 / s, 1000, SqrtMethod::Spectral, &w0);
    let unstable = max_growth(SchemeKind::Explicit3, 1.2 / s, 1000, SqrtMethod::Spectral, &w0);
    assert!(stable <= 10.0, "{stable}");
    assert!(unstable > 1e3, "{unstable}");
}

#[test]
fn regularized2_is_stable_with_the_pseudo_parabolic_root() {
    let w0 = random_inputs(&level1().1, InputKind::WhiteNoise, 1, 3).remove(0);
    for tau in [0.01, 0.1, 1.0, 10.0] {
        let g = max_growth(SchemeKind::Regularized2, tau, 100, SqrtMethod::PseudoParabolic, &w0);
        assert!(g <= 1.0 + 1e-9, "tau {tau}: {g}");
    }
}

/// `||w^n||^2 <= ||w^0||^2 + 1/2 sum tau ||psi||^2_{D^{-1/2}}`, checked at every level.
fn check_energy_estimate(step: impl Fn(&[f64], &[f64], f64) -> Vec<f64>) {
    let (op, oracle) = level1();
    let tau = 0.05;
    for seed in 0..5 {
        let mut w = random_inputs(oracle, InputKind::WhiteNoise, 1, 50 + seed).remove(0);
        let psis = random_inputs(oracle, InputKind::WhiteNoise, 40, 60 + seed);
        let mut budget = op.m_norm(&w).powi(2);
        for psi in &psis {
            w = step(&w, psi, tau);
            budget += 0.5 * tau * inv_sqrt_norm_squared(oracle, psi).unwrap();
            let lhs = op.m_norm(&w).powi(2);
            assert!(lhs <= budget * (1.0 + 1e-9), "{lhs} > {budget}");
        }
    }
}

#[test]
fn backward_euler_energy_estimate() {
    let oracle = &level1().1;
    check_energy_estimate(|w, psi, tau| oracle_backward_euler_step(oracle, w, Some(psi), tau).unwrap());
}

#[test]
fn exact_propagation_energy_estimate() {
    let oracle = &level1().1;
    check_energy_estimate(|w, psi, tau| oracle_exact_step(oracle, w, Some(psi), tau).unwrap());
}

#[test]
fn backward_euler_large_step_limit() {
    let oracle = &level1().1;
    let w = random_inputs(oracle, InputKind::WhiteNoise, 1, 4).remove(0);
    let out = oracle_backward_euler_step(oracle, &w, None, 1e12).unwrap();
    assert!(out.iter().all(|x| x.abs() < 1e-9));
}
