//! Bessel functions `J0`, `J1`, roots of the Robin eigencondition on the unit
//! disk and the radially symmetric reference solution.

use crate::error::{Error, Result};

/// Switch from the power series to Miller's backward recurrence.
const SERIES_LIMIT: f64 = 8.0;

/// Bessel function of the first kind, order 0.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < SERIES_LIMIT {
        series(ax, 0)
    } else {
        miller(ax).0
    }
}

/// Bessel function of the first kind, order 1.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT { series(ax, 1) } else { miller(ax).1 };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `J_order(x) = (x/2)^order * sum_k (-x^2/4)^k / (k! (k+order)!)` for order 0 or 1.
fn series(x: f64, order: u32) -> f64 {
    let q = -0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for k in 1..100u32 {
        term *= q / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// `(J0(x), J1(x))` by backward recurrence `J_{n-1} = (2n/x) J_n - J_{n+1}`,
/// normalized with `J0 + 2 (J2 + J4 + ...) = 1`.
fn miller(x: f64) -> (f64, f64) {
    let start = {
        let n = (1.5 * x) as usize + 40;
        n + n % 2
    };
    let (mut j_next, mut j_cur) = (0.0f64, 1e-30f64);
    let mut even_sum = 0.0;
    let (mut j0, mut j1) = (0.0, 0.0);
    for n in (1..=start).rev() {
        let j_prev = 2.0 * n as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        // j_cur is now J_{n-1}.
        let order = n - 1;
        if order == 1 {
            j1 = j_cur;
        }
        if order == 0 {
            j0 = j_cur;
        } else if order % 2 == 0 {
            even_sum += j_cur;
        }
        if j_cur.abs() > 1e250 {
            let s = 1e-250;
            j_cur *= s;
            j_next *= s;
            even_sum *= s;
            j1 *= s;
        }
    }
    let norm = j0 + 2.0 * even_sum;
    (j0 / norm, j1 / norm)
}

/// `mu J0(nu) - nu J1(nu)`, which vanishes at the Robin eigenvalues
/// (`nu J0'(nu) + mu J0(nu) = 0` with `J0' = -J1`).
pub fn robin_function(mu: f64, nu: f64) -> f64 {
    mu * bessel_j0(nu) - nu * bessel_j1(nu)
}

/// Ascending positive roots of the Robin eigencondition for a given `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobinRoots {
    pub mu: f64,
    pub roots: Vec<f64>,
}

impl RobinRoots {
    /// `k`-th root, 1-based as in the usual eigenvalue numbering.
    pub fn nu(&self, k: usize) -> f64 {
        self.roots[k - 1]
    }
}

/// First `count` roots of `mu J0(nu) - nu J1(nu) = 0`.
///
/// Root `k` lies between the `(k-1)`-th zero of `J1` (an extremum of `J0`; take 0
/// for `k = 1`) and the `k`-th zero of `J0`, where the function changes sign.
/// Each bracket is bisected to machine precision.
pub fn robin_roots(mu: f64, count: usize) -> Result<RobinRoots> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("root count must be at least 1".into()));
    }
    let j0_zeros = zeros_of(bessel_j0, count)?;
    let j1_zeros = zeros_of(bessel_j1, count)?;
    let f = |nu: f64| robin_function(mu, nu);
    let mut roots = Vec::with_capacity(count);
    for k in 0..count {
        let lo = if k == 0 { 0.0 } else { j1_zeros[k - 1] };
        let hi = j0_zeros[k];
        roots.push(bisect(f, lo, hi)?);
    }
    Ok(RobinRoots { mu, roots })
}

/// Positive zeros of `f`, located by a coarse scan and refined by bisection.
fn zeros_of(f: fn(f64) -> f64, count: usize) -> Result<Vec<f64>> {
    const STEP: f64 = 0.25;
    let mut zeros = Vec::with_capacity(count);
    let mut a = STEP;
    let mut fa = f(a);
    while zeros.len() < count {
        let b = a + STEP;
        let fb = f(b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            zeros.push(bisect(f, a, b)?);
        }
        a = b;
        fa = fb;
        if a > 1e6 {
            return Err(Error::Bracketing { lo: STEP, hi: a });
        }
    }
    Ok(zeros)
}

fn bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracketing { lo, hi });
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Radially symmetric reference solution with modes 1 and 3:
/// `u(r, t) = exp(-nu1 t) J0(nu1 r) + 1.5 exp(-nu3 t) J0(nu3 r)`.
///
/// Each mode decays at rate `nu_k`, the square root of the Robin eigenvalue `nu_k^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSolution {
    pub mu: f64,
    pub nu1: f64,
    pub nu3: f64,
}

impl ExactSolution {
    pub const SECOND_AMPLITUDE: f64 = 1.5;

    pub fn new(mu: f64) -> Result<Self> {
        let roots = robin_roots(mu, 3)?;
        Ok(ExactSolution {
            mu,
            nu1: roots.nu(1),
            nu3: roots.nu(3),
        })
    }

    pub fn at_radius(&self, r: f64, t: f64) -> f64 {
        (-self.nu1 * t).exp() * bessel_j0(self.nu1 * r)
            + Self::SECOND_AMPLITUDE * (-self.nu3 * t).exp() * bessel_j0(self.nu3 * r)
    }

    pub fn at_point(&self, p: [f64; 2], t: f64) -> f64 {
        self.at_radius(p[0].hypot(p[1]), t)
    }
}

/// Pointwise value of the reference solution.
pub fn exact_solution(mu: f64, r: f64, t: f64) -> Result<f64> {
    Ok(ExactSolution::new(mu)?.at_radius(r, t))
}
