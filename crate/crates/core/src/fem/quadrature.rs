//! Reference-triangle quadrature rules in barycentric form `(l0, l1, l2, weight)`,
//! weights summing to 1 (multiply by the element area).

/// Edge-midpoint rule, exact for quadratics.
pub(crate) const EDGE_MIDPOINTS: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

const GAUSS5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Collapsed (Duffy) 5x5 Gauss rule, exact for polynomials of degree 8.
pub(crate) fn collapsed_gauss5() -> Vec<([f64; 3], f64)> {
    let mut rule = Vec::with_capacity(25);
    for (xi, wx) in GAUSS5_NODES.iter().zip(GAUSS5_WEIGHTS) {
        let u = 0.5 * (xi + 1.0);
        for (eta, wy) in GAUSS5_NODES.iter().zip(GAUSS5_WEIGHTS) {
            let s = 0.5 * (eta + 1.0);
            let l1 = u;
            let l2 = (1.0 - u) * s;
            // Reference area 1/2, Jacobian (1 - u), each Gauss weight scaled by 1/2.
            let w = 0.25 * wx * wy * (1.0 - u) * 2.0;
            rule.push(([1.0 - l1 - l2, l1, l2], w));
        }
    }
    rule
}

/// Two-point Gauss rule on `[0, 1]`: `(parameter, weight)`.
pub(crate) const EDGE_GAUSS2: [(f64, f64); 2] = [
    (0.211_324_865_405_187_1, 0.5),
    (0.788_675_134_594_812_9, 0.5),
];
