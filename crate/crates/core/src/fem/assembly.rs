use super::coefficients::Coefficients;
use super::quadrature::{collapsed_gauss5, EDGE_GAUSS2, EDGE_MIDPOINTS};
use super::Field;
use crate::error::{Error, Result, ResultExt};
use crate::mesh::{Mesh, Point};
use crate::scalar::Real;
use crate::sparse::{cg_solve, CooBuilder, CsrMatrix, SolverOptions};

/// Velocity magnitude above which a boundary vertex is rejected.
const BOUNDARY_VELOCITY_TOL: f64 = 1e-12;

/// Barycentric gradients of a positively oriented triangle.
fn gradients(p: &[Point; 3], area: f64) -> [[f64; 2]; 3] {
    let s = 0.5 / area;
    [
        [(p[1][1] - p[2][1]) * s, (p[2][0] - p[1][0]) * s],
        [(p[2][1] - p[0][1]) * s, (p[0][0] - p[2][0]) * s],
        [(p[0][1] - p[1][1]) * s, (p[1][0] - p[0][0]) * s],
    ]
}

fn at(p: &[Point; 3], l: &[f64; 3]) -> Point {
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}

fn centroid(p: &[Point; 3]) -> Point {
    at(p, &[1.0 / 3.0; 3])
}

/// Consistent P1 mass matrix.
pub fn assemble_mass<T: Real>(mesh: &Mesh) -> CsrMatrix<T> {
    let mut coo = CooBuilder::with_capacity(mesh.n_vertices(), mesh.n_vertices(), 9 * mesh.n_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.signed_area(t) / 12.0;
        for i in 0..3 {
            for j in 0..3 {
                let v = if i == j { 2.0 * a } else { a };
                coo.push(tri[i], tri[j], T::of(v));
            }
        }
    }
    coo.finish()
}

/// Matrix of `d(u, v) = int(k grad u . grad v + c u v) + int_boundary mu u v`.
///
/// `k` and `c` are sampled at element centroids; `mu` at two Gauss points per edge.
pub fn assemble_stiffness<T: Real>(mesh: &Mesh, coeff: &Coefficients) -> Result<CsrMatrix<T>> {
    let n = mesh.n_vertices();
    let mut coo = CooBuilder::with_capacity(n, n, 9 * mesh.n_triangles() + 4 * mesh.boundary_edges().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(t);
        let area = mesh.signed_area(t);
        let mid = centroid(&p);
        let k = coeff.k.eval(mid);
        let c = coeff.c.eval(mid);
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::CoefficientBound(format!("k = {k} at centroid of cell {t}")));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::CoefficientBound(format!("c = {c} at centroid of cell {t}")));
        }
        let g = gradients(&p, area);
        for i in 0..3 {
            for j in 0..3 {
                let mut v = k * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                if c != 0.0 {
                    v += c * area / 12.0 * if i == j { 2.0 } else { 1.0 };
                }
                coo.push(tri[i], tri[j], T::of(v));
            }
        }
    }
    let verts = mesh.vertices();
    for (e, edge) in mesh.boundary_edges().iter().enumerate() {
        let mu = coeff.mu_on(edge.tag);
        if mu.is_zero() {
            continue;
        }
        let [a, b] = edge.vertices;
        let (pa, pb) = (verts[a], verts[b]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let mut local = [[0.0; 2]; 2];
        for &(s, w) in &EDGE_GAUSS2 {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let m = mu.eval(x);
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::CoefficientBound(format!("mu = {m} on boundary edge {e}")));
            }
            let phi = [1.0 - s, s];
            for i in 0..2 {
                for j in 0..2 {
                    local[i][j] += w * len * m * phi[i] * phi[j];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                coo.push(edge.vertices[i], edge.vertices[j], T::of(local[i][j]));
            }
        }
    }
    Ok(coo.finish())
}

/// Result of [`assemble_convection`].
#[derive(Debug, Clone)]
pub struct Convection<T> {
    /// Exactly skew-symmetric `(C~ - C~^T) / 2`.
    pub matrix: CsrMatrix<T>,
    /// `max |C~ + C~^T|` of the quadrature matrix before symmetrization.
    pub skew_defect: f64,
    /// `max |C~|`.
    pub raw_max: f64,
}

impl<T> Convection<T> {
    pub fn relative_defect(&self) -> f64 {
        if self.raw_max == 0.0 {
            0.0
        } else {
            self.skew_defect / self.raw_max
        }
    }
}

/// Matrix of `c(y, w) = int div(v y) w - 1/2 int (div v) y w`, i.e.
/// `C~_ij = int (v . grad chi_j) chi_i + 1/2 (div v) chi_j chi_i`, then skew-symmetrized.
pub fn assemble_convection<T: Real>(mesh: &Mesh, coeff: &Coefficients, t: f64) -> Result<Convection<T>> {
    let vel = &coeff.velocity;
    for (i, &is_boundary) in mesh.boundary_vertex_mask().iter().enumerate() {
        if is_boundary {
            let v = vel.eval(mesh.vertices()[i], t);
            let magnitude = v[0].hypot(v[1]);
            if !(magnitude <= BOUNDARY_VELOCITY_TOL) {
                return Err(Error::BoundaryVelocity { vertex: i, magnitude });
            }
        }
    }
    let n = mesh.n_vertices();
    if vel.is_zero() {
        let empty = CooBuilder::<T>::new(n, n).finish();
        return Ok(Convection {
            matrix: empty,
            skew_defect: 0.0,
            raw_max: 0.0,
        });
    }
    let rule = collapsed_gauss5();
    let mut coo = CooBuilder::with_capacity(n, n, 9 * mesh.n_triangles());
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(e);
        let area = mesh.signed_area(e);
        let g = gradients(&p, area);
        let mut local = [[0.0; 3]; 3];
        for (l, w) in &rule {
            let x = at(&p, l);
            let v = vel.eval(x, t);
            let half_div = 0.5 * vel.divergence(x);
            let wa = w * area;
            for i in 0..3 {
                for j in 0..3 {
                    let adv = v[0] * g[j][0] + v[1] * g[j][1];
                    local[i][j] += wa * (adv + half_div * l[j]) * l[i];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                coo.push(tri[i], tri[j], T::of(local[i][j]));
            }
        }
    }
    let raw: CsrMatrix<T> = coo.finish();
    let sum = CsrMatrix::linear_combination(&[(T::one(), &raw), (T::one(), &raw.transpose())])?;
    Ok(Convection {
        matrix: raw.skew_part(),
        skew_defect: sum.max_abs().as_f64(),
        raw_max: raw.max_abs().as_f64(),
    })
}

/// `b_i = int g chi_i` by the edge-midpoint rule; `g(cell, barycentric, point)`.
fn load_vector(mesh: &Mesh, g: impl Fn(usize, &[f64; 3], Point) -> f64) -> Vec<f64> {
    let mut b = vec![0.0f64; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(t);
        let area = mesh.signed_area(t);
        for (l, w) in &EDGE_MIDPOINTS {
            let gv = g(t, l, at(&p, l)) * w * area;
            for i in 0..3 {
                b[tri[i]] += gv * l[i];
            }
        }
    }
    b
}

/// L2 projection onto the P1 space: solves `M p = b`, `b_i = int g chi_i`
/// with the edge-midpoint rule.
pub fn l2_project<T: Real>(
    mesh: &Mesh,
    mass: &CsrMatrix<T>,
    g: impl Fn(Point) -> f64,
    opts: &SolverOptions<T>,
) -> Result<Field<T>> {
    let b = load_vector(mesh, |_, _, x| g(x));
    let b: Vec<T> = b.into_iter().map(T::of).collect();
    let sol = cg_solve(mass, &b, opts).context(|| "L2 projection".to_string())?;
    Ok(Field::new(sol.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{ScalarField, VectorField};
    use crate::mesh::generate_quarter_disk;

    fn single() -> Mesh {
        Mesh::from_cells(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn single_element_mass() {
        let m: CsrMatrix<f64> = assemble_mass(&single());
        let a = 0.5 / 12.0;
        let expected = [2.0 * a, a, a, a, 2.0 * a, a, a, a, 2.0 * a];
        for (got, want) in m.to_dense().iter().zip(expected) {
            assert!((got - want).abs() < 1e-16);
        }
    }

    #[test]
    fn mass_sums_to_area() {
        let mesh = generate_quarter_disk(1).unwrap();
        let m: CsrMatrix<f64> = assemble_mass(&mesh);
        let ones = vec![1.0; mesh.n_vertices()];
        assert!((m.bilinear(&ones, &ones) - mesh.total_area()).abs() < 1e-13);
        assert!((mesh.total_area() - std::f64::consts::FRAC_PI_4).abs() < 2.0 * mesh.max_edge_length().powi(2));
    }

    #[test]
    fn neumann_kernel_and_additive_reaction() {
        let mesh = generate_quarter_disk(1).unwrap();
        let lap: CsrMatrix<f64> = assemble_stiffness(&mesh, &Coefficients::robin_arc(0.0)).unwrap();
        let ones = vec![1.0; mesh.n_vertices()];
        assert!(lap.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        let mut coeff = Coefficients::robin_arc(0.0);
        coeff.c = ScalarField::Constant(1.0);
        let with_c: CsrMatrix<f64> = assemble_stiffness(&mesh, &coeff).unwrap();
        let m: CsrMatrix<f64> = assemble_mass(&mesh);
        let sum = CsrMatrix::linear_combination(&[(1.0, &lap), (1.0, &m), (-1.0, &with_c)]).unwrap();
        assert!(sum.max_abs() < 1e-14);
        assert!(with_c.is_symmetric(1e-14));
    }

    #[test]
    fn robin_term_integrates_arc_length() {
        // 1^T A 1 with k-term vanishing is mu times the polygonal arc length.
        let mesh = generate_quarter_disk(2).unwrap();
        let a: CsrMatrix<f64> = assemble_stiffness(&mesh, &Coefficients::robin_arc(10.0)).unwrap();
        let ones = vec![1.0; mesh.n_vertices()];
        let arc: f64 = mesh
            .boundary_edges()
            .iter()
            .filter(|e| e.tag == crate::mesh::BoundaryTag::Arc)
            .map(|e| {
                let [p, q] = e.vertices.map(|v| mesh.vertices()[v]);
                (p[0] - q[0]).hypot(p[1] - q[1])
            })
            .sum();
        assert!((a.bilinear(&ones, &ones) - 10.0 * arc).abs() < 1e-12);
        assert!((arc - std::f64::consts::FRAC_PI_2).abs() < 1e-2);
    }

    #[test]
    fn coefficient_bounds_are_checked() {
        let mesh = generate_quarter_disk(1).unwrap();
        let mut coeff = Coefficients::robin_arc(1.0);
        coeff.k = ScalarField::custom(|p| if p[0] > 0.5 { -1.0 } else { 1.0 });
        assert!(matches!(assemble_stiffness::<f64>(&mesh, &coeff), Err(Error::CoefficientBound(_))));
        let mut coeff = Coefficients::robin_arc(1.0);
        coeff.mu[2] = ScalarField::Constant(-1.0);
        assert!(matches!(assemble_stiffness::<f64>(&mesh, &coeff), Err(Error::CoefficientBound(_))));
    }

    #[test]
    fn bilinear_form_matches_direct_quadrature() {
        use rand::{Rng, SeedableRng};
        let mesh = generate_quarter_disk(1).unwrap();
        let coeff = Coefficients {
            c: ScalarField::Constant(0.5),
            ..Coefficients::robin_arc(10.0)
        };
        let a: CsrMatrix<f64> = assemble_stiffness(&mesh, &coeff).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let u: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.random_range(-1.0..1.0)).collect();
            // Element by element: constant gradients, exact midpoint rule for the product.
            let mut direct = 0.0;
            for (t, tri) in mesh.triangles().iter().enumerate() {
                let p = mesh.triangle_points(t);
                let area = mesh.signed_area(t);
                let g = gradients(&p, area);
                let gu = (0..3).fold([0.0; 2], |s, i| [s[0] + u[tri[i]] * g[i][0], s[1] + u[tri[i]] * g[i][1]]);
                let gv = (0..3).fold([0.0; 2], |s, i| [s[0] + v[tri[i]] * g[i][0], s[1] + v[tri[i]] * g[i][1]]);
                direct += area * (gu[0] * gv[0] + gu[1] * gv[1]);
                for (l, w) in &EDGE_MIDPOINTS {
                    let uu: f64 = (0..3).map(|i| l[i] * u[tri[i]]).sum();
                    let vv: f64 = (0..3).map(|i| l[i] * v[tri[i]]).sum();
                    direct += 0.5 * w * area * uu * vv;
                }
            }
            for e in mesh.boundary_edges().iter().filter(|e| e.tag == crate::mesh::BoundaryTag::Arc) {
                let [i, j] = e.vertices;
                let [p, q] = [mesh.vertices()[i], mesh.vertices()[j]];
                let len = (p[0] - q[0]).hypot(p[1] - q[1]);
                // Simpson is exact for the quadratic product on the edge.
                let (um, vm) = (0.5 * (u[i] + u[j]), 0.5 * (v[i] + v[j]));
                direct += 10.0 * len / 6.0 * (u[i] * v[i] + 4.0 * um * vm + u[j] * v[j]);
            }
            let matrix = a.bilinear(&u, &v);
            assert!((matrix - direct).abs() <= 1e-12 * direct.abs().max(1.0), "{matrix} vs {direct}");
        }
    }

    #[test]
    fn zero_velocity_gives_zero_convection() {
        let mesh = generate_quarter_disk(1).unwrap();
        let c = assemble_convection::<f64>(&mesh, &Coefficients::robin_arc(1.0), 0.0).unwrap();
        assert_eq!(c.matrix.nnz(), 0);
        assert_eq!(c.skew_defect, 0.0);
    }

    #[test]
    fn bubble_convection_is_nearly_skew_before_symmetrization() {
        let mesh = generate_quarter_disk(2).unwrap();
        let coeff = Coefficients::robin_arc(10.0).with_velocity(VectorField::BubbleRotation { amplitude: 1.0 });
        let c = assemble_convection::<f64>(&mesh, &coeff, 0.0).unwrap();
        assert!(c.raw_max > 0.0);
        assert!(c.relative_defect() <= 1e-3, "{}", c.relative_defect());
        let t = c.matrix.transpose();
        assert_eq!(c.matrix.col_indices(), t.col_indices());
        assert!(c.matrix.values().iter().zip(t.values()).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn boundary_velocity_is_rejected() {
        let mesh = generate_quarter_disk(1).unwrap();
        let coeff = Coefficients::robin_arc(1.0).with_velocity(VectorField::custom(|_, _| [1.0, 0.0], |_| 0.0));
        assert!(matches!(
            assemble_convection::<f64>(&mesh, &coeff, 0.0),
            Err(Error::BoundaryVelocity { .. })
        ));
    }

    #[test]
    fn projection_reproduces_p1_functions() {
        let mesh = generate_quarter_disk(1).unwrap();
        let m: CsrMatrix<f64> = assemble_mass(&mesh);
        let opts = SolverOptions::with_tol(1e-13);
        let p = l2_project(&mesh, &m, |_| 1.0, &opts).unwrap();
        assert!(p.iter().all(|v| (v - 1.0).abs() < 1e-10));
        let p = l2_project(&mesh, &m, |x| 2.0 * x[0] - x[1] + 0.5, &opts).unwrap();
        for (v, x) in p.iter().zip(mesh.vertices()) {
            assert!((v - (2.0 * x[0] - x[1] + 0.5)).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_of_a_basis_function() {
        let mesh = generate_quarter_disk(1).unwrap();
        let j = mesh.n_vertices() / 2;
        let m: CsrMatrix<f64> = assemble_mass(&mesh);
        let chi_j = |t: usize, l: &[f64; 3], _: Point| {
            mesh.triangles()[t].iter().position(|&v| v == j).map_or(0.0, |k| l[k])
        };
        let b = load_vector(&mesh, chi_j);
        let p = cg_solve(&m, &b, &SolverOptions::with_tol(1e-13)).unwrap().x;
        for (i, v) in p.iter().enumerate() {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-8);
        }
    }

    #[test]
    fn projection_of_radial_mode_is_close_to_interpolant() {
        let nu1 = crate::analytic::robin_roots(10.0, 1).unwrap().nu(1);
        let g = |x: Point| crate::analytic::bessel_j0(nu1 * x[0].hypot(x[1]));
        let mut errs = vec![];
        for level in [2, 3] {
            let mesh = generate_quarter_disk(level).unwrap();
            let m: CsrMatrix<f64> = assemble_mass(&mesh);
            let p = l2_project(&mesh, &m, g, &SolverOptions::with_tol(1e-12)).unwrap();
            let err = p.iter().zip(mesh.vertices()).map(|(v, &x)| (v - g(x)).abs()).fold(0.0, f64::max);
            let h = mesh.max_edge_length();
            assert!(err <= h * h, "level {level}: {err} vs h^2 = {}", h * h);
            errs.push(err);
        }
        assert!(errs[1] < errs[0] / 2.5);
    }
}
