//! Conforming triangular meshes with tagged boundary edges.
//!
//! A [`Mesh`] is immutable once constructed: every constructor runs the full
//! invariant check, so downstream assembly can index without re-validating.

mod generate;
mod io;

pub use generate::{generate_quarter_disk, QUARTER_DISK_LEVELS};
pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh};

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Coordinate tolerance for axis/arc classification and duplicate detection.
pub const GEOMETRY_TOL: f64 = 1e-12;

/// Boundary segment of the quarter disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// Γ1: the `x2 = 0` edge.
    Horizontal,
    /// Γ2: the `x1 = 0` edge.
    Vertical,
    /// Γ3: the circular arc (or any other boundary piece of a general polygon).
    Arc,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 3] = [BoundaryTag::Horizontal, BoundaryTag::Vertical, BoundaryTag::Arc];

    pub fn code(self) -> u8 {
        match self {
            BoundaryTag::Horizontal => 1,
            BoundaryTag::Vertical => 2,
            BoundaryTag::Arc => 3,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(BoundaryTag::Horizontal),
            2 => Some(BoundaryTag::Vertical),
            3 => Some(BoundaryTag::Arc),
            _ => None,
        }
    }

    pub(crate) fn index(self) -> usize {
        self.code() as usize - 1
    }

    /// Tag rule: Γ1 if both endpoints have `x2 < tol`, Γ2 if both have `x1 < tol`, else Γ3.
    pub fn classify(a: Point, b: Point) -> Self {
        if a[1] < GEOMETRY_TOL && b[1] < GEOMETRY_TOL {
            BoundaryTag::Horizontal
        } else if a[0] < GEOMETRY_TOL && b[0] < GEOMETRY_TOL {
            BoundaryTag::Vertical
        } else {
            BoundaryTag::Arc
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
}

/// Which record of a mesh an invariant violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Record {
    Vertex(usize),
    Cell(usize),
    BoundaryEdge(usize),
    Whole,
}

#[derive(Debug, Clone)]
pub(crate) struct Violation {
    pub record: Record,
    pub message: String,
}

impl Mesh {
    /// Builds a mesh, checking every invariant.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let mesh = Mesh {
            vertices,
            triangles,
            boundary_edges,
        };
        match mesh.check() {
            None => Ok(mesh),
            Some(v) => Err(Error::validation(v.message)),
        }
    }

    /// Builds a mesh from vertices and cells, deriving and tagging the boundary.
    pub fn from_cells(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let boundary_edges = derive_boundary(&vertices, &triangles);
        Mesh::new(vertices, triangles, boundary_edges)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of cell `t` (positive for counterclockwise orientation).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).sum()
    }

    /// All distinct edges as sorted vertex pairs, in first-seen order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for tri in &self.triangles {
            for (a, b) in tri_edges(tri) {
                let key = sorted(a, b);
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&[a, b]| distance(self.vertices[a], self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Smallest interior angle over all cells, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let p = self.triangle_points(t);
                (0..3)
                    .map(|i| angle_at(p[i], p[(i + 1) % 3], p[(i + 2) % 3]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
            .to_degrees()
    }

    /// Vertex flags: `true` for vertices on some boundary edge.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_vertices()];
        for e in &self.boundary_edges {
            mask[e.vertices[0]] = true;
            mask[e.vertices[1]] = true;
        }
        mask
    }

    pub(crate) fn check(&self) -> Option<Violation> {
        let whole = |message: String| Violation {
            record: Record::Whole,
            message,
        };
        if self.vertices.is_empty() || self.triangles.is_empty() {
            return Some(whole("mesh has no vertices or no cells".into()));
        }
        let nv = self.vertices.len();
        for (i, p) in self.vertices.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Some(Violation {
                    record: Record::Vertex(i),
                    message: format!("vertex {i} has non-finite coordinates"),
                });
            }
        }
        if let Some((i, j)) = find_duplicate_vertex(&self.vertices) {
            return Some(Violation {
                record: Record::Vertex(j),
                message: format!("vertex {j} duplicates vertex {i}"),
            });
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Some(Violation {
                    record: Record::Cell(t),
                    message: format!("cell {t} references a vertex index out of range (nv = {nv})"),
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Some(Violation {
                    record: Record::Cell(t),
                    message: format!("cell {t} repeats a vertex"),
                });
            }
            let area = self.signed_area(t);
            if area <= 0.0 {
                return Some(Violation {
                    record: Record::Cell(t),
                    message: format!("cell {t} is not counterclockwise (signed area {area:.3e})"),
                });
            }
        }

        // Edge -> number of incident cells.
        let mut incidence: HashMap<[usize; 2], usize> = HashMap::new();
        for tri in &self.triangles {
            for (a, b) in tri_edges(tri) {
                *incidence.entry(sorted(a, b)).or_default() += 1;
            }
        }
        if let Some((e, n)) = incidence.iter().find(|(_, &n)| n > 2) {
            return Some(whole(format!("edge {e:?} is shared by {n} cells (non-manifold)")));
        }
        let mut declared: HashMap<[usize; 2], usize> = HashMap::new();
        for (k, be) in self.boundary_edges.iter().enumerate() {
            let [a, b] = be.vertices;
            let key = sorted(a, b);
            if a >= nv || b >= nv || a == b {
                return Some(Violation {
                    record: Record::BoundaryEdge(k),
                    message: format!("boundary edge {k} has invalid vertices ({a}, {b})"),
                });
            }
            match incidence.get(&key) {
                Some(1) => {}
                Some(_) => {
                    return Some(Violation {
                        record: Record::BoundaryEdge(k),
                        message: format!("boundary edge {k} ({a}, {b}) is an interior edge"),
                    })
                }
                None => {
                    return Some(Violation {
                        record: Record::BoundaryEdge(k),
                        message: format!("boundary edge {k} ({a}, {b}) is dangling: no cell contains it"),
                    })
                }
            }
            if let Some(prev) = declared.insert(key, k) {
                return Some(Violation {
                    record: Record::BoundaryEdge(k),
                    message: format!("boundary edge {k} repeats boundary edge {prev}"),
                });
            }
        }
        let missing = incidence
            .iter()
            .filter(|(key, &n)| n == 1 && !declared.contains_key(*key))
            .map(|(key, _)| *key)
            .min();
        if let Some(key) = missing {
            return Some(whole(format!("edge {key:?} lies on the boundary but carries no tag")));
        }
        None
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn angle_at(p: Point, q: Point, r: Point) -> f64 {
    let u = [q[0] - p[0], q[1] - p[1]];
    let v = [r[0] - p[0], r[1] - p[1]];
    let cross = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1];
    cross.abs().atan2(dot)
}

pub(crate) fn sorted(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

pub(crate) fn tri_edges(tri: &[usize; 3]) -> [(usize, usize); 3] {
    [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
}

/// Boundary edges (oriented as in their cell) tagged by [`BoundaryTag::classify`],
/// sorted by vertex pair.
pub(crate) fn derive_boundary(vertices: &[Point], triangles: &[[usize; 3]]) -> Vec<BoundaryEdge> {
    let mut incidence: HashMap<[usize; 2], (usize, [usize; 2])> = HashMap::new();
    for tri in triangles {
        for (a, b) in tri_edges(tri) {
            let entry = incidence.entry(sorted(a, b)).or_insert((0, [a, b]));
            entry.0 += 1;
        }
    }
    let mut edges: Vec<BoundaryEdge> = incidence
        .into_iter()
        .filter(|(_, (n, _))| *n == 1)
        .map(|(_, (_, [a, b]))| BoundaryEdge {
            vertices: [a, b],
            tag: BoundaryTag::classify(vertices[a], vertices[b]),
        })
        .collect();
    edges.sort_by_key(|e| (e.tag, sorted(e.vertices[0], e.vertices[1])));
    edges
}

fn find_duplicate_vertex(vertices: &[Point]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&i, &j| vertices[i][0].total_cmp(&vertices[j][0]).then(i.cmp(&j)));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if vertices[j][0] - vertices[i][0] > GEOMETRY_TOL {
                break;
            }
            if (vertices[j][1] - vertices[i][1]).abs() <= GEOMETRY_TOL {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}
