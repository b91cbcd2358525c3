use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use super::{derive_boundary, signed_area, sorted, tri_edges, Mesh, Point};
use crate::error::{Error, Result};

/// Supported refinement levels for [`generate_quarter_disk`].
pub const QUARTER_DISK_LEVELS: std::ops::RangeInclusive<u32> = 1..=4;

/// Number of radial layers at level 1; each level doubles it.
const BASE_RINGS: usize = 10;

/// Triangulates `{x1, x2 >= 0, x1^2 + x2^2 <= 1}`.
///
/// Vertices sit on concentric rings at radii `i / L` with `2 i` angular
/// segments on ring `i`, so arc-length spacing is uniform. Neighbouring rings
/// are stitched by an angular sweep and the result is made Delaunay by edge
/// flips. Level `l` uses `L = 10 * 2^(l-1)` rings (121, 441, 1681, 6561 vertices).
pub fn generate_quarter_disk(level: u32) -> Result<Mesh> {
    if !QUARTER_DISK_LEVELS.contains(&level) {
        return Err(Error::InvalidArgument(format!(
            "refinement level must be in {}..={}, got {level}",
            QUARTER_DISK_LEVELS.start(),
            QUARTER_DISK_LEVELS.end()
        )));
    }
    let rings = BASE_RINGS << (level - 1);
    let (vertices, ring_index) = ring_vertices(rings);
    let mut triangles = stitch_rings(&vertices, &ring_index);
    delaunay_flip(&vertices, &mut triangles);
    let boundary = derive_boundary(&vertices, &triangles);
    Mesh::new(vertices, triangles, boundary)
}

/// Returns the vertex list and, per ring, the vertex indices ordered by angle.
fn ring_vertices(rings: usize) -> (Vec<Point>, Vec<Vec<usize>>) {
    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_index = vec![vec![0]];
    for i in 1..=rings {
        let segments = 2 * i;
        let radius = i as f64 / rings as f64;
        let mut ids = Vec::with_capacity(segments + 1);
        for j in 0..=segments {
            let p = if j == 0 {
                [radius, 0.0]
            } else if j == segments {
                [0.0, radius]
            } else {
                let theta = FRAC_PI_2 * j as f64 / segments as f64;
                [radius * theta.cos(), radius * theta.sin()]
            };
            ids.push(vertices.len());
            vertices.push(p);
        }
        ring_index.push(ids);
    }
    (vertices, ring_index)
}

fn polar_angle(p: Point) -> f64 {
    p[1].atan2(p[0])
}

fn stitch_rings(vertices: &[Point], rings: &[Vec<usize>]) -> Vec<[usize; 3]> {
    let mut triangles = Vec::new();
    for pair in rings.windows(2) {
        let (inner, outer) = (&pair[0], &pair[1]);
        if inner.len() == 1 {
            for w in outer.windows(2) {
                triangles.push([inner[0], w[0], w[1]]);
            }
            continue;
        }
        let (mut p, mut q) = (0, 0);
        while p + 1 < inner.len() || q + 1 < outer.len() {
            let advance_outer = q + 1 < outer.len()
                && (p + 1 == inner.len()
                    || polar_angle(vertices[outer[q + 1]]) <= polar_angle(vertices[inner[p + 1]]) + 1e-14);
            if advance_outer {
                triangles.push([inner[p], outer[q], outer[q + 1]]);
                q += 1;
            } else {
                triangles.push([inner[p], outer[q], inner[p + 1]]);
                p += 1;
            }
        }
    }
    triangles
}

/// Positive when `d` lies strictly inside the circumcircle of CCW triangle `abc`.
fn in_circle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

/// Lawson flipping until every interior edge is locally Delaunay.
fn delaunay_flip(vertices: &[Point], triangles: &mut [[usize; 3]]) {
    let scale = {
        let h = vertices.iter().fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()));
        h.max(1.0).powi(4)
    };
    // Relative tolerance keeps nearly cocircular quads (common on rings) from cycling.
    let tol = 1e-10 * scale;
    for _pass in 0..100 {
        let mut owner: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for (a, b) in tri_edges(tri) {
                owner.entry(sorted(a, b)).or_default().push(t);
            }
        }
        let mut interior: Vec<([usize; 2], usize, usize)> = owner
            .into_iter()
            .filter(|(_, ts)| ts.len() == 2)
            .map(|(e, ts)| (e, ts[0], ts[1]))
            .collect();
        interior.sort_unstable();

        let mut touched = vec![false; triangles.len()];
        let mut flips = 0;
        for ([u, v], t1, t2) in interior {
            if touched[t1] || touched[t2] {
                continue;
            }
            // Rotate so that t1 = (a, b, c) with edge a -> b and t2 contains b -> a.
            let (a, b, c) = match oriented(&triangles[t1], u, v) {
                Some(abc) => abc,
                None => continue,
            };
            let d = match opposite(&triangles[t2], a, b) {
                Some(d) => d,
                None => continue,
            };
            let [pa, pb, pc, pd] = [vertices[a], vertices[b], vertices[c], vertices[d]];
            if in_circle(pa, pb, pc, pd) <= tol {
                continue;
            }
            if signed_area(pa, pd, pc) <= 0.0 || signed_area(pd, pb, pc) <= 0.0 {
                continue;
            }
            triangles[t1] = [a, d, c];
            triangles[t2] = [d, b, c];
            touched[t1] = true;
            touched[t2] = true;
            flips += 1;
        }
        if flips == 0 {
            return;
        }
    }
}

/// For a triangle containing edge {u, v}, returns (a, b, c) with a -> b in CCW order.
fn oriented(tri: &[usize; 3], u: usize, v: usize) -> Option<(usize, usize, usize)> {
    (0..3).find_map(|i| {
        let (a, b, c) = (tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]);
        ((a == u && b == v) || (a == v && b == u)).then_some((a, b, c))
    })
}

/// Third vertex of a triangle that traverses b -> a.
fn opposite(tri: &[usize; 3], a: usize, b: usize) -> Option<usize> {
    (0..3).find_map(|i| (tri[i] == b && tri[(i + 1) % 3] == a).then_some(tri[(i + 2) % 3]))
}
