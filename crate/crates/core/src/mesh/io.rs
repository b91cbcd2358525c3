//! Plain-text mesh format.
//!
//! ```text
//! nv nt nb
//! x y          # nv lines
//! i j k        # nt lines, 0-based, counterclockwise
//! i j tag      # nb lines, tag in {1, 2, 3}
//! ```
//!
//! Tokens are whitespace separated and `#` starts a comment.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BoundaryEdge, BoundaryTag, Mesh, Record};
use crate::error::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_mesh(&text, path)
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_mesh(mesh)).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Serializes with 17 significant digits so coordinates round-trip exactly.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {}",
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.boundary_edges().len()
    );
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:.16e} {:.16e}", p[0], p[1]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    for e in mesh.boundary_edges() {
        let _ = writeln!(out, "{} {} {}", e.vertices[0], e.vertices[1], e.tag);
    }
    out
}

struct Line<'a> {
    number: usize,
    tokens: Vec<&'a str>,
}

pub fn parse_mesh(text: &str, path: &Path) -> Result<Mesh> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        (!tokens.is_empty()).then_some(Line { number: i + 1, tokens })
    });

    let header = lines.next().ok_or_else(|| parse_err(1, "missing header `nv nt nb`".into()))?;
    let counts = int_fields::<usize>(&header, 3).map_err(|m| parse_err(header.number, m))?;
    let (nv, nt, nb) = (counts[0], counts[1], counts[2]);

    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| parse_err(text.lines().count(), format!("unexpected end of file while reading {what}")))
    };

    let mut vertices = Vec::with_capacity(nv);
    let mut vertex_lines = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = next("vertices")?;
        if line.tokens.len() != 2 {
            return Err(parse_err(line.number, format!("vertex {i}: expected `x y`")));
        }
        let mut xy = [0.0; 2];
        for (slot, tok) in xy.iter_mut().zip(&line.tokens) {
            *slot = tok
                .parse::<f64>()
                .map_err(|_| parse_err(line.number, format!("vertex {i}: bad coordinate `{tok}`")))?;
        }
        vertices.push(xy);
        vertex_lines.push(line.number);
    }

    let mut triangles = Vec::with_capacity(nt);
    let mut cell_lines = Vec::with_capacity(nt);
    for t in 0..nt {
        let line = next("cells")?;
        let v = int_fields::<usize>(&line, 3).map_err(|m| parse_err(line.number, format!("cell {t}: {m}")))?;
        triangles.push([v[0], v[1], v[2]]);
        cell_lines.push(line.number);
    }

    let mut boundary = Vec::with_capacity(nb);
    let mut edge_lines = Vec::with_capacity(nb);
    for k in 0..nb {
        let line = next("boundary edges")?;
        let v = int_fields::<i64>(&line, 3).map_err(|m| parse_err(line.number, format!("boundary edge {k}: {m}")))?;
        let tag = BoundaryTag::from_code(v[2]).ok_or_else(|| Error::Validation {
            line: Some(line.number),
            message: format!("boundary edge {k}: unknown tag {}", v[2]),
        })?;
        if v[0] < 0 || v[1] < 0 {
            return Err(parse_err(line.number, format!("boundary edge {k}: negative vertex index")));
        }
        boundary.push(BoundaryEdge {
            vertices: [v[0] as usize, v[1] as usize],
            tag,
        });
        edge_lines.push(line.number);
    }
    if let Some(extra) = lines.next() {
        return Err(parse_err(extra.number, "trailing data after the declared records".into()));
    }

    let mesh = Mesh {
        vertices,
        triangles,
        boundary_edges: boundary,
    };
    if let Some(v) = mesh.check() {
        let line = match v.record {
            Record::Vertex(i) => Some(vertex_lines[i]),
            Record::Cell(t) => Some(cell_lines[t]),
            Record::BoundaryEdge(k) => Some(edge_lines[k]),
            Record::Whole => None,
        };
        return Err(Error::Validation { line, message: v.message });
    }
    Ok(mesh)
}

fn int_fields<I: std::str::FromStr>(line: &Line<'_>, count: usize) -> std::result::Result<Vec<I>, String> {
    if line.tokens.len() != count {
        return Err(format!("expected {count} integers, found {} fields", line.tokens.len()));
    }
    line.tokens
        .iter()
        .map(|t| t.parse::<I>().map_err(|_| format!("bad integer `{t}`")))
        .collect()
}
