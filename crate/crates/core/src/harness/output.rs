//! CSV, VTK legacy and MatrixMarket writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ErrorReport;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::schemes::Trajectory;
use crate::sparse::CsrMatrix;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_owned(),
        source: std::io::Error::other(e),
    }
}

/// Header of [`reports_csv`].
pub const REPORT_COLUMNS: [&str; 14] = [
    "grid",
    "n_vertices",
    "scheme",
    "mu",
    "sigma",
    "n_steps",
    "tau",
    "k_pseudo",
    "integrator",
    "eps2",
    "eps_inf",
    "cg_iterations",
    "pseudo_iterations",
    "wall_time_s",
];

/// One row per report. Floats use `{:e}` (shortest round-trip form).
pub fn reports_csv(reports: &[ErrorReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    let map = |e: csv::Error| Error::Io {
        path: "<memory>".into(),
        source: std::io::Error::other(e),
    };
    w.write_record(REPORT_COLUMNS).map_err(map)?;
    for r in reports {
        w.write_record([
            r.grid.clone(),
            r.n_vertices.to_string(),
            r.scheme.clone(),
            format!("{:e}", r.mu),
            format!("{:e}", r.sigma),
            r.n_steps.to_string(),
            format!("{:e}", r.tau),
            r.k_pseudo.to_string(),
            r.integrator.clone(),
            format!("{:e}", r.eps2),
            format!("{:e}", r.eps_inf),
            r.cg_iterations.to_string(),
            r.pseudo_iterations.to_string(),
            format!("{:.3}", r.wall_time_s),
        ])
        .map_err(map)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: "<memory>".into(),
        source: std::io::Error::other(e.to_string()),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_reports_csv(reports: &[ErrorReport], path: &Path) -> Result<()> {
    fs::write(path, reports_csv(reports)?).map_err(io_err(path))
}

/// Columns `n, t, m_norm, g_norm, cg_iterations, pseudo_iterations`; `g_norm` empty without an oracle.
pub fn write_trajectory_csv(traj: &Trajectory<f64>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["n", "t", "m_norm", "g_norm", "cg_iterations", "pseudo_iterations"])
        .map_err(csv_err(path))?;
    for (n, (t, d)) in traj.times.iter().zip(&traj.diagnostics).enumerate() {
        w.write_record([
            n.to_string(),
            format!("{t:e}"),
            format!("{:e}", d.m_norm),
            d.g_norm.map(|g| format!("{g:e}")).unwrap_or_default(),
            d.cg_iterations.to_string(),
            d.pseudo_iterations.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Legacy ASCII VTK unstructured grid with nodal scalar fields.
pub fn vtk_string(mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<String> {
    let n = mesh.n_vertices();
    for (name, f) in fields {
        if f.len() != n {
            return Err(Error::InvalidArgument(format!(
                "field `{name}` has {} values for {n} vertices",
                f.len()
            )));
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\nsqrtdiff solution\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
    }
    let nt = mesh.n_triangles();
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
        for (name, f) in fields {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in *f {
                let _ = writeln!(s, "{v:e}");
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(mesh: &Mesh, fields: &[(&str, &[f64])], path: &Path) -> Result<()> {
    fs::write(path, vtk_string(mesh, fields)?).map_err(io_err(path))
}

/// Writes `name.mtx` for each matrix into `dir` (created if missing).
pub fn dump_matrices(dir: &Path, matrices: &[(&str, &CsrMatrix<f64>)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, m) in matrices {
        let path = dir.join(format!("{name}.mtx"));
        fs::write(&path, m.to_matrix_market()).map_err(io_err(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_quarter_disk;

    #[test]
    fn vtk_layout() {
        let mesh = generate_quarter_disk(1).unwrap();
        let f = vec![1.0; mesh.n_vertices()];
        let s = vtk_string(&mesh, &[("u", &f)]).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(s.contains(&format!("POINTS {} double", mesh.n_vertices())));
        assert!(s.contains(&format!("CELLS {} {}", mesh.n_triangles(), 4 * mesh.n_triangles())));
        assert!(s.contains("SCALARS u double 1"));
        assert!(vtk_string(&mesh, &[("u", &f[1..])]).is_err());
    }
}
