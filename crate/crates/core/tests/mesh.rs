use proptest::prelude::*;
use sqrtdiff::mesh::{generate_quarter_disk, load_mesh, parse_mesh, save_mesh, write_mesh, BoundaryTag, Mesh};
use sqrtdiff::ErrorKind;

fn structured_square(n: usize, jitter: &[f64]) -> Mesh {
    let h = 1.0 / n as f64;
    let mut vertices = vec![];
    for j in 0..=n {
        for i in 0..=n {
            let interior = i > 0 && i < n && j > 0 && j < n;
            let (dx, dy) = if interior {
                let k = (j * (n + 1) + i) % jitter.len();
                (0.1 * h * jitter[k], 0.1 * h * jitter[(k + 1) % jitter.len()])
            } else {
                (0.0, 0.0)
            };
            vertices.push([i as f64 * h + dx, j as f64 * h + dy]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = vec![];
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_cells(vertices, triangles).unwrap()
}

proptest! {
    #[test]
    fn save_load_round_trip(n in 1usize..6, jitter in prop::collection::vec(-1.0f64..1.0, 1..20)) {
        let mesh = structured_square(n, &jitter);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        save_mesh(&mesh, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        prop_assert_eq!(back.vertices(), mesh.vertices());
        prop_assert_eq!(back.triangles(), mesh.triangles());
        prop_assert_eq!(back.boundary_edges(), mesh.boundary_edges());
    }

    #[test]
    fn area_is_partitioned(n in 1usize..8, jitter in prop::collection::vec(-1.0f64..1.0, 1..20)) {
        let mesh = structured_square(n, &jitter);
        prop_assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        prop_assert_eq!(mesh.boundary_edges().len(), 4 * n);
    }
}

#[test]
fn generated_levels() {
    let mut prev = 0;
    for level in 1..=3 {
        let mesh = generate_quarter_disk(level).unwrap();
        assert!(mesh.n_vertices() > prev);
        prev = mesh.n_vertices();
        let area = mesh.total_area();
        assert!(area < std::f64::consts::FRAC_PI_4 && area > 0.99 * std::f64::consts::FRAC_PI_4);
        for e in mesh.boundary_edges() {
            let [a, b] = e.vertices.map(|v| mesh.vertices()[v]);
            match e.tag {
                BoundaryTag::Horizontal => assert!(a[1] == 0.0 && b[1] == 0.0),
                BoundaryTag::Vertical => assert!(a[0] == 0.0 && b[0] == 0.0),
                BoundaryTag::Arc => {
                    for p in [a, b] {
                        assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
        let text = write_mesh(&mesh);
        let back = parse_mesh(&text, "gen".as_ref()).unwrap();
        assert_eq!(back.triangles(), mesh.triangles());
    }
}

#[test]
fn corrupt_files_are_validation_errors() {
    let mesh = generate_quarter_disk(1).unwrap();
    let text = write_mesh(&mesh);
    let truncated: String = text.lines().take(50).map(|l| format!("{l}\n")).collect();
    assert_eq!(parse_mesh(&truncated, "t".as_ref()).unwrap_err().kind(), ErrorKind::Validation);
    assert_eq!(load_mesh("/no/such/mesh").unwrap_err().kind(), ErrorKind::Config);
}
