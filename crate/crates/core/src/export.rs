//! VTK legacy and SVG output.
//!
//! The VTK writer emits an ASCII unstructured grid with arbitrary-polygon
//! cells; hanging vertices appear in the connectivity of the coarse cell so
//! viewers render conforming edges. A minimal reader covers round-trip
//! checks. The SVG writer draws element boundaries with optional fill on a
//! marked subset; output is byte-deterministic.

use crate::mesh::PolygonMesh;
use crate::vec2::Vec2;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("vtk parse: {0}")]
    Parse(String),
}

/// Legacy-format unstructured grid with optional scalar fields.
pub fn write_vtk(
    mesh: &PolygonMesh,
    point_data: Option<(&str, &[f64])>,
    cell_data: Option<(&str, &[f64])>,
) -> String {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str("polyafem unstructured grid\n");
    s.push_str("ASCII\n");
    s.push_str("DATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.n_vertices());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} 0", v.position.x, v.position.y);
    }
    let total: usize = (0..mesh.n_elements()).map(|e| mesh.expanded_loop(e).len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {}", mesh.n_elements(), total);
    for e in 0..mesh.n_elements() {
        let loop_ids = mesh.expanded_loop(e);
        let _ = write!(s, "{}", loop_ids.len());
        for &v in loop_ids {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_elements());
    for _ in 0..mesh.n_elements() {
        s.push_str("7\n"); // VTK_POLYGON
    }
    if let Some((name, values)) = point_data {
        assert_eq!(values.len(), mesh.n_vertices());
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_vertices());
        let _ = writeln!(s, "SCALARS {name} double 1");
        s.push_str("LOOKUP_TABLE default\n");
        for v in values {
            let _ = writeln!(s, "{v}");
        }
    }
    if let Some((name, values)) = cell_data {
        assert_eq!(values.len(), mesh.n_elements());
        let _ = writeln!(s, "CELL_DATA {}", mesh.n_elements());
        let _ = writeln!(s, "SCALARS {name} double 1");
        s.push_str("LOOKUP_TABLE default\n");
        for v in values {
            let _ = writeln!(s, "{v}");
        }
    }
    s
}

/// Parsed VTK content (for round-trip verification).
#[derive(Debug, Default)]
pub struct VtkGrid {
    pub points: Vec<Vec2>,
    pub cells: Vec<Vec<usize>>,
    pub point_data: Option<Vec<f64>>,
    pub cell_data: Option<Vec<f64>>,
}

pub fn read_vtk(text: &str) -> Result<VtkGrid, ExportError> {
    let mut tokens = text
        .lines()
        .skip(2) // header comment + title
        .flat_map(|l| l.split_whitespace())
        .peekable();
    let mut grid = VtkGrid::default();
    let parse_err = |what: &str| ExportError::Parse(format!("expected {what}"));
    while let Some(tok) = tokens.next() {
        match tok {
            "POINTS" => {
                let n: usize =
                    tokens.next().ok_or_else(|| parse_err("count"))?.parse().unwrap_or(0);
                let _dtype = tokens.next();
                for _ in 0..n {
                    let x: f64 = tokens
                        .next()
                        .ok_or_else(|| parse_err("x"))?
                        .parse()
                        .map_err(|e| ExportError::Parse(format!("{e}")))?;
                    let y: f64 = tokens
                        .next()
                        .ok_or_else(|| parse_err("y"))?
                        .parse()
                        .map_err(|e| ExportError::Parse(format!("{e}")))?;
                    let _z = tokens.next();
                    grid.points.push(Vec2::new(x, y));
                }
            }
            "CELLS" => {
                let m: usize =
                    tokens.next().ok_or_else(|| parse_err("count"))?.parse().unwrap_or(0);
                let _total = tokens.next();
                for _ in 0..m {
                    let k: usize = tokens
                        .next()
                        .ok_or_else(|| parse_err("cell size"))?
                        .parse()
                        .map_err(|e| ExportError::Parse(format!("{e}")))?;
                    let mut cell = Vec::with_capacity(k);
                    for _ in 0..k {
                        cell.push(
                            tokens
                                .next()
                                .ok_or_else(|| parse_err("vertex id"))?
                                .parse()
                                .map_err(|e| ExportError::Parse(format!("{e}")))?,
                        );
                    }
                    grid.cells.push(cell);
                }
            }
            "POINT_DATA" | "CELL_DATA" => {
                let n: usize =
                    tokens.next().ok_or_else(|| parse_err("count"))?.parse().unwrap_or(0);
                // SCALARS <name> double 1 / LOOKUP_TABLE default
                for _ in 0..6 {
                    tokens.next();
                }
                let mut values = Vec::with_capacity(n);
                for _ in 0..n {
                    values.push(
                        tokens
                            .next()
                            .ok_or_else(|| parse_err("scalar"))?
                            .parse()
                            .map_err(|e| ExportError::Parse(format!("{e}")))?,
                    );
                }
                if tok == "POINT_DATA" {
                    grid.point_data = Some(values);
                } else {
                    grid.cell_data = Some(values);
                }
            }
            _ => {}
        }
    }
    Ok(grid)
}

const SVG_SIZE: f64 = 800.0;
const SVG_MARGIN: f64 = 10.0;

/// Deterministic mesh image; `highlight` fills the given elements.
pub fn write_svg(mesh: &PolygonMesh, highlight: Option<&[usize]>) -> String {
    let positions: Vec<Vec2> = mesh.vertices().iter().map(|v| v.position).collect();
    let (lo, hi) = crate::mesh::bounding_box(&positions);
    let extent = (hi.x - lo.x).max(hi.y - lo.y).max(1e-300);
    let scale = (SVG_SIZE - 2.0 * SVG_MARGIN) / extent;
    let width = (hi.x - lo.x) * scale + 2.0 * SVG_MARGIN;
    let height = (hi.y - lo.y) * scale + 2.0 * SVG_MARGIN;
    let map = |p: Vec2| -> (f64, f64) {
        ((p.x - lo.x) * scale + SVG_MARGIN, (hi.y - p.y) * scale + SVG_MARGIN)
    };
    let mut marked = vec![false; mesh.n_elements()];
    if let Some(ids) = highlight {
        for &id in ids {
            marked[id] = true;
        }
    }
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width:.2} {height:.2}\" width=\"{width:.0}\" height=\"{height:.0}\">"
    );
    let _ = writeln!(s, "<g stroke=\"#333333\" stroke-width=\"0.7\">");
    for e in 0..mesh.n_elements() {
        let fill = if marked[e] { "#f4a742" } else { "none" };
        let _ = write!(s, "<polygon fill=\"{fill}\" points=\"");
        for (k, &v) in mesh.elements()[e].vertex_ids.iter().enumerate() {
            let (x, y) = map(mesh.position(v));
            if k > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{x:.3},{y:.3}");
        }
        s.push_str("\"/>\n");
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_initial_mesh, Domain, MeshStyle, PolygonMesh};

    #[test]
    fn vtk_round_trip_grid() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Grid, 2, 0).unwrap();
        let text = write_vtk(&mesh, None, None);
        let grid = read_vtk(&text).unwrap();
        assert_eq!(grid.points.len(), 9);
        assert_eq!(grid.cells.len(), 4);
        for (e, cell) in grid.cells.iter().enumerate() {
            assert_eq!(cell, mesh.expanded_loop(e));
        }
    }

    #[test]
    fn vtk_includes_hanging_vertex_in_coarse_cell() {
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, 0.5),
            Vec2::new(2.0, 0.5),
        ];
        let elements = vec![vec![0, 1, 2, 3], vec![1, 4, 7, 6], vec![6, 7, 5, 2]];
        let mesh = PolygonMesh::build_topology(vertices, elements).unwrap();
        let text = write_vtk(&mesh, None, None);
        let grid = read_vtk(&text).unwrap();
        assert_eq!(grid.points.len(), 8);
        // the coarse square lists the hanging vertex 6 in its connectivity
        assert_eq!(grid.cells[0], vec![0, 1, 6, 2, 3]);
    }

    #[test]
    fn vtk_scalar_fields_round_trip() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Grid, 2, 0).unwrap();
        let pd: Vec<f64> = (0..mesh.n_vertices()).map(|v| v as f64 * 0.5).collect();
        let cd: Vec<f64> = (0..mesh.n_elements()).map(|e| e as f64).collect();
        let text = write_vtk(&mesh, Some(("solution", &pd)), Some(("eta_sq", &cd)));
        let grid = read_vtk(&text).unwrap();
        assert_eq!(grid.point_data.as_deref(), Some(&pd[..]));
        assert_eq!(grid.cell_data.as_deref(), Some(&cd[..]));
    }

    #[test]
    fn svg_deterministic_and_counts_polygons() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Grid, 2, 0).unwrap();
        let a = write_svg(&mesh, None);
        let b = write_svg(&mesh, None);
        assert_eq!(a, b);
        assert_eq!(a.matches("<polygon").count(), 4);
        let marked = write_svg(&mesh, Some(&[1]));
        assert_eq!(marked.matches("fill=\"#f4a742\"").count(), 1);
    }
}
