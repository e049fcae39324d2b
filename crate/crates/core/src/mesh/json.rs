//! Mesh file format (JSON).
//!
//! `{"elements": [[v0,v1,...],...], "hanging": [[child,parentA,parentB],...],
//!   "vertices": [[x,y],...]}`
//!
//! The writer is byte-deterministic: keys sorted, coordinates with 17
//! significant digits. The reader rebuilds the topology and cross-checks the
//! declared hanging vertices against geometric detection.

use super::{MeshError, PolygonMesh, VertexKind};
use crate::vec2::Vec2;
use serde::Deserialize;

#[derive(Deserialize)]
struct MeshFile {
    vertices: Vec<[f64; 2]>,
    elements: Vec<Vec<usize>>,
    #[serde(default)]
    hanging: Vec<[usize; 3]>,
}

/// Serializes a mesh; byte-identical output for identical meshes.
pub fn write_mesh_json(mesh: &PolygonMesh) -> String {
    let mut s = String::with_capacity(64 * mesh.n_vertices());
    s.push_str("{\"elements\":[");
    for (i, el) in mesh.elements().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push('[');
        for (k, v) in el.vertex_ids.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            s.push_str(&v.to_string());
        }
        s.push(']');
    }
    s.push_str("],\"hanging\":[");
    let mut first = true;
    for v in mesh.vertices() {
        if let VertexKind::Hanging { parents } = v.kind {
            if !first {
                s.push(',');
            }
            first = false;
            s.push_str(&format!("[{},{},{}]", v.id, parents[0], parents[1]));
        }
    }
    s.push_str("],\"vertices\":[");
    for (i, v) in mesh.vertices().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&format!("[{:.16e},{:.16e}]", v.position.x, v.position.y));
    }
    s.push_str("]}");
    s
}

/// Parses and fully validates a mesh file.
pub fn read_mesh_json(text: &str) -> Result<PolygonMesh, MeshError> {
    let file: MeshFile =
        serde_json::from_str(text).map_err(|e| MeshError::Json(e.to_string()))?;
    let vertices: Vec<Vec2> = file.vertices.iter().map(|&[x, y]| Vec2::new(x, y)).collect();
    let mesh = PolygonMesh::build_topology(vertices, file.elements)?;
    // declared hanging relations must match geometric detection
    let mut declared: Vec<[usize; 3]> = file
        .hanging
        .iter()
        .map(|&[c, a, b]| [c, a.min(b), a.max(b)])
        .collect();
    declared.sort_unstable();
    let mut detected: Vec<[usize; 3]> = mesh
        .vertices()
        .iter()
        .filter_map(|v| match v.kind {
            VertexKind::Hanging { parents } => Some([v.id, parents[0], parents[1]]),
            VertexKind::Regular => None,
        })
        .collect();
    detected.sort_unstable();
    if declared != detected {
        return Err(MeshError::Json(format!(
            "hanging list mismatch: file declares {declared:?}, topology detects {detected:?}"
        )));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_initial_mesh, Domain, MeshStyle};

    #[test]
    fn round_trip_grid() {
        let mesh = generate_initial_mesh(Domain::LShape, MeshStyle::Grid, 2, 0).unwrap();
        let text = write_mesh_json(&mesh);
        let back = read_mesh_json(&text).unwrap();
        assert_eq!(write_mesh_json(&back), text);
    }

    #[test]
    fn round_trip_with_hanging_vertex() {
        let vertices = vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [2.0, 0.0],
            [2.0, 1.0],
            [1.0, 0.5],
            [2.0, 0.5],
        ];
        let text = format!(
            "{{\"elements\":[[0,1,2,3],[1,4,7,6],[6,7,5,2]],\"hanging\":[[6,1,2]],\"vertices\":{}}}",
            serde_json::to_string(&vertices).unwrap()
        );
        let mesh = read_mesh_json(&text).unwrap();
        assert!(mesh.is_hanging(6));
        let out = write_mesh_json(&mesh);
        let back = read_mesh_json(&out).unwrap();
        assert_eq!(write_mesh_json(&back), out);
    }

    #[test]
    fn wrong_hanging_list_rejected() {
        let text = "{\"elements\":[[0,1,2,3]],\"hanging\":[[1,0,2]],\"vertices\":[[0.0,0.0],[1.0,0.0],[1.0,1.0],[0.0,1.0]]}";
        assert!(read_mesh_json(text).is_err());
    }
}
