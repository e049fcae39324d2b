//! Polygonal mesh data model.
//!
//! A mesh is a set of convex CCW elements given by their corner vertices.
//! Edges are stored at the finest (facet) level: a coarse element whose
//! geometric edge carries a hanging vertex contributes two facets along that
//! edge. A built mesh is immutable; refinement produces a new mesh value.

mod generate;
mod json;
mod regularity;

pub use generate::{generate_initial_mesh, Domain, MeshStyle};
pub use json::{read_mesh_json, write_mesh_json};
pub use regularity::{polygon_shape, ElementShape, RegularityReport};

use crate::vec2::Vec2;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

/// Largest supported corner count per element.
pub const MAX_POLY_VERTS: usize = 24;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("element {0} is not strictly convex")]
    NonConvexElement(usize),
    #[error("element {0} is not counterclockwise (non-positive area)")]
    OrientationError(usize),
    #[error("edge ({0}, {1}) carries more than one hanging vertex")]
    TwoHangingNodesOnEdge(usize, usize),
    #[error("vertex {0} is not referenced by any element")]
    DanglingVertex(usize),
    #[error("element {element} references invalid vertex id {vertex}")]
    InvalidVertexId { element: usize, vertex: usize },
    #[error("element {0} has fewer than 3 or more than {MAX_POLY_VERTS} corners")]
    BadCornerCount(usize),
    #[error("hanging vertex {0} is not at the midpoint of its carrier edge")]
    HangingNotMidpoint(usize),
    #[error("sub-edge ({0}, {1}) is shared by more than two elements")]
    NonManifoldEdge(usize, usize),
    #[error("hanging vertex {0} lies on the domain boundary")]
    HangingOnBoundary(usize),
    #[error("degenerate cell produced by the mesh generator (area {0:.3e})")]
    DegenerateCell(f64),
    #[error("generated mesh violates the regularity contract (C1={c1:.3}, C2={c2:.4})")]
    GeneratorRegularity { c1: f64, c2: f64 },
    #[error("mesh json: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Regular,
    /// Lies at the midpoint of the (still coarse) edge joining its parents.
    Hanging { parents: [usize; 2] },
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub id: usize,
    pub position: Vec2,
    pub kind: VertexKind,
}

#[derive(Clone, Debug)]
pub struct Element {
    pub id: usize,
    /// Corner vertex ids in counterclockwise order. Hanging vertices sitting
    /// on this element's edges are not corners; see `PolygonMesh::expanded_loop`.
    pub vertex_ids: Vec<usize>,
    pub refinement_level: u32,
}

/// One side of a facet: the element and the corner edge the facet lies on.
#[derive(Clone, Copy, Debug)]
pub struct FacetSide {
    pub element: usize,
    /// Corner edge index `k`: the edge from corner `k` to corner `k+1` (mod n).
    pub corner_edge: usize,
}

/// A maximal straight sub-segment of element boundaries shared by exactly two
/// elements, or by one element and the domain boundary.
#[derive(Clone, Debug)]
pub struct Facet {
    pub id: usize,
    pub endpoints: [usize; 2],
    pub side_plus: FacetSide,
    pub side_minus: Option<FacetSide>,
    /// Unit normal oriented from `side_plus` towards `side_minus`.
    pub unit_normal: Vec2,
    pub length: f64,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.side_minus.is_none()
    }
}

/// Per-element geometric quantities used throughout basis evaluation,
/// quadrature, and the regularity report.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub corners: Vec<Vec2>,
    /// Outward unit normal of edge `i = [corner_i, corner_{i+1}]`.
    pub normals: Vec<Vec2>,
    /// `M_i = n_{i-1} x n_i`; in (0, 1] for a strictly convex CCW polygon.
    pub normal_cross: Vec<f64>,
    pub edge_lengths: Vec<f64>,
    /// Diameter (largest corner-to-corner distance).
    pub diameter: f64,
    pub area: f64,
    /// Area centroid (used as fan apex for quadrature).
    pub centroid: Vec2,
    /// Arithmetic mean of the corners (cell center of the refinement rule).
    pub vertex_mean: Vec2,
    /// Row-major `n x n` table of distances from corner `k` to edge line `j`.
    pub corner_edge_distance: Vec<f64>,
}

/// Geometry violations found while building an element; mapped onto
/// `MeshError` with the element id by the mesh builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeDefect {
    TooFewOrManyCorners,
    NotCcw,
    NotStrictlyConvex,
}

impl ElementGeometry {
    /// Builds the geometry cache, verifying strict convexity and CCW order.
    ///
    /// Convexity uses the cross-product threshold `1e-12 * h_T^2`.
    pub fn from_corners(corners: Vec<Vec2>) -> Result<Self, ShapeDefect> {
        let n = corners.len();
        if !(3..=MAX_POLY_VERTS).contains(&n) {
            return Err(ShapeDefect::TooFewOrManyCorners);
        }
        let mut area2 = 0.0;
        for i in 0..n {
            let a = corners[i];
            let b = corners[(i + 1) % n];
            area2 += a.cross(b);
        }
        if area2 <= 0.0 {
            return Err(ShapeDefect::NotCcw);
        }
        let mut diameter = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                diameter = diameter.max(corners[i].dist(corners[j]));
            }
        }
        let cross_tol = 1e-12 * diameter * diameter;
        for i in 0..n {
            let a = corners[i];
            let b = corners[(i + 1) % n];
            let c = corners[(i + 2) % n];
            if (b - a).cross(c - b) <= cross_tol {
                return Err(ShapeDefect::NotStrictlyConvex);
            }
        }
        let mut normals = Vec::with_capacity(n);
        let mut edge_lengths = Vec::with_capacity(n);
        for i in 0..n {
            let e = corners[(i + 1) % n] - corners[i];
            edge_lengths.push(e.norm());
            normals.push(e.perp_cw().normalized());
        }
        let mut normal_cross = Vec::with_capacity(n);
        for i in 0..n {
            let prev = normals[(i + n - 1) % n];
            normal_cross.push(prev.cross(normals[i]));
        }
        let area = 0.5 * area2;
        // area centroid via the standard shoelace moments
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let a = corners[i];
            let b = corners[(i + 1) % n];
            let w = a.cross(b);
            cx += (a.x + b.x) * w;
            cy += (a.y + b.y) * w;
        }
        let centroid = Vec2::new(cx / (3.0 * area2), cy / (3.0 * area2));
        let mut mean = Vec2::ZERO;
        for c in &corners {
            mean += *c;
        }
        let vertex_mean = mean / n as f64;
        let mut corner_edge_distance = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                corner_edge_distance[k * n + j] = (corners[j] - corners[k]).dot(normals[j]);
            }
        }
        Ok(ElementGeometry {
            corners,
            normals,
            normal_cross,
            edge_lengths,
            diameter,
            area,
            centroid,
            vertex_mean,
            corner_edge_distance,
        })
    }

    pub fn n(&self) -> usize {
        self.corners.len()
    }

    /// Signed distance from `p` to the line of edge `j`; positive inside.
    pub fn edge_distance(&self, j: usize, p: Vec2) -> f64 {
        (self.corners[j] - p).dot(self.normals[j])
    }

    /// Distance from corner `k` to the line of edge `j` (cached).
    pub fn corner_to_edge(&self, k: usize, j: usize) -> f64 {
        self.corner_edge_distance[k * self.n() + j]
    }

    /// Minimum over corners of the distance to non-adjacent edges (`h_*`).
    pub fn clearance(&self) -> f64 {
        let n = self.n();
        let mut best = f64::INFINITY;
        for k in 0..n {
            for j in 0..n {
                if j == k || j == (k + n - 1) % n {
                    continue;
                }
                best = best.min(self.corner_to_edge(k, j));
            }
        }
        best
    }

    /// True if `p` lies in the closed polygon within `tol` (absolute, outward).
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        (0..self.n()).all(|j| self.edge_distance(j, p) >= -tol)
    }

    /// Interior angles at the corners, in radians.
    pub fn interior_angles(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let prev = self.corners[(i + n - 1) % n] - self.corners[i];
                let next = self.corners[(i + 1) % n] - self.corners[i];
                let cos = prev.dot(next) / (prev.norm() * next.norm());
                cos.clamp(-1.0, 1.0).acos()
            })
            .collect()
    }

    /// Diameter of the largest inscribed disk (twice the Chebyshev radius).
    ///
    /// Solves `max r s.t. n_j . x + r <= n_j . a_j` exactly by enumerating
    /// triples of active constraints; with n <= MAX_POLY_VERTS the O(n^3)
    /// sweep is negligible.
    pub fn inscribed_diameter(&self) -> f64 {
        let n = self.n();
        let b: Vec<f64> = (0..n).map(|j| self.normals[j].dot(self.corners[j])).collect();
        let feas_tol = 1e-12 * self.diameter;
        let mut best = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    // solve [n_i 1; n_j 1; n_k 1] (x, r) = (b_i, b_j, b_k)
                    let (ni, nj, nk) = (self.normals[i], self.normals[j], self.normals[k]);
                    let det = ni.x * (nj.y - nk.y) - ni.y * (nj.x - nk.x)
                        + (nj.x * nk.y - nj.y * nk.x);
                    if det.abs() < 1e-14 {
                        continue;
                    }
                    // Cramer's rule on the 3x3 system
                    let d1 = b[i] * (nj.y - nk.y) - ni.y * (b[j] - b[k])
                        + (b[j] * nk.y - nj.y * b[k]);
                    let d2 = ni.x * (b[j] - b[k]) - b[i] * (nj.x - nk.x)
                        + (nj.x * b[k] - b[j] * nk.x);
                    let d3 = ni.x * (nj.y * b[k] - b[j] * nk.y)
                        - ni.y * (nj.x * b[k] - b[j] * nk.x)
                        + b[i] * (nj.x * nk.y - nj.y * nk.x);
                    let x = Vec2::new(d1 / det, d2 / det);
                    let r = d3 / det;
                    if r <= best {
                        continue;
                    }
                    let feasible =
                        (0..n).all(|m| b[m] - self.normals[m].dot(x) >= r - feas_tol);
                    if feasible {
                        best = r;
                    }
                }
            }
        }
        2.0 * best
    }
}

/// An immutable polygonal mesh with facet-level topology.
#[derive(Clone, Debug)]
pub struct PolygonMesh {
    vertices: Vec<Vertex>,
    elements: Vec<Element>,
    facets: Vec<Facet>,
    geometry: Vec<ElementGeometry>,
    /// Per element: the CCW boundary loop with hanging vertices included.
    expanded: Vec<Vec<usize>>,
    /// Per element, per corner edge: the hanging vertex on that edge, if any.
    edge_hanging: Vec<Vec<Option<usize>>>,
    boundary_vertex: Vec<bool>,
    /// Per element, per corner edge: ids of the facets tiling that edge.
    edge_facets: Vec<Vec<Vec<usize>>>,
}

impl PolygonMesh {
    /// Builds the full facet topology from raw vertices and corner lists.
    ///
    /// Hanging vertices are detected geometrically: a vertex interior to
    /// another element's corner edge (distance below `1e-10 h_T`, parameter
    /// strictly inside) is hanging, with the edge endpoints as parents.
    pub fn build_topology(
        vertices: Vec<Vec2>,
        elements: Vec<Vec<usize>>,
    ) -> Result<Self, MeshError> {
        let with_levels = elements.into_iter().map(|v| (v, 0)).collect();
        Self::build_with_levels(vertices, with_levels)
    }

    pub(crate) fn build_with_levels(
        positions: Vec<Vec2>,
        elements_in: Vec<(Vec<usize>, u32)>,
    ) -> Result<Self, MeshError> {
        let n_vertices = positions.len();

        // Element validation + geometry.
        let mut elements = Vec::with_capacity(elements_in.len());
        let mut geometry = Vec::with_capacity(elements_in.len());
        for (id, (ids, level)) in elements_in.into_iter().enumerate() {
            for &v in &ids {
                if v >= n_vertices {
                    return Err(MeshError::InvalidVertexId { element: id, vertex: v });
                }
            }
            let corners: Vec<Vec2> = ids.iter().map(|&v| positions[v]).collect();
            let geo = ElementGeometry::from_corners(corners).map_err(|defect| match defect {
                ShapeDefect::TooFewOrManyCorners => MeshError::BadCornerCount(id),
                ShapeDefect::NotCcw => MeshError::OrientationError(id),
                ShapeDefect::NotStrictlyConvex => MeshError::NonConvexElement(id),
            })?;
            elements.push(Element { id, vertex_ids: ids, refinement_level: level });
            geometry.push(geo);
        }

        // Spatial hash of vertices for hanging-vertex detection.
        let (lo, hi) = bounding_box(&positions);
        let extent = (hi - lo).norm().max(1e-300);
        let cell = (extent / (n_vertices as f64).sqrt().max(1.0)).max(1e-12 * extent);
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let key = |p: Vec2| -> (i64, i64) {
            (((p.x - lo.x) / cell).floor() as i64, ((p.y - lo.y) / cell).floor() as i64)
        };
        for (v, &p) in positions.iter().enumerate() {
            buckets.entry(key(p)).or_default().push(v);
        }

        // Detect hanging vertices per (element, corner edge).
        let mut edge_hanging: Vec<Vec<Option<usize>>> =
            elements.iter().map(|e| vec![None; e.vertex_ids.len()]).collect();
        let mut hanging_parents: BTreeMap<usize, [usize; 2]> = BTreeMap::new();
        for el in &elements {
            let n = el.vertex_ids.len();
            let h_t = geometry[el.id].diameter;
            let dist_tol = 1e-10 * h_t;
            for k in 0..n {
                let u = el.vertex_ids[k];
                let v = el.vertex_ids[(k + 1) % n];
                let (pu, pv) = (positions[u], positions[v]);
                let dir = pv - pu;
                let len_sq = dir.norm_sq();
                let len = len_sq.sqrt();
                let mut found: Vec<usize> = Vec::new();
                let bb_lo = key(Vec2::new(pu.x.min(pv.x) - dist_tol, pu.y.min(pv.y) - dist_tol));
                let bb_hi = key(Vec2::new(pu.x.max(pv.x) + dist_tol, pu.y.max(pv.y) + dist_tol));
                for bx in bb_lo.0..=bb_hi.0 {
                    for by in bb_lo.1..=bb_hi.1 {
                        let Some(cands) = buckets.get(&(bx, by)) else { continue };
                        for &c in cands {
                            if c == u || c == v {
                                continue;
                            }
                            let p = positions[c];
                            let t = (p - pu).dot(dir) / len_sq;
                            if t <= 1e-9 || t >= 1.0 - 1e-9 {
                                continue;
                            }
                            let off = (p - pu) - dir * t;
                            if off.norm() < dist_tol {
                                found.push(c);
                            }
                        }
                    }
                }
                match found.len() {
                    0 => {}
                    1 => {
                        let c = found[0];
                        let mid = pu.midpoint(pv);
                        if positions[c].dist(mid) > 1e-12 * len {
                            return Err(MeshError::HangingNotMidpoint(c));
                        }
                        edge_hanging[el.id][k] = Some(c);
                        let parents = if u < v { [u, v] } else { [v, u] };
                        hanging_parents.insert(c, parents);
                    }
                    _ => return Err(MeshError::TwoHangingNodesOnEdge(u, v)),
                }
            }
        }

        // A hanging vertex's parents must themselves be regular; a hanging
        // parent would imply a second hanging vertex on the coarse edge.
        for (&child, parents) in &hanging_parents {
            for p in parents {
                if hanging_parents.contains_key(p) {
                    return Err(MeshError::TwoHangingNodesOnEdge(child, *p));
                }
            }
        }

        // Vertex kinds.
        let vertices: Vec<Vertex> = positions
            .iter()
            .enumerate()
            .map(|(id, &position)| Vertex {
                id,
                position,
                kind: match hanging_parents.get(&id) {
                    Some(&parents) => VertexKind::Hanging { parents },
                    None => VertexKind::Regular,
                },
            })
            .collect();

        // Expanded boundary loops (corners plus hanging vertices on the edges).
        let mut expanded: Vec<Vec<usize>> = Vec::with_capacity(elements.len());
        for el in &elements {
            let n = el.vertex_ids.len();
            let mut loop_ids = Vec::with_capacity(n + 2);
            for k in 0..n {
                loop_ids.push(el.vertex_ids[k]);
                if let Some(h) = edge_hanging[el.id][k] {
                    loop_ids.push(h);
                }
            }
            expanded.push(loop_ids);
        }

        // Facet construction by matching sub-edges of expanded loops.
        struct Claim {
            element: usize,
            corner_edge: usize,
            from: usize,
        }
        let mut claims: BTreeMap<(usize, usize), Vec<Claim>> = BTreeMap::new();
        for el in &elements {
            let n = el.vertex_ids.len();
            for k in 0..n {
                let u = el.vertex_ids[k];
                let v = el.vertex_ids[(k + 1) % n];
                let subs: Vec<(usize, usize)> = match edge_hanging[el.id][k] {
                    Some(h) => vec![(u, h), (h, v)],
                    None => vec![(u, v)],
                };
                for (a, b) in subs {
                    let key = (a.min(b), a.max(b));
                    claims
                        .entry(key)
                        .or_default()
                        .push(Claim { element: el.id, corner_edge: k, from: a });
                }
            }
        }

        let mut facets = Vec::with_capacity(claims.len());
        let mut edge_facets: Vec<Vec<Vec<usize>>> =
            elements.iter().map(|e| vec![Vec::new(); e.vertex_ids.len()]).collect();
        for ((a, b), list) in claims {
            match list.len() {
                1 | 2 => {}
                _ => return Err(MeshError::NonManifoldEdge(a, b)),
            }
            let plus = &list[0];
            let (from, to) = (plus.from, if plus.from == a { b } else { a });
            let dir = vertices[to].position - vertices[from].position;
            let length = dir.norm();
            let unit_normal = dir.perp_cw().normalized();
            let id = facets.len();
            let side_plus = FacetSide { element: plus.element, corner_edge: plus.corner_edge };
            let side_minus = list.get(1).map(|m| FacetSide {
                element: m.element,
                corner_edge: m.corner_edge,
            });
            edge_facets[plus.element][plus.corner_edge].push(id);
            if let Some(m) = list.get(1) {
                edge_facets[m.element][m.corner_edge].push(id);
            }
            facets.push(Facet {
                id,
                endpoints: [from, to],
                side_plus,
                side_minus,
                unit_normal,
                length,
            });
        }

        // Dangling vertices and boundary flags.
        let mut used = vec![false; n_vertices];
        for loop_ids in &expanded {
            for &v in loop_ids {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::DanglingVertex(v));
        }
        let mut boundary_vertex = vec![false; n_vertices];
        for f in &facets {
            if f.is_boundary() {
                boundary_vertex[f.endpoints[0]] = true;
                boundary_vertex[f.endpoints[1]] = true;
            }
        }
        for (&child, _) in &hanging_parents {
            // a hanging vertex always separates two interior facets
            if boundary_vertex[child] {
                return Err(MeshError::HangingOnBoundary(child));
            }
        }

        Ok(PolygonMesh {
            vertices,
            elements,
            facets,
            geometry,
            expanded,
            edge_hanging,
            boundary_vertex,
            edge_facets,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn position(&self, v: usize) -> Vec2 {
        self.vertices[v].position
    }

    pub fn geometry(&self, element: usize) -> &ElementGeometry {
        &self.geometry[element]
    }

    /// CCW boundary loop of an element including hanging vertices on its edges.
    pub fn expanded_loop(&self, element: usize) -> &[usize] {
        &self.expanded[element]
    }

    /// Hanging vertex on corner edge `k` of `element`, if present.
    pub fn hanging_on_edge(&self, element: usize, k: usize) -> Option<usize> {
        self.edge_hanging[element][k]
    }

    /// Facet ids tiling corner edge `k` of `element` (one or two).
    pub fn facets_on_edge(&self, element: usize, k: usize) -> &[usize] {
        &self.edge_facets[element][k]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_hanging(&self, v: usize) -> bool {
        matches!(self.vertices[v].kind, VertexKind::Hanging { .. })
    }

    /// Total mesh area.
    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    /// Shape-regularity report; see [`RegularityReport`].
    pub fn regularity_report(&self) -> RegularityReport {
        regularity::regularity_report(self)
    }
}

pub(crate) fn bounding_box(points: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Vec2> {
        vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn single_square_topology() {
        let mesh = PolygonMesh::build_topology(unit_square(), vec![vec![0, 1, 2, 3]]).unwrap();
        assert_eq!(mesh.n_facets(), 4);
        assert!(mesh.facets().iter().all(|f| f.is_boundary()));
        assert!((0..4).all(|v| mesh.is_boundary_vertex(v)));
    }

    #[test]
    fn two_squares_share_one_interior_facet() {
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
        ];
        let elements = vec![vec![0, 1, 2, 3], vec![1, 4, 5, 2]];
        let mesh = PolygonMesh::build_topology(vertices, elements).unwrap();
        let interior: Vec<_> = mesh.facets().iter().filter(|f| !f.is_boundary()).collect();
        assert_eq!(interior.len(), 1);
        let f = interior[0];
        // normal points from the left element (side_plus) into the right one
        assert_eq!(f.side_plus.element, 0);
        assert!((f.unit_normal - Vec2::new(1.0, 0.0)).norm() < 1e-14);
        assert!((f.unit_normal.norm() - 1.0).abs() < 1e-14);
    }

    /// Left coarse square next to a refined pair: the coarse edge splits into
    /// two facets and the midpoint vertex hangs with the edge endpoints as
    /// parents.
    #[test]
    fn hanging_vertex_detected_and_facets_split() {
        let vertices = vec![
            Vec2::new(0.0, 0.0),  // 0
            Vec2::new(1.0, 0.0),  // 1
            Vec2::new(1.0, 1.0),  // 2
            Vec2::new(0.0, 1.0),  // 3
            Vec2::new(2.0, 0.0),  // 4
            Vec2::new(2.0, 1.0),  // 5
            Vec2::new(1.0, 0.5),  // 6 midpoint of (1,2)
            Vec2::new(2.0, 0.5),  // 7
        ];
        let elements = vec![
            vec![0, 1, 2, 3],
            vec![1, 4, 7, 6],
            vec![6, 7, 5, 2],
        ];
        let mesh = PolygonMesh::build_topology(vertices, elements).unwrap();
        assert_eq!(mesh.vertices()[6].kind, VertexKind::Hanging { parents: [1, 2] });
        // exhaustive enumeration: the coarse geometric edge (1,2) appears as
        // the two interior facets (1,6) and (6,2)
        let coarse_edge_facets: Vec<_> = mesh
            .facets()
            .iter()
            .filter(|f| {
                let [a, b] = f.endpoints;
                !f.is_boundary() && (a.min(b), a.max(b)) != (1, 1) && (a == 6 || b == 6)
            })
            .collect();
        assert_eq!(coarse_edge_facets.len(), 3); // (1,6),(6,2) on the coarse edge + (6,7)
        assert_eq!(mesh.facets_on_edge(0, 1).len(), 2);
        assert_eq!(mesh.expanded_loop(0), &[0, 1, 6, 2, 3]);
    }

    #[test]
    fn two_hanging_nodes_on_edge_rejected() {
        // coarse square spanning [0,2] x [0,2] on the left, right column cut
        // into four half-squares so that (2,0.5) and (2,1.5)... both interior
        // points of the coarse edge trigger the error.
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(3.0, 0.0),
            Vec2::new(3.0, 2.0),
            Vec2::new(2.0, 0.5),
            Vec2::new(3.0, 0.5),
            Vec2::new(2.0, 1.5),
            Vec2::new(3.0, 1.5),
        ];
        let elements = vec![
            vec![0, 1, 2, 3],
            vec![1, 4, 7, 6],
            vec![6, 7, 9, 8],
            vec![8, 9, 5, 2],
        ];
        let err = PolygonMesh::build_topology(vertices, elements).unwrap_err();
        assert!(matches!(err, MeshError::TwoHangingNodesOnEdge(_, _)));
    }

    #[test]
    fn non_convex_and_cw_rejected() {
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.4, 0.4),
            Vec2::new(0.0, 1.0),
        ];
        let err = PolygonMesh::build_topology(vertices.clone(), vec![vec![0, 1, 2, 3]]).unwrap_err();
        assert!(matches!(err, MeshError::NonConvexElement(0)));

        let cw = vec![vec![3, 2, 1, 0]];
        let square = unit_square();
        let err = PolygonMesh::build_topology(square, cw).unwrap_err();
        assert!(matches!(err, MeshError::OrientationError(0)));
    }

    #[test]
    fn dangling_vertex_rejected() {
        let mut vertices = unit_square();
        vertices.push(Vec2::new(5.0, 5.0));
        let err = PolygonMesh::build_topology(vertices, vec![vec![0, 1, 2, 3]]).unwrap_err();
        assert!(matches!(err, MeshError::DanglingVertex(4)));
    }

    #[test]
    fn turning_angles_sum_to_two_pi() {
        let mesh = PolygonMesh::build_topology(unit_square(), vec![vec![0, 1, 2, 3]]).unwrap();
        let g = mesh.geometry(0);
        let sum: f64 = g.interior_angles().iter().map(|&t| std::f64::consts::PI - t).sum();
        assert!((sum - 2.0 * std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn normal_cross_in_unit_interval() {
        let hex: Vec<Vec2> = (0..6)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 6.0;
                Vec2::new(a.cos(), a.sin())
            })
            .collect();
        let g = ElementGeometry::from_corners(hex).unwrap();
        for &m in &g.normal_cross {
            assert!(m > 0.0 && m <= 1.0 + 1e-14);
        }
    }
}
