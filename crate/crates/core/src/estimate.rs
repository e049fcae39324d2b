//! Residual a posteriori error indicators.
//!
//! Per element: `eta_T^2 = h_T^2 ||f + lap u_h||_{0,T}^2
//! + 1/2 sum_e h_e ||jump of du_h/dn||_{0,e}^2` over the interior facets of
//! its boundary. `h_e` is the facet length, i.e. the fine sub-edge where a
//! hanging vertex splits a coarse edge; the coarse side is then evaluated on
//! that sub-interval of its geometric edge through the boundary branch of the
//! basis. No data-oscillation term enters `eta_T`; the oscillation is
//! reported separately for diagnostics.

use crate::assembly::DiscreteSolution;
use crate::basis::{eval_basis_into, eval_basis_on_edge, BasisEval};
#[cfg(test)]
use crate::basis::eval_basis;
use crate::mesh::{Facet, PolygonMesh};
use crate::quadrature::{facet_rule_on_segment, polygon_rule};
use crate::vec2::Vec2;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("facet {0} lies on the domain boundary; jumps are interior-only")]
    BoundaryFacet(usize),
}

#[derive(Clone, Debug)]
pub struct ElementIndicator {
    pub element: usize,
    /// `h_T^2 ||f + lap u_h||_{0,T}^2`
    pub volume_part: f64,
    /// Half of the adjacent interior-facet jump terms.
    pub jump_part: f64,
    pub eta_sq: f64,
}

#[derive(Clone, Debug)]
pub struct Estimates {
    pub indicators: Vec<ElementIndicator>,
    /// Global estimator `(sum_T eta_T^2)^{1/2}`.
    pub eta_h: f64,
    /// Data oscillation `(sum_T h_T^2 ||f - f_T||_{0,T}^2)^{1/2}` (diagnostic).
    pub oscillation: f64,
}

/// Interior residual of one element.
pub fn volume_residual(
    mesh: &PolygonMesh,
    element: usize,
    solution: &DiscreteSolution,
    f: &(dyn Fn(Vec2) -> f64 + Sync),
    quad_degree: usize,
) -> f64 {
    let geo = mesh.geometry(element);
    let rule = polygon_rule(geo, quad_degree).expect("quad degree");
    let ids = &mesh.elements()[element].vertex_ids;
    let mut acc = 0.0;
    let mut basis = BasisEval::default();
    for (&p, &w) in rule.points.iter().zip(&rule.weights) {
        eval_basis_into(geo, p, &mut basis).expect("interior point");
        let mut lap_h = 0.0;
        for (i, &v) in ids.iter().enumerate() {
            lap_h += basis.laplacians[i] * solution.vertex_values[v];
        }
        let r = f(p) + lap_h;
        acc += w * r * r;
    }
    geo.diameter * geo.diameter * acc
}

/// `h_e ||jump of du_h/dn||_{0,e}^2` across one interior facet.
pub fn jump_residual(
    mesh: &PolygonMesh,
    facet: &Facet,
    solution: &DiscreteSolution,
    n_gauss: usize,
) -> Result<f64, EstimateError> {
    let Some(side_minus) = side_gradient_context(mesh, facet, false) else {
        return Err(EstimateError::BoundaryFacet(facet.id));
    };
    let side_plus = side_gradient_context(mesh, facet, true).expect("plus side");
    let a = mesh.position(facet.endpoints[0]);
    let b = mesh.position(facet.endpoints[1]);
    let (ts, ws) = facet_rule_on_segment(n_gauss);
    let mut acc = 0.0;
    for (&t, &w) in ts.iter().zip(&ws) {
        let p = a + (b - a) * t;
        let jump = (side_plus.gradient_at(mesh, solution, p)
            - side_minus.gradient_at(mesh, solution, p))
        .dot(facet.unit_normal);
        acc += w * jump * jump;
    }
    Ok(facet.length * facet.length * acc)
}

struct SideContext {
    element: usize,
    corner_edge: usize,
    edge_from: Vec2,
    edge_dir: Vec2,
    inv_len_sq: f64,
}

impl SideContext {
    /// Trace gradient of u_h from this side at a physical point on the facet.
    fn gradient_at(&self, mesh: &PolygonMesh, solution: &DiscreteSolution, p: Vec2) -> Vec2 {
        let t = ((p - self.edge_from).dot(self.edge_dir) * self.inv_len_sq).clamp(0.0, 1.0);
        let geo = mesh.geometry(self.element);
        let basis = eval_basis_on_edge(geo, self.corner_edge, t).expect("edge eval");
        let ids = &mesh.elements()[self.element].vertex_ids;
        let mut g = Vec2::ZERO;
        for (i, &v) in ids.iter().enumerate() {
            g += basis.gradients[i] * solution.vertex_values[v];
        }
        g
    }
}

fn side_gradient_context(mesh: &PolygonMesh, facet: &Facet, plus: bool) -> Option<SideContext> {
    let side = if plus { Some(facet.side_plus) } else { facet.side_minus }?;
    let el = &mesh.elements()[side.element];
    let n = el.vertex_ids.len();
    let u = mesh.position(el.vertex_ids[side.corner_edge]);
    let v = mesh.position(el.vertex_ids[(side.corner_edge + 1) % n]);
    let dir = v - u;
    Some(SideContext {
        element: side.element,
        corner_edge: side.corner_edge,
        edge_from: u,
        edge_dir: dir,
        inv_len_sq: 1.0 / dir.norm_sq(),
    })
}

/// All indicators plus the global estimator. Each interior facet contributes
/// half of its jump term to both adjacent elements.
pub fn estimate_all(
    mesh: &PolygonMesh,
    solution: &DiscreteSolution,
    f: &(dyn Fn(Vec2) -> f64 + Sync),
    quad_degree: usize,
    n_gauss: usize,
) -> Estimates {
    let volume: Vec<f64> = mesh
        .elements()
        .par_iter()
        .map(|el| volume_residual(mesh, el.id, solution, f, quad_degree))
        .collect();
    let jumps: Vec<f64> = mesh
        .facets()
        .par_iter()
        .map(|facet| {
            if facet.is_boundary() {
                0.0
            } else {
                jump_residual(mesh, facet, solution, n_gauss).expect("interior facet")
            }
        })
        .collect();
    let mut jump_part = vec![0.0; mesh.n_elements()];
    for (facet, &j) in mesh.facets().iter().zip(&jumps) {
        if let Some(minus) = facet.side_minus {
            jump_part[facet.side_plus.element] += 0.5 * j;
            jump_part[minus.element] += 0.5 * j;
        }
    }
    let indicators: Vec<ElementIndicator> = volume
        .iter()
        .zip(&jump_part)
        .enumerate()
        .map(|(id, (&v, &j))| ElementIndicator {
            element: id,
            volume_part: v,
            jump_part: j,
            eta_sq: v + j,
        })
        .collect();
    let eta_h = indicators.iter().map(|i| i.eta_sq).sum::<f64>().sqrt();
    let oscillation = data_oscillation(mesh, f, quad_degree);
    Estimates { indicators, eta_h, oscillation }
}

fn data_oscillation(
    mesh: &PolygonMesh,
    f: &(dyn Fn(Vec2) -> f64 + Sync),
    quad_degree: usize,
) -> f64 {
    let per: Vec<f64> = mesh
        .elements()
        .par_iter()
        .map(|el| {
            let geo = mesh.geometry(el.id);
            let rule = polygon_rule(geo, quad_degree).expect("quad degree");
            let mut mean = 0.0;
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                mean += w * f(p);
            }
            mean /= geo.area;
            let mut acc = 0.0;
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                let d = f(p) - mean;
                acc += w * d * d;
            }
            geo.diameter * geo.diameter * acc
        })
        .collect();
    per.iter().sum::<f64>().sqrt()
}

/// Indicator dump: `element_id, h_T, volume_part, jump_part, eta_sq`.
pub fn indicator_csv(mesh: &PolygonMesh, indicators: &[ElementIndicator]) -> String {
    let mut s = String::from("element_id,h_T,volume_part,jump_part,eta_sq\n");
    for ind in indicators {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            ind.element,
            mesh.geometry(ind.element).diameter,
            ind.volume_part,
            ind.jump_part,
            ind.eta_sq
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{build_dofmap, reconstruct};
    use crate::mesh::{generate_initial_mesh, Domain, ElementGeometry, MeshStyle};

    fn two_squares() -> PolygonMesh {
        PolygonMesh::build_topology(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
                Vec2::new(2.0, 0.0),
                Vec2::new(2.0, 1.0),
            ],
            vec![vec![0, 1, 2, 3], vec![1, 4, 5, 2]],
        )
        .unwrap()
    }

    #[test]
    fn affine_solution_has_tiny_indicators() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Polygonal, 3, 9).unwrap();
        let u = |p: Vec2| 0.5 + 2.0 * p.x - p.y;
        let dofmap = build_dofmap(&mesh, u);
        let free: Vec<f64> = (0..mesh.n_vertices())
            .filter_map(|v| match dofmap.status(v) {
                crate::assembly::DofStatus::Free(_) => Some(u(mesh.position(v))),
                _ => None,
            })
            .collect();
        let sol = reconstruct(&mesh, &dofmap, &free).unwrap();
        let est = estimate_all(&mesh, &sol, &|_| 0.0, 8, 8);
        assert!(est.eta_h <= 1e-8, "eta_h = {}", est.eta_h);
    }

    #[test]
    fn volume_residual_on_square_and_skewed_quad() {
        // unit square: lambda_3 = xy is harmonic, residual vanishes
        let mesh = two_squares();
        let sol = DiscreteSolution {
            vertex_values: vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        };
        let v = volume_residual(&mesh, 0, &sol, &|_| 0.0, 8);
        assert!(v <= 1e-16, "square volume residual {v}");

        // skewed quad: nonzero Laplacian, cross-check by a dense midpoint
        // oracle on a fine fan sub-triangulation (geometrically exact)
        let corners = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.3, 0.1),
            Vec2::new(1.0, 1.2),
            Vec2::new(-0.2, 0.9),
        ];
        let quad = PolygonMesh::build_topology(corners.clone(), vec![vec![0, 1, 2, 3]]).unwrap();
        let sol = DiscreteSolution { vertex_values: vec![0.0, 0.0, 1.0, 0.0] };
        let fast = volume_residual(&quad, 0, &sol, &|_| 0.0, 8);
        let geo = ElementGeometry::from_corners(corners).unwrap();
        let mut dense = 0.0;
        let k = 200usize;
        for e in 0..4 {
            let a = geo.corners[e];
            let b = geo.corners[(e + 1) % 4];
            let c = geo.centroid;
            let area = 0.5 * (a - c).cross(b - c) / (k * k) as f64;
            for i in 0..k {
                for j in 0..(2 * (k - i) - 1) {
                    // midpoints of the i-th row of a k^2 subdivision
                    let (bi, bj) = if j % 2 == 0 {
                        ((i as f64 + 1.0 / 3.0), (j / 2) as f64 + 1.0 / 3.0)
                    } else {
                        ((i as f64 + 2.0 / 3.0), (j / 2) as f64 + 2.0 / 3.0)
                    };
                    let u = bi / k as f64;
                    let v = bj / k as f64;
                    if u + v >= 1.0 {
                        continue;
                    }
                    let p = c + (a - c) * u + (b - c) * v;
                    let basis = eval_basis(&geo, p).unwrap();
                    dense += area * basis.laplacians[2] * basis.laplacians[2];
                }
            }
        }
        dense *= geo.diameter * geo.diameter;
        assert!(
            (fast - dense).abs() <= 2e-4 * dense,
            "volume residual {fast} vs dense {dense}"
        );
    }

    #[test]
    fn jump_residual_matches_simpson_and_is_symmetric() {
        let mesh = two_squares();
        // hat of the shared vertex (1,0) = vertex 1
        let mut values = vec![0.0; 6];
        values[1] = 1.0;
        let sol = DiscreteSolution { vertex_values: values };
        let facet = mesh
            .facets()
            .iter()
            .find(|f| !f.is_boundary())
            .expect("interior facet");
        let fast = jump_residual(&mesh, facet, &sol, 8).unwrap();

        // dense Simpson oracle along the shared edge
        let plus = side_gradient_context(&mesh, facet, true).unwrap();
        let minus = side_gradient_context(&mesh, facet, false).unwrap();
        let a = mesh.position(facet.endpoints[0]);
        let b = mesh.position(facet.endpoints[1]);
        let jump_sq = |t: f64| -> f64 {
            let p = a + (b - a) * t;
            let j = (plus.gradient_at(&mesh, &sol, p) - minus.gradient_at(&mesh, &sol, p))
                .dot(facet.unit_normal);
            j * j
        };
        let panels = 10_000usize;
        let h = 1.0 / panels as f64;
        let mut simpson = 0.0;
        for k in 0..panels {
            let t0 = k as f64 * h;
            simpson += h / 6.0 * (jump_sq(t0) + 4.0 * jump_sq(t0 + 0.5 * h) + jump_sq(t0 + h));
        }
        simpson *= facet.length * facet.length; // h_e * integral over physical edge
        assert!(
            (fast - simpson).abs() <= 1e-6 * simpson,
            "jump {fast} vs simpson {simpson}"
        );
        assert!(fast > 0.0);

        // mirrored configuration gives the identical value
        let mirrored = PolygonMesh::build_topology(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(-1.0, 0.0),
                Vec2::new(-1.0, 1.0),
                Vec2::new(0.0, 1.0),
                Vec2::new(-2.0, 0.0),
                Vec2::new(-2.0, 1.0),
            ],
            vec![vec![3, 2, 1, 0], vec![2, 5, 4, 1]],
        )
        .unwrap();
        let mut values = vec![0.0; 6];
        values[1] = 1.0;
        let sol_m = DiscreteSolution { vertex_values: values };
        let facet_m = mirrored.facets().iter().find(|f| !f.is_boundary()).unwrap();
        let mirrored_val = jump_residual(&mirrored, facet_m, &sol_m, 8).unwrap();
        assert!((mirrored_val - fast).abs() <= 1e-12 * fast);
    }

    #[test]
    fn jump_bookkeeping_identity() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Polygonal, 3, 4).unwrap();
        // arbitrary but reproducible vertex values
        let values: Vec<f64> =
            (0..mesh.n_vertices()).map(|v| ((v * 37 + 11) % 17) as f64 / 17.0).collect();
        let sol = DiscreteSolution { vertex_values: values };
        let est = estimate_all(&mesh, &sol, &|_| 0.0, 8, 8);
        let total_by_elements: f64 = est.indicators.iter().map(|i| i.jump_part).sum();
        let total_by_facets: f64 = mesh
            .facets()
            .iter()
            .filter(|f| !f.is_boundary())
            .map(|f| jump_residual(&mesh, f, &sol, 8).unwrap())
            .sum();
        assert!(
            (total_by_elements - total_by_facets).abs() <= 1e-12 * total_by_facets,
            "{total_by_elements} vs {total_by_facets}"
        );
        for ind in &est.indicators {
            assert!(ind.volume_part >= 0.0 && ind.jump_part >= 0.0);
            assert_eq!(ind.eta_sq, ind.volume_part + ind.jump_part);
        }
    }

    #[test]
    fn boundary_facet_rejected() {
        let mesh = two_squares();
        let sol = DiscreteSolution { vertex_values: vec![0.0; 6] };
        let boundary = mesh.facets().iter().find(|f| f.is_boundary()).unwrap();
        assert!(matches!(
            jump_residual(&mesh, boundary, &sol, 8),
            Err(EstimateError::BoundaryFacet(_))
        ));
    }

    #[test]
    fn estimator_is_scale_covariant() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Grid, 3, 0).unwrap();
        let values: Vec<f64> =
            (0..mesh.n_vertices()).map(|v| ((v * 13 + 3) % 7) as f64).collect();
        let sol = DiscreteSolution { vertex_values: values.clone() };
        let f = |p: Vec2| p.x + 2.0 * p.y;
        let est = estimate_all(&mesh, &sol, &f, 8, 8);

        let s = 1024.0; // exact in floating point
        let scaled_vertices: Vec<Vec2> =
            mesh.vertices().iter().map(|v| v.position * s).collect();
        let elements: Vec<Vec<usize>> =
            mesh.elements().iter().map(|e| e.vertex_ids.clone()).collect();
        let scaled = PolygonMesh::build_topology(scaled_vertices, elements).unwrap();
        let sol_s = DiscreteSolution { vertex_values: values };
        let f_s = move |p: Vec2| f(p / s) / (s * s);
        let est_s = estimate_all(&scaled, &sol_s, &f_s, 8, 8);
        assert!(
            (est.eta_h - est_s.eta_h).abs() <= 1e-10 * est.eta_h,
            "{} vs {}",
            est.eta_h,
            est_s.eta_h
        );
    }

    #[test]
    fn hanging_facet_jump_uses_subinterval_of_coarse_edge() {
        // coarse left square + two refined right squares; a linear-in-y field
        // on the right column only jumps in the normal direction
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
        // u_h = x on every vertex: globally affine, all jumps vanish even
        // across the hanging configuration
        let sol = DiscreteSolution {
            vertex_values: mesh.vertices().iter().map(|v| v.position.x).collect(),
        };
        for f in mesh.facets().iter().filter(|f| !f.is_boundary()) {
            let j = jump_residual(&mesh, f, &sol, 8).unwrap();
            assert!(j <= 1e-20, "facet {:?} jump {j}", f.endpoints);
        }
    }
}
