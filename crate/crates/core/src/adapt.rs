//! Dörfler marking and polytree refinement with hanging-node closure.
//!
//! A marked n-gon is subdivided through its edge midpoints `m_i`, the corner
//! average `x_c`, and the midpoints `x_i` of the segments `[x_c, m_i]` into n
//! outer pentagons and one inner n-gon. Midpoints on shared edges become
//! hanging vertices of unrefined neighbors; closure refinements keep every
//! geometric edge at no more than one hanging vertex. An edge that already
//! carries a hanging vertex splits exactly there (the hanging vertex is the
//! midpoint by construction and becomes a regular corner of the children).

use crate::assembly::{
    assemble, build_dofmap, default_max_iter, energy_error, reconstruct, solve_cg,
    AssemblyError, DiscreteSolution,
};
use crate::estimate::{estimate_all, ElementIndicator, Estimates};
use crate::mesh::{ElementGeometry, MeshError, PolygonMesh};
use crate::vec2::Vec2;
use std::collections::BTreeMap;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("all error indicators vanish; nothing to mark")]
    AllZeroIndicators,
    #[error("refining element {0} produced a non-convex child")]
    NonConvexChild(usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("iteration {iter}: {source}")]
    Iteration {
        iter: usize,
        #[source]
        source: Box<AdaptError>,
    },
}

/// Minimal bulk-chasing selection.
#[derive(Clone, Debug)]
pub struct MarkSet {
    pub elements: Vec<usize>,
    pub theta: f64,
    pub captured_fraction: f64,
}

/// Sorts squared indicators descending (ties by ascending id) and takes the
/// shortest prefix capturing at least `theta` of the total.
pub fn dorfler_mark(indicators: &[ElementIndicator], theta: f64) -> Result<MarkSet, AdaptError> {
    assert!(theta > 0.0 && theta < 1.0, "theta must lie in (0, 1)");
    let total: f64 = indicators.iter().map(|i| i.eta_sq).sum();
    if total <= 0.0 {
        return Err(AdaptError::AllZeroIndicators);
    }
    let mut order: Vec<&ElementIndicator> = indicators.iter().collect();
    order.sort_by(|a, b| {
        b.eta_sq
            .partial_cmp(&a.eta_sq)
            .unwrap()
            .then(a.element.cmp(&b.element))
    });
    let mut elements = Vec::new();
    let mut captured = 0.0;
    for ind in order {
        if captured >= theta * total {
            break;
        }
        captured += ind.eta_sq;
        elements.push(ind.element);
    }
    let set = MarkSet { elements, theta, captured_fraction: captured / total };
    debug_assert!(set.captured_fraction >= theta - 1e-12);
    debug_assert!({
        // minimality: dropping the smallest marked indicator breaks the bound
        let smallest = set
            .elements
            .last()
            .map(|&id| indicators[id].eta_sq)
            .unwrap_or(0.0);
        captured - smallest < theta * total || set.elements.len() <= 1
    });
    Ok(set)
}

/// Subdivision blueprint of one element.
#[derive(Clone, Debug)]
pub struct ElementPlan {
    pub center: Vec2,
    pub edge_midpoints: Vec<Vec2>,
    pub interior_points: Vec<Vec2>,
}

pub fn plan_element(geo: &ElementGeometry) -> ElementPlan {
    let n = geo.n();
    let center = geo.vertex_mean;
    let edge_midpoints: Vec<Vec2> =
        (0..n).map(|i| geo.corners[i].midpoint(geo.corners[(i + 1) % n])).collect();
    let interior_points: Vec<Vec2> =
        edge_midpoints.iter().map(|&m| center.midpoint(m)).collect();
    ElementPlan { center, edge_midpoints, interior_points }
}

/// Elements that must be refined together with `marked` so that no geometric
/// edge ends up with two hanging vertices.
pub fn closure_set(mesh: &PolygonMesh, marked: &[usize]) -> Vec<usize> {
    let mut in_set = vec![false; mesh.n_elements()];
    for &m in marked {
        in_set[m] = true;
    }
    loop {
        let mut changed = false;
        for el in mesh.elements() {
            if in_set[el.id] {
                continue;
            }
            let n = el.vertex_ids.len();
            for k in 0..n {
                let mut count = usize::from(mesh.hanging_on_edge(el.id, k).is_some());
                for &fid in mesh.facets_on_edge(el.id, k) {
                    let facet = &mesh.facets()[fid];
                    let opposite = if facet.side_plus.element == el.id {
                        facet.side_minus.map(|s| s.element)
                    } else {
                        Some(facet.side_plus.element)
                    };
                    if let Some(op) = opposite {
                        if in_set[op] {
                            count += 1;
                        }
                    }
                }
                if count >= 2 {
                    in_set[el.id] = true;
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (0..mesh.n_elements()).filter(|&e| in_set[e]).collect()
}

/// Refines the closure of the marked set in one batch and rebuilds the mesh.
pub fn refine(mesh: &PolygonMesh, marked: &[usize]) -> Result<PolygonMesh, AdaptError> {
    let selection = closure_set(mesh, marked);
    let mut in_set = vec![false; mesh.n_elements()];
    for &m in &selection {
        in_set[m] = true;
    }

    let mut positions: Vec<Vec2> = mesh.vertices().iter().map(|v| v.position).collect();
    // shared midpoints, keyed by the sorted corner pair of the edge
    let mut midpoint_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut new_elements: Vec<(Vec<usize>, u32)> = Vec::new();

    for el in mesh.elements() {
        if !in_set[el.id] {
            new_elements.push((el.vertex_ids.clone(), el.refinement_level));
            continue;
        }
        let geo = mesh.geometry(el.id);
        let n = geo.n();
        let plan = plan_element(geo);
        let mut mid_ids = Vec::with_capacity(n);
        for k in 0..n {
            let u = el.vertex_ids[k];
            let v = el.vertex_ids[(k + 1) % n];
            let id = if let Some(h) = mesh.hanging_on_edge(el.id, k) {
                // a hanging vertex sits exactly at the midpoint
                h
            } else {
                let key = (u.min(v), u.max(v));
                *midpoint_ids.entry(key).or_insert_with(|| {
                    positions.push(plan.edge_midpoints[k]);
                    positions.len() - 1
                })
            };
            mid_ids.push(id);
        }
        let mut interior_ids = Vec::with_capacity(n);
        for &p in &plan.interior_points {
            positions.push(p);
            interior_ids.push(positions.len() - 1);
        }
        let level = el.refinement_level + 1;
        // outer pentagon at corner i: (m_{i-1}, a_i, m_i, x_i, x_{i-1})
        let mut child_area = 0.0;
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let child = vec![
                mid_ids[prev],
                el.vertex_ids[i],
                mid_ids[i],
                interior_ids[i],
                interior_ids[prev],
            ];
            let corners: Vec<Vec2> = child.iter().map(|&v| positions[v]).collect();
            let child_geo = ElementGeometry::from_corners(corners)
                .map_err(|_| AdaptError::NonConvexChild(el.id))?;
            child_area += child_geo.area;
            new_elements.push((child, level));
        }
        let inner: Vec<usize> = interior_ids.clone();
        let corners: Vec<Vec2> = inner.iter().map(|&v| positions[v]).collect();
        let inner_geo = ElementGeometry::from_corners(corners)
            .map_err(|_| AdaptError::NonConvexChild(el.id))?;
        child_area += inner_geo.area;
        debug_assert!(
            (child_area - geo.area).abs() <= 1e-12 * geo.area,
            "children must partition the parent"
        );
        new_elements.push((inner, level));
    }

    Ok(PolygonMesh::build_with_levels(positions, new_elements)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefinementMode {
    /// Dörfler marking with the given bulk parameter.
    Adaptive,
    /// Every element is refined each level.
    Uniform,
}

/// One row of the convergence history.
#[derive(Clone, Debug)]
pub struct AdaptRecord {
    pub iter: usize,
    pub dof: usize,
    pub n_elements: usize,
    pub eta_h: f64,
    pub h1_error: Option<f64>,
    pub order_error: Option<f64>,
    pub order_eta: Option<f64>,
    pub effectivity: Option<f64>,
    pub n_marked: usize,
    pub wall_ms: f64,
}

pub struct LoopConfig<'a> {
    pub source: &'a (dyn Fn(Vec2) -> f64 + Sync),
    pub boundary_data: &'a dyn Fn(Vec2) -> f64,
    pub exact_gradient: Option<&'a (dyn Fn(Vec2) -> Vec2 + Sync)>,
    pub mode: RefinementMode,
    pub theta: f64,
    pub max_dof: usize,
    pub max_iterations: usize,
    pub quad_degree: usize,
    pub solver_rel_tol: f64,
    pub jump_gauss: usize,
}

impl<'a> LoopConfig<'a> {
    pub fn new(
        source: &'a (dyn Fn(Vec2) -> f64 + Sync),
        boundary_data: &'a dyn Fn(Vec2) -> f64,
    ) -> Self {
        LoopConfig {
            source,
            boundary_data,
            exact_gradient: None,
            mode: RefinementMode::Adaptive,
            theta: 0.6,
            max_dof: 30_000,
            max_iterations: 60,
            quad_degree: 8,
            solver_rel_tol: 1e-10,
            jump_gauss: 8,
        }
    }
}

/// Everything computed at one level, handed to the per-level callback.
pub struct LevelState<'a> {
    pub iter: usize,
    pub mesh: &'a PolygonMesh,
    pub solution: &'a DiscreteSolution,
    pub estimates: &'a Estimates,
    pub marked: &'a [usize],
    pub record: &'a AdaptRecord,
}

/// Solve and estimate on one mesh.
pub struct LevelData {
    pub solution: DiscreteSolution,
    pub estimates: Estimates,
    pub dof: usize,
    pub h1_error: Option<f64>,
    pub wall_ms: f64,
}

pub fn solve_level(mesh: &PolygonMesh, config: &LoopConfig) -> Result<LevelData, AdaptError> {
    let start = Instant::now();
    let dofmap = build_dofmap(mesh, config.boundary_data);
    let system = assemble(mesh, &dofmap, config.source, config.quad_degree)?;
    let free = solve_cg(&system, config.solver_rel_tol, default_max_iter(system.dimension()))?;
    let solution = reconstruct(mesh, &dofmap, &free)?;
    let estimates =
        estimate_all(mesh, &solution, config.source, config.quad_degree, config.jump_gauss);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let h1_error =
        config.exact_gradient.map(|g| energy_error(mesh, &solution, g, config.quad_degree));
    Ok(LevelData { solution, estimates, dof: dofmap.n_free(), h1_error, wall_ms })
}

/// Convergence order `log(e_prev / e_cur) / log(dof_cur / dof_prev)`.
fn order_between(prev: Option<(f64, usize)>, cur: f64, dof: usize) -> Option<f64> {
    let (prev_val, prev_dof) = prev?;
    if prev_dof == 0 || dof <= prev_dof || cur <= 0.0 || prev_val <= 0.0 {
        None
    } else {
        Some((prev_val / cur).ln() / (dof as f64 / prev_dof as f64).ln())
    }
}

/// Builds the convergence-history row for one level.
pub fn make_record(
    iter: usize,
    n_elements: usize,
    level: &LevelData,
    prev: Option<&AdaptRecord>,
    n_marked: usize,
) -> AdaptRecord {
    let order_error = level.h1_error.and_then(|cur| {
        order_between(prev.and_then(|p| p.h1_error.map(|pe| (pe, p.dof))), cur, level.dof)
    });
    let order_eta =
        order_between(prev.map(|p| (p.eta_h, p.dof)), level.estimates.eta_h, level.dof);
    AdaptRecord {
        iter,
        dof: level.dof,
        n_elements,
        eta_h: level.estimates.eta_h,
        h1_error: level.h1_error,
        order_error,
        order_eta,
        effectivity: level.h1_error.map(|e| level.estimates.eta_h / e),
        n_marked,
        wall_ms: level.wall_ms,
    }
}

/// Solve / estimate / mark / refine until the dof budget or iteration cap.
pub fn adaptive_loop(
    initial_mesh: PolygonMesh,
    config: &LoopConfig,
    mut on_level: impl FnMut(&LevelState),
) -> Result<Vec<AdaptRecord>, AdaptError> {
    let mut mesh = initial_mesh;
    let mut records: Vec<AdaptRecord> = Vec::new();
    for iter in 0..config.max_iterations {
        let level = solve_level(&mesh, config)
            .map_err(|source| AdaptError::Iteration { iter, source: Box::new(source) })?;

        let stop = level.dof >= config.max_dof || iter + 1 == config.max_iterations;
        let marked: Vec<usize> = if stop {
            Vec::new()
        } else {
            match config.mode {
                RefinementMode::Uniform => (0..mesh.n_elements()).collect(),
                RefinementMode::Adaptive => {
                    dorfler_mark(&level.estimates.indicators, config.theta)
                        .map_err(|source| AdaptError::Iteration {
                            iter,
                            source: Box::new(source),
                        })?
                        .elements
                }
            }
        };

        let record =
            make_record(iter, mesh.n_elements(), &level, records.last(), marked.len());
        on_level(&LevelState {
            iter,
            mesh: &mesh,
            solution: &level.solution,
            estimates: &level.estimates,
            marked: &marked,
            record: &record,
        });
        records.push(record);
        if stop {
            break;
        }
        mesh = refine(&mesh, &marked)
            .map_err(|source| AdaptError::Iteration { iter, source: Box::new(source) })?;
    }
    Ok(records)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_initial_mesh, write_mesh_json, Domain, MeshStyle};
    use crate::verify::sample_regular_polygon;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn indicator(element: usize, eta_sq: f64) -> ElementIndicator {
        ElementIndicator { element, volume_part: eta_sq, jump_part: 0.0, eta_sq }
    }

    #[test]
    fn dorfler_greedy_prefix() {
        let inds: Vec<ElementIndicator> =
            [9.0, 4.0, 1.0, 1.0, 1.0].iter().enumerate().map(|(i, &v)| indicator(i, v)).collect();
        let set = dorfler_mark(&inds, 0.6).unwrap();
        assert_eq!(set.elements, vec![0, 1]);
        assert!(set.captured_fraction >= 0.6);

        let set = dorfler_mark(&inds, 1e-9).unwrap();
        assert_eq!(set.elements, vec![0]);

        let equal: Vec<ElementIndicator> = (0..10).map(|i| indicator(i, 1.0)).collect();
        let set = dorfler_mark(&equal, 0.6).unwrap();
        assert_eq!(set.elements.len(), 6);

        let zeros: Vec<ElementIndicator> = (0..3).map(|i| indicator(i, 0.0)).collect();
        assert!(matches!(dorfler_mark(&zeros, 0.6), Err(AdaptError::AllZeroIndicators)));
    }

    #[test]
    fn refine_single_square_gives_expected_children() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Grid, 1, 0).unwrap();
        let fine = refine(&mesh, &[0]).unwrap();
        assert_eq!(fine.n_elements(), 5);
        assert!((fine.total_area() - 1.0).abs() < 1e-12);
        // inner quad vertices per the midpoint construction
        let expected = [
            Vec2::new(0.5, 0.25),
            Vec2::new(0.75, 0.5),
            Vec2::new(0.5, 0.75),
            Vec2::new(0.25, 0.5),
        ];
        let inner = fine.elements().iter().find(|e| e.vertex_ids.len() == 4).unwrap();
        for &v in &inner.vertex_ids {
            let p = fine.position(v);
            assert!(expected.iter().any(|&q| q.dist(p) < 1e-14), "unexpected {p:?}");
        }
        let pentagons = fine.elements().iter().filter(|e| e.vertex_ids.len() == 5).count();
        assert_eq!(pentagons, 4);
        assert!(fine.elements().iter().all(|e| e.refinement_level == 1));
    }

    #[test]
    fn refine_creates_hanging_vertex_on_neighbor() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Grid, 2, 0).unwrap();
        let fine = refine(&mesh, &[0]).unwrap();
        assert_eq!(fine.n_elements(), 3 + 5);
        let hanging: Vec<_> = fine.vertices().iter().filter(|v| fine.is_hanging(v.id)).collect();
        assert_eq!(hanging.len(), 2); // one on each unrefined interior neighbor
    }

    #[test]
    fn second_refinement_forces_closure() {
        // two squares side by side; refining the left one twice forces the
        // right square into the second batch
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let elements = vec![vec![0, 1, 4, 5], vec![1, 2, 3, 4]];
        let mesh = PolygonMesh::build_topology(vertices, elements).unwrap();
        let once = refine(&mesh, &[0]).unwrap();
        assert_eq!(once.n_elements(), 6);
        // mark the child pentagon touching the shared edge at its lower half
        let child = once
            .elements()
            .iter()
            .find(|e| {
                e.refinement_level == 1
                    && e.vertex_ids.iter().any(|&v| once.position(v) == Vec2::new(1.0, 0.0))
                    && e.vertex_ids.iter().any(|&v| once.position(v) == Vec2::new(1.0, 0.5))
            })
            .expect("edge child");
        let closure = closure_set(&once, &[child.id]);
        let coarse_right = once
            .elements()
            .iter()
            .find(|e| e.refinement_level == 0)
            .unwrap()
            .id;
        assert!(closure.contains(&coarse_right), "closure must pick up the coarse neighbor");
        let twice = refine(&once, &[child.id]).unwrap();
        // every geometric edge still carries at most one hanging vertex
        // (build_topology would have failed otherwise)
        assert!((twice.total_area() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn children_of_random_polygons_are_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let n = 3 + (rand::Rng::gen_range(&mut rng, 0..6)) as usize;
            let geo = sample_regular_polygon(&mut rng, n);
            let plan = plan_element(&geo);
            for i in 0..n {
                let prev = (i + n - 1) % n;
                let child = vec![
                    plan.edge_midpoints[prev],
                    geo.corners[i],
                    plan.edge_midpoints[i],
                    plan.interior_points[i],
                    plan.interior_points[prev],
                ];
                assert!(
                    ElementGeometry::from_corners(child).is_ok(),
                    "pentagon child of a {n}-gon must be convex"
                );
            }
            let inner: Vec<Vec2> = plan.interior_points.clone();
            assert!(ElementGeometry::from_corners(inner).is_ok());
        }
    }

    #[test]
    fn uniform_mode_multiplies_elements() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Grid, 2, 0).unwrap();
        let fine = refine(&mesh, &(0..mesh.n_elements()).collect::<Vec<_>>()).unwrap();
        assert_eq!(fine.n_elements(), 4 * 5);
        assert_eq!(
            fine.vertices().iter().filter(|v| fine.is_hanging(v.id)).count(),
            0,
            "uniform refinement leaves no hanging vertices"
        );
    }

    #[test]
    fn refinement_is_deterministic() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Polygonal, 3, 2).unwrap();
        let a = refine(&mesh, &[0, 3, 5]).unwrap();
        let b = refine(&mesh, &[0, 3, 5]).unwrap();
        assert_eq!(write_mesh_json(&a), write_mesh_json(&b));
        assert!((a.total_area() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn adaptive_loop_short_run() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Grid, 2, 0).unwrap();
        // u = sin(pi x) sin(pi y), f = 2 pi^2 u, g = 0
        let pi = std::f64::consts::PI;
        let source = move |p: Vec2| 2.0 * pi * pi * (pi * p.x).sin() * (pi * p.y).sin();
        let zero = |_: Vec2| 0.0;
        let grad = move |p: Vec2| {
            Vec2::new(
                pi * (pi * p.x).cos() * (pi * p.y).sin(),
                pi * (pi * p.x).sin() * (pi * p.y).cos(),
            )
        };
        let mut config = LoopConfig::new(&source, &zero);
        config.exact_gradient = Some(&grad);
        config.max_dof = 300;
        let mut levels = 0;
        let records = adaptive_loop(mesh, &config, |_| levels += 1).unwrap();
        assert_eq!(records.len(), levels);
        assert!(records.len() >= 3);
        assert!(records.last().unwrap().dof >= 300);
        // both the error and the estimator decrease along the run
        for w in records.windows(2) {
            assert!(w[1].eta_h < w[0].eta_h);
            assert!(w[1].h1_error.unwrap() < w[0].h1_error.unwrap());
        }
        // effectivity is the declared ratio
        for r in &records {
            let eff = r.effectivity.unwrap();
            assert!((eff - r.eta_h / r.h1_error.unwrap()).abs() <= 1e-12 * eff);
        }
    }
}
