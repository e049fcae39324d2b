//! Deterministic initial-mesh generators.
//!
//! `Grid` tiles the domain with axis-aligned squares. `Polygonal` runs a fixed
//! number of Lloyd iterations on seeded random generators and returns the
//! clipped Voronoi cells. Clipping against a non-convex L always produces a
//! reflex cell at the re-entrant corner, so the L-shaped polygonal mesh is
//! assembled from three mirrored copies of a square Voronoi mesh; mirroring is
//! exact in floating point and the interface traces match bit for bit.

use super::{MeshError, PolygonMesh};
use crate::vec2::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, HashSet};
use std::str::FromStr;

const LLOYD_ITERATIONS: usize = 10;
/// Edges shorter than this fraction of sqrt(cell area) are collapsed.
const SHORT_EDGE_FRACTION: f64 = 0.16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    UnitSquare,
    /// (-1,1)^2 minus the quadrant [0,1) x (-1,0].
    LShape,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }

    /// CCW outline polygon.
    pub fn outline(self) -> Vec<Vec2> {
        match self {
            Domain::UnitSquare => vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
            Domain::LShape => vec![
                Vec2::new(-1.0, -1.0),
                Vec2::new(0.0, -1.0),
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(-1.0, 1.0),
            ],
        }
    }

    /// Ids of the boundary lines through `p` (empty for interior points).
    /// Boundary coordinates produced by the generators are exact, so exact
    /// comparisons are intentional here.
    fn boundary_lines(self, p: Vec2) -> Vec<u8> {
        let mut lines = Vec::new();
        match self {
            Domain::UnitSquare => {
                if p.x == 0.0 {
                    lines.push(0);
                }
                if p.x == 1.0 {
                    lines.push(1);
                }
                if p.y == 0.0 {
                    lines.push(2);
                }
                if p.y == 1.0 {
                    lines.push(3);
                }
            }
            Domain::LShape => {
                if p.x == -1.0 {
                    lines.push(0);
                }
                if p.x == 1.0 {
                    lines.push(1);
                }
                if p.y == -1.0 {
                    lines.push(2);
                }
                if p.y == 1.0 {
                    lines.push(3);
                }
                // cut edges of the removed quadrant
                if p.x == 0.0 && p.y <= 0.0 {
                    lines.push(4);
                }
                if p.y == 0.0 && p.x >= 0.0 {
                    lines.push(5);
                }
            }
        }
        lines
    }
}

impl FromStr for Domain {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "unit_square" | "unit-square" | "square" => Ok(Domain::UnitSquare),
            "l_shape" | "l-shape" | "lshape" => Ok(Domain::LShape),
            other => Err(format!("unknown domain '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshStyle {
    Grid,
    Polygonal,
}

impl FromStr for MeshStyle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "grid" => Ok(MeshStyle::Grid),
            "polygonal" | "voronoi" => Ok(MeshStyle::Polygonal),
            other => Err(format!("unknown mesh style '{other}'")),
        }
    }
}

/// Deterministic initial mesh for `(domain, style, resolution, seed)`.
///
/// Grid style ignores the seed. Polygonal style uses `resolution^2` generators
/// per unit square.
pub fn generate_initial_mesh(
    domain: Domain,
    style: MeshStyle,
    resolution: u32,
    seed: u64,
) -> Result<PolygonMesh, MeshError> {
    assert!(resolution >= 1, "resolution must be >= 1");
    match (domain, style) {
        (Domain::UnitSquare, MeshStyle::Grid) => grid_unit_square(resolution as usize),
        (Domain::LShape, MeshStyle::Grid) => grid_l_shape(resolution as usize),
        (Domain::UnitSquare, MeshStyle::Polygonal) => with_seed_schedule(seed, |s| {
            let square = Domain::UnitSquare.outline();
            let cells = lloyd_cells(&square, resolution as usize, s);
            cells_to_mesh(cells, Domain::UnitSquare)
        }),
        (Domain::LShape, MeshStyle::Polygonal) => {
            with_seed_schedule(seed, |s| polygonal_l_shape(resolution, s))
        }
    }
}

/// Rare seeds leave a cell just under the clearance contract even after edge
/// collapsing; retry on a fixed derived-seed schedule so the output stays
/// deterministic per (resolution, seed).
fn with_seed_schedule(
    seed: u64,
    build: impl Fn(u64) -> Result<PolygonMesh, MeshError>,
) -> Result<PolygonMesh, MeshError> {
    let mut s = seed;
    for attempt in 0..16 {
        match build(s) {
            Err(MeshError::GeneratorRegularity { .. }) if attempt < 15 => {
                s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            }
            other => return other,
        }
    }
    unreachable!("seed schedule is exhausted only after returning")
}

fn grid_unit_square(k: usize) -> Result<PolygonMesh, MeshError> {
    let kf = k as f64;
    let mut vertices = Vec::with_capacity((k + 1) * (k + 1));
    for j in 0..=k {
        for i in 0..=k {
            vertices.push(Vec2::new(i as f64 / kf, j as f64 / kf));
        }
    }
    let vid = |i: usize, j: usize| j * (k + 1) + i;
    let mut elements = Vec::with_capacity(k * k);
    for j in 0..k {
        for i in 0..k {
            elements.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    PolygonMesh::build_topology(vertices, elements)
}

fn grid_l_shape(k: usize) -> Result<PolygonMesh, MeshError> {
    let m = 2 * k;
    let kf = k as f64;
    let coord = |i: usize| -> f64 { i as f64 / kf - 1.0 };
    let keep = |i: usize, j: usize| -> bool { !(i >= k && j < k) };
    let mut id_of = vec![usize::MAX; (m + 1) * (m + 1)];
    let raw = |i: usize, j: usize| j * (m + 1) + i;
    let mut vertices = Vec::new();
    let mut elements = Vec::new();
    for j in 0..m {
        for i in 0..m {
            if !keep(i, j) {
                continue;
            }
            let cell = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let mut ids = Vec::with_capacity(4);
            for (ci, cj) in cell {
                let r = raw(ci, cj);
                if id_of[r] == usize::MAX {
                    id_of[r] = vertices.len();
                    vertices.push(Vec2::new(coord(ci), coord(cj)));
                }
                ids.push(id_of[r]);
            }
            elements.push(ids);
        }
    }
    PolygonMesh::build_topology(vertices, elements)
}

/// Clip a polygon against the half-plane `normal . x <= c` (componentwise
/// interpolation keeps exact coordinates on axis-aligned edges).
fn clip_halfplane(poly: &[Vec2], normal: Vec2, c: f64) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let da = normal.dot(a) - c;
        let db = normal.dot(b) - c;
        if da <= 0.0 {
            out.push(a);
        }
        if (da > 0.0) != (db > 0.0) && da != db {
            let t = da / (da - db);
            out.push(Vec2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
        }
    }
    // drop consecutive duplicates introduced by vertices on the cut line
    let mut dedup: Vec<Vec2> = Vec::with_capacity(out.len());
    for p in out {
        if dedup.last().map_or(true, |q| q.dist(p) > 1e-14) {
            dedup.push(p);
        }
    }
    if dedup.len() >= 2 && dedup[0].dist(*dedup.last().unwrap()) <= 1e-14 {
        dedup.pop();
    }
    dedup
}

fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    let mut a2 = 0.0;
    for i in 0..n {
        a2 += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * a2
}

fn polygon_centroid(poly: &[Vec2]) -> Vec2 {
    let n = poly.len();
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let w = p.cross(q);
        a2 += w;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Vec2::new(cx / (3.0 * a2), cy / (3.0 * a2))
}

/// Voronoi cell of `points[i]` clipped to the convex `domain` polygon,
/// cutting by bisectors to `candidates` ordered by distance.
fn clip_cell(domain: &[Vec2], points: &[Vec2], i: usize, candidates: &[usize]) -> Vec<Vec2> {
    let p = points[i];
    let mut cell = domain.to_vec();
    for &j in candidates {
        let radius = cell.iter().map(|v| v.dist(p)).fold(0.0f64, f64::max);
        let d = points[j].dist(p);
        if d >= 2.0 * radius {
            break;
        }
        let normal = points[j] - p;
        let c = normal.dot(p.midpoint(points[j]));
        cell = clip_halfplane(&cell, normal, c);
        if cell.len() < 3 {
            break;
        }
    }
    cell
}

/// All clipped Voronoi cells. Neighbor candidates come from a bucket grid;
/// whenever the local search radius cannot certify the cell, the exact full
/// scan runs as a fallback.
fn voronoi_cells(domain: &[Vec2], points: &[Vec2]) -> Vec<Vec<Vec2>> {
    let m = points.len();
    let area = polygon_area(domain).abs();
    let spacing = (area / m as f64).sqrt();
    let (lo, _) = super::bounding_box(domain);
    let bucket = |p: Vec2| -> (i64, i64) {
        (((p.x - lo.x) / spacing).floor() as i64, ((p.y - lo.y) / spacing).floor() as i64)
    };
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in points.iter().enumerate() {
        grid.entry(bucket(p)).or_default().push(i);
    }
    const RING: i64 = 5;
    let search_radius = RING as f64 * spacing;
    (0..m)
        .map(|i| {
            let p = points[i];
            let (bx, by) = bucket(p);
            let mut candidates: Vec<usize> = Vec::new();
            for dx in -RING..=RING {
                for dy in -RING..=RING {
                    if let Some(list) = grid.get(&(bx + dx, by + dy)) {
                        candidates.extend(list.iter().copied().filter(|&j| j != i));
                    }
                }
            }
            candidates.sort_by(|&a, &b| {
                points[a].dist(p).partial_cmp(&points[b].dist(p)).unwrap().then(a.cmp(&b))
            });
            let cell = clip_cell(domain, points, i, &candidates);
            let radius = cell.iter().map(|v| v.dist(p)).fold(0.0f64, f64::max);
            if 2.0 * radius <= search_radius {
                return cell;
            }
            // exact fallback over every generator
            let mut all: Vec<usize> = (0..m).filter(|&j| j != i).collect();
            all.sort_by(|&a, &b| {
                points[a].dist(p).partial_cmp(&points[b].dist(p)).unwrap().then(a.cmp(&b))
            });
            clip_cell(domain, points, i, &all)
        })
        .collect()
}

/// `count^2` generators, `LLOYD_ITERATIONS` Lloyd steps, final clipped cells.
fn lloyd_cells(domain: &[Vec2], count: usize, seed: u64) -> Vec<Vec<Vec2>> {
    let m = count * count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = super::bounding_box(domain);
    let mut points: Vec<Vec2> = Vec::with_capacity(m);
    while points.len() < m {
        let p = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        // domain polygons here are convex (squares); containment by halfplanes
        let inside = (0..domain.len()).all(|k| {
            let a = domain[k];
            let b = domain[(k + 1) % domain.len()];
            (b - a).cross(p - a) > 0.0
        });
        if inside {
            points.push(p);
        }
    }
    for _ in 0..LLOYD_ITERATIONS {
        let cells = voronoi_cells(domain, &points);
        for (i, cell) in cells.iter().enumerate() {
            if cell.len() >= 3 {
                points[i] = polygon_centroid(cell);
            }
        }
    }
    voronoi_cells(domain, &points)
}

fn polygonal_l_shape(resolution: u32, seed: u64) -> Result<PolygonMesh, MeshError> {
    // mesh the lower-left square, then mirror across y=0 and point-reflect
    // through the origin; reflections are exact so interfaces conform
    let ll_square = vec![
        Vec2::new(-1.0, -1.0),
        Vec2::new(0.0, -1.0),
        Vec2::new(0.0, 0.0),
        Vec2::new(-1.0, 0.0),
    ];
    let ll = lloyd_cells(&ll_square, resolution as usize, seed);
    let mut cells: Vec<Vec<Vec2>> = Vec::with_capacity(3 * ll.len());
    cells.extend(ll.iter().cloned());
    for cell in &ll {
        // mirror across y = 0: orientation flips, so reverse
        let mut up: Vec<Vec2> = cell.iter().map(|p| Vec2::new(p.x, -p.y)).collect();
        up.reverse();
        cells.push(up);
    }
    for cell in &ll {
        // point reflection through the origin preserves orientation
        cells.push(cell.iter().map(|p| Vec2::new(-p.x, -p.y)).collect());
    }
    cells_to_mesh(cells, Domain::LShape)
}

/// Merge per-cell polygons into a vertex/element mesh, collapse short edges,
/// and validate the generator contract.
fn cells_to_mesh(cells: Vec<Vec<Vec2>>, domain: Domain) -> Result<PolygonMesh, MeshError> {
    let domain_area = domain.area();
    for cell in &cells {
        if cell.len() < 3 || polygon_area(cell) < 1e-12 * domain_area {
            return Err(MeshError::DegenerateCell(if cell.len() < 3 {
                0.0
            } else {
                polygon_area(cell)
            }));
        }
    }

    // quantized vertex merge (first occurrence wins)
    let diam = 2.0 * domain_area.sqrt();
    let q = 1e-9 * diam;
    let mut positions: Vec<Vec2> = Vec::new();
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let quantize = |p: Vec2| ((p.x / q).round() as i64, (p.y / q).round() as i64);
    let mut id_cells: Vec<Vec<usize>> = Vec::with_capacity(cells.len());
    for cell in &cells {
        let mut ids = Vec::with_capacity(cell.len());
        for &p in cell {
            let (kx, ky) = quantize(p);
            let mut found = None;
            'search: for bx in (kx - 1)..=(kx + 1) {
                for by in (ky - 1)..=(ky + 1) {
                    if let Some(list) = buckets.get(&(bx, by)) {
                        for &v in list {
                            if positions[v].dist(p) <= q {
                                found = Some(v);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let v = found.unwrap_or_else(|| {
                let v = positions.len();
                positions.push(p);
                buckets.entry((kx, ky)).or_default().push(v);
                v
            });
            if ids.last() != Some(&v) {
                ids.push(v);
            }
        }
        if ids.len() >= 2 && ids[0] == *ids.last().unwrap() {
            ids.pop();
        }
        id_cells.push(ids);
    }

    collapse_short_edges(&mut positions, &mut id_cells, domain);

    // compact vertex ids
    let mut remap = vec![usize::MAX; positions.len()];
    let mut compact: Vec<Vec2> = Vec::new();
    for cell in &id_cells {
        for &v in cell {
            if remap[v] == usize::MAX {
                remap[v] = compact.len();
                compact.push(positions[v]);
            }
        }
    }
    for cell in &mut id_cells {
        for v in cell.iter_mut() {
            *v = remap[*v];
        }
    }

    let mesh = PolygonMesh::build_topology(compact, id_cells)?;
    if (mesh.total_area() - domain_area).abs() > 1e-10 * domain_area {
        return Err(MeshError::DegenerateCell(mesh.total_area() - domain_area));
    }
    let report = mesh.regularity_report();
    if report.aspect_max > 10.0 || report.clearance_min < 0.05 {
        return Err(MeshError::GeneratorRegularity {
            c1: report.aspect_max,
            c2: report.clearance_min,
        });
    }
    Ok(mesh)
}

/// Collapse near-degenerate Voronoi edges that would break the clearance
/// bound. Domain corners never move; boundary vertices only slide along their
/// own boundary line.
fn collapse_short_edges(positions: &mut Vec<Vec2>, cells: &mut [Vec<usize>], domain: Domain) {
    let mut skipped: HashSet<(usize, usize)> = HashSet::new();
    for _pass in 0..positions.len() {
        // size proxy per vertex: sqrt of the smallest incident cell area
        let mut vertex_size = vec![f64::INFINITY; positions.len()];
        for cell in cells.iter() {
            let poly: Vec<Vec2> = cell.iter().map(|&v| positions[v]).collect();
            let size = polygon_area(&poly).max(0.0).sqrt();
            for &v in cell {
                vertex_size[v] = vertex_size[v].min(size);
            }
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for cell in cells.iter() {
            if cell.len() <= 3 {
                continue;
            }
            for k in 0..cell.len() {
                let u = cell[k];
                let v = cell[(k + 1) % cell.len()];
                let key = (u.min(v), u.max(v));
                if skipped.contains(&key) {
                    continue;
                }
                let len = positions[u].dist(positions[v]);
                let thr = SHORT_EDGE_FRACTION * vertex_size[u].min(vertex_size[v]);
                if len < thr && best.map_or(true, |(l, _, _)| len < l) {
                    best = Some((len, key.0, key.1));
                }
            }
        }
        let Some((_, u, v)) = best else { break };
        // a triangle cell containing the edge cannot lose a corner
        let blocks = cells.iter().any(|c| {
            c.len() == 3 && c.contains(&u) && c.contains(&v)
        });
        let lines_u = domain.boundary_lines(positions[u]);
        let lines_v = domain.boundary_lines(positions[v]);
        let target = if blocks {
            None
        } else {
            match (lines_u.len(), lines_v.len()) {
                (0, 0) => Some(positions[u].midpoint(positions[v])),
                (_, 0) => Some(positions[u]),
                (0, _) => Some(positions[v]),
                (1, 1) if lines_u == lines_v => Some(positions[u].midpoint(positions[v])),
                (1, _) if lines_v.len() >= 2 && lines_v.contains(&lines_u[0]) => {
                    Some(positions[v])
                }
                (_, 1) if lines_u.len() >= 2 && lines_u.contains(&lines_v[0]) => {
                    Some(positions[u])
                }
                _ => None,
            }
        };
        match target {
            None => {
                skipped.insert((u, v));
            }
            Some(pos) => {
                positions[u] = pos;
                for cell in cells.iter_mut() {
                    for w in cell.iter_mut() {
                        if *w == v {
                            *w = u;
                        }
                    }
                    cell.dedup();
                    if cell.len() >= 2 && cell[0] == *cell.last().unwrap() {
                        cell.pop();
                    }
                }
            }
        }
    }
}
