//! Wachspress coordinates on convex polygons.
//!
//! For a convex CCW n-gon with corners `a_i`, edge normals `n_i` and edge
//! distances `h_i(x) = (a_i - x) . n_i`, the weights are
//! `w_i = M_i prod_{j != i-1, i} h_j` with `M_i = n_{i-1} x n_i`, and the
//! coordinates are `lambda_i = w_i / W`, `W = sum w_j`. Derivatives come from
//! exact product-rule sums over the affine factors (`grad h_j = -n_j`), never
//! from numeric differentiation: the Laplacians feed the volume residual of
//! the error estimator and must be cheap and accurate.
//!
//! All internal arithmetic runs on distances normalized by the element
//! diameter, in order of increasing magnitude, so every intermediate stays
//! O(1) for diameters anywhere in `1e-6 .. 1e+6`.

use crate::mesh::{ElementGeometry, MAX_POLY_VERTS};
use crate::vec2::{Mat2, Vec2};
use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("point ({0}, {1}) lies outside the element")]
    PointOutsideElement(f64, f64),
    #[error("point ({0}, {1}) lies on the element boundary; use the edge branch")]
    PointOnBoundary(f64, f64),
    #[error("edge index {index} out of range for an element with {n} edges")]
    BadEdgeIndex { index: usize, n: usize },
    #[error("vertex count mismatch: reference {reference}, target {target}")]
    VertexCountMismatch { reference: usize, target: usize },
}

/// Raw weight data at one point (physical units).
#[derive(Clone, Debug)]
pub struct WeightEval {
    pub weights: Vec<f64>,
    pub weight_gradients: Vec<Vec2>,
    pub weight_laplacians: Vec<f64>,
    pub total: f64,
    pub total_gradient: Vec2,
    pub total_laplacian: f64,
    pub point: Vec2,
}

/// Values, gradients, and Laplacians of all coordinates of one element at one
/// point.
#[derive(Clone, Debug, Default)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub gradients: Vec<Vec2>,
    /// Empty when the evaluation was requested without second derivatives.
    pub laplacians: Vec<f64>,
    pub point: Vec2,
}

/// Image point, Jacobian, and Jacobian determinant of the polygon-to-polygon
/// map built from reference-element coordinates.
#[derive(Clone, Copy, Debug)]
pub struct MapEval {
    pub point: Vec2,
    pub jacobian: Mat2,
    pub det: f64,
}

/// Boundary-snap threshold for normalized edge distances.
const BOUNDARY_SNAP: f64 = 1e-13;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Depth {
    Values,
    Gradients,
    Full,
}

/// Scaled-coordinate weight machinery shared by the interior and edge
/// branches. `h` holds the normalized edge distances at the point; entries
/// may be exactly zero on the boundary.
struct ScaledWeights {
    n: usize,
    w: [f64; MAX_POLY_VERTS],
    grad: [Vec2; MAX_POLY_VERTS],
    lap: [f64; MAX_POLY_VERTS],
    total: f64,
    total_grad: Vec2,
    total_lap: f64,
}

fn scaled_weights(geo: &ElementGeometry, h: &[f64], depth: Depth) -> ScaledWeights {
    let n = geo.n();
    // accumulate products in order of increasing magnitude
    let mut order: [usize; MAX_POLY_VERTS] = [0; MAX_POLY_VERTS];
    for (k, slot) in order.iter_mut().take(n).enumerate() {
        *slot = k;
    }
    order[..n].sort_unstable_by(|&a, &b| h[a].abs().partial_cmp(&h[b].abs()).unwrap());
    let order = &order[..n];

    let prod = |skip: &[usize]| -> f64 {
        let mut p = 1.0;
        'outer: for &j in order {
            for &s in skip {
                if j == s {
                    continue 'outer;
                }
            }
            p *= h[j];
        }
        p
    };

    let mut out = ScaledWeights {
        n,
        w: [0.0; MAX_POLY_VERTS],
        grad: [Vec2::ZERO; MAX_POLY_VERTS],
        lap: [0.0; MAX_POLY_VERTS],
        total: 0.0,
        total_grad: Vec2::ZERO,
        total_lap: 0.0,
    };
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let m_i = geo.normal_cross[i];
        out.w[i] = m_i * prod(&[prev, i]);
        out.total += out.w[i];
        if depth == Depth::Values {
            continue;
        }
        let mut g = Vec2::ZERO;
        for k in 0..n {
            if k == prev || k == i {
                continue;
            }
            g += geo.normals[k] * (-m_i * prod(&[prev, i, k]));
        }
        out.grad[i] = g;
        out.total_grad += g;
        if depth != Depth::Full {
            continue;
        }
        let mut lap = 0.0;
        for k in 0..n {
            if k == prev || k == i {
                continue;
            }
            for l in (k + 1)..n {
                if l == prev || l == i {
                    continue;
                }
                lap += 2.0 * geo.normals[k].dot(geo.normals[l]) * prod(&[prev, i, k, l]);
            }
        }
        out.lap[i] = m_i * lap;
        out.total_lap += out.lap[i];
    }
    out
}

/// Turns scaled weights into coordinates, rescaling derivatives back to
/// physical units by the element diameter. Writes into `out`, reusing its
/// buffers.
fn fill_basis(sw: &ScaledWeights, diameter: f64, point: Vec2, depth: Depth, out: &mut BasisEval) {
    let n = sw.n;
    let inv_w = 1.0 / sw.total;
    out.point = point;
    out.values.clear();
    out.gradients.clear();
    out.laplacians.clear();
    for i in 0..n {
        out.values.push(sw.w[i] * inv_w);
    }
    if depth == Depth::Values {
        return;
    }
    let mut scaled_grads: [Vec2; MAX_POLY_VERTS] = [Vec2::ZERO; MAX_POLY_VERTS];
    for i in 0..n {
        let g = (sw.grad[i] - sw.total_grad * out.values[i]) * inv_w;
        scaled_grads[i] = g;
        out.gradients.push(g / diameter);
    }
    if depth == Depth::Full {
        let inv_d2 = 1.0 / (diameter * diameter);
        for i in 0..n {
            let lap = (sw.lap[i]
                - 2.0 * scaled_grads[i].dot(sw.total_grad)
                - out.values[i] * sw.total_lap)
                * inv_w;
            out.laplacians.push(lap * inv_d2);
        }
    }
}

fn normalized_distances(geo: &ElementGeometry, p: Vec2) -> [f64; MAX_POLY_VERTS] {
    let mut h = [0.0; MAX_POLY_VERTS];
    let inv = 1.0 / geo.diameter;
    for j in 0..geo.n() {
        h[j] = geo.edge_distance(j, p) * inv;
    }
    h
}

fn check_interior(geo: &ElementGeometry, h: &[f64], p: Vec2) -> Result<(), BasisError> {
    let mut min_h = f64::INFINITY;
    for &v in &h[..geo.n()] {
        min_h = min_h.min(v);
    }
    if min_h < -1e-12 {
        return Err(BasisError::PointOutsideElement(p.x, p.y));
    }
    if min_h <= BOUNDARY_SNAP {
        return Err(BasisError::PointOnBoundary(p.x, p.y));
    }
    Ok(())
}

/// O(n) interior evaluation: dividing every weight by the full distance
/// product leaves `z_i = M_i / (h_{i-1} h_i)`, the common factor cancels in
/// each quotient, and the derivatives of `z_i` are closed forms in the
/// inverse distances (`grad h_j = -n_j`):
/// `grad z_i = z_i (n_{i-1} r_{i-1} + n_i r_i)` and
/// `lap z_i = 2 z_i (r_{i-1}^2 + r_i^2 + (n_{i-1} . n_i) r_{i-1} r_i)`
/// with `r_j = 1 / h_j`. Requires strictly positive distances.
fn scaled_weights_inverse(geo: &ElementGeometry, h: &[f64], depth: Depth) -> ScaledWeights {
    let n = geo.n();
    let mut r = [0.0; MAX_POLY_VERTS];
    for j in 0..n {
        r[j] = 1.0 / h[j];
    }
    let mut out = ScaledWeights {
        n,
        w: [0.0; MAX_POLY_VERTS],
        grad: [Vec2::ZERO; MAX_POLY_VERTS],
        lap: [0.0; MAX_POLY_VERTS],
        total: 0.0,
        total_grad: Vec2::ZERO,
        total_lap: 0.0,
    };
    for i in 0..n {
        let a = (i + n - 1) % n;
        let z = geo.normal_cross[i] * r[a] * r[i];
        out.w[i] = z;
        out.total += z;
        if depth == Depth::Values {
            continue;
        }
        let na = geo.normals[a];
        let ni = geo.normals[i];
        let g = (na * r[a] + ni * r[i]) * z;
        out.grad[i] = g;
        out.total_grad += g;
        if depth == Depth::Full {
            let lap =
                2.0 * z * (r[a] * r[a] + r[i] * r[i] + na.dot(ni) * r[a] * r[i]);
            out.lap[i] = lap;
            out.total_lap += lap;
        }
    }
    out
}

fn eval_into(
    geo: &ElementGeometry,
    p: Vec2,
    depth: Depth,
    out: &mut BasisEval,
) -> Result<(), BasisError> {
    let h = normalized_distances(geo, p);
    check_interior(geo, &h, p)?;
    let sw = scaled_weights_inverse(geo, &h[..geo.n()], depth);
    fill_basis(&sw, geo.diameter, p, depth, out);
    Ok(())
}

/// Weights and their derivatives at an interior point (physical units).
pub fn eval_weights(geo: &ElementGeometry, p: Vec2) -> Result<WeightEval, BasisError> {
    let h = normalized_distances(geo, p);
    check_interior(geo, &h, p)?;
    let sw = scaled_weights(geo, &h[..geo.n()], Depth::Full);
    let n = geo.n();
    let d = geo.diameter;
    // w scales like d^(n-2), grad w like d^(n-3), lap w like d^(n-4)
    let wf = d.powi(n as i32 - 2);
    let gf = d.powi(n as i32 - 3);
    let lf = d.powi(n as i32 - 4);
    Ok(WeightEval {
        weights: (0..n).map(|i| sw.w[i] * wf).collect(),
        weight_gradients: (0..n).map(|i| sw.grad[i] * gf).collect(),
        weight_laplacians: (0..n).map(|i| sw.lap[i] * lf).collect(),
        total: sw.total * wf,
        total_gradient: sw.total_grad * gf,
        total_laplacian: sw.total_lap * lf,
        point: p,
    })
}

/// Coordinates with gradients and Laplacians at an interior point.
pub fn eval_basis(geo: &ElementGeometry, p: Vec2) -> Result<BasisEval, BasisError> {
    let mut out = BasisEval::default();
    eval_into(geo, p, Depth::Full, &mut out)?;
    Ok(out)
}

/// As [`eval_basis`], reusing the buffers of `out`.
pub fn eval_basis_into(
    geo: &ElementGeometry,
    p: Vec2,
    out: &mut BasisEval,
) -> Result<(), BasisError> {
    eval_into(geo, p, Depth::Full, out)
}

/// Values and gradients only; the hot path of stiffness assembly.
pub fn eval_basis_h1(geo: &ElementGeometry, p: Vec2) -> Result<BasisEval, BasisError> {
    let mut out = BasisEval::default();
    eval_into(geo, p, Depth::Gradients, &mut out)?;
    Ok(out)
}

/// As [`eval_basis_h1`], reusing the buffers of `out`.
pub fn eval_basis_h1_into(
    geo: &ElementGeometry,
    p: Vec2,
    out: &mut BasisEval,
) -> Result<(), BasisError> {
    eval_into(geo, p, Depth::Gradients, out)
}

/// Boundary branch: evaluates on edge `edge` at parameter `t` in `[0, 1]`.
///
/// Distances that vanish on the boundary are snapped to exact zeros; the
/// rational quotients stay finite there (the total weight is positive on the
/// closed polygon), so the interior formulas evaluate to their one-sided
/// limits without cancellation.
pub fn eval_basis_on_edge(
    geo: &ElementGeometry,
    edge: usize,
    t: f64,
) -> Result<BasisEval, BasisError> {
    let n = geo.n();
    if edge >= n {
        return Err(BasisError::BadEdgeIndex { index: edge, n });
    }
    assert!((-1e-12..=1.0 + 1e-12).contains(&t), "edge parameter out of [0,1]: {t}");
    let a = geo.corners[edge];
    let b = geo.corners[(edge + 1) % n];
    let p = Vec2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
    let mut h = normalized_distances(geo, p);
    h[edge] = 0.0;
    for v in h.iter_mut().take(n) {
        if v.abs() <= BOUNDARY_SNAP {
            *v = 0.0;
        }
    }
    let sw = scaled_weights(geo, &h[..n], Depth::Full);
    let mut out = BasisEval::default();
    fill_basis(&sw, geo.diameter, p, Depth::Full, &mut out);
    Ok(out)
}

static REFERENCE_CACHE: Lazy<Mutex<HashMap<usize, Arc<ElementGeometry>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// The regular reference n-gon scaled to diameter exactly 1, with vertices at
/// angles `2 pi k / n + pi/2 - pi/n`.
pub fn reference_polygon(n: usize) -> Arc<ElementGeometry> {
    let mut cache = REFERENCE_CACHE.lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            let circumradius = if n % 2 == 0 {
                0.5
            } else {
                // odd n-gon: diameter joins a vertex and an opposite edge pair
                0.5 / (std::f64::consts::PI / (2.0 * n as f64)).cos()
            };
            let corners: Vec<Vec2> = (0..n)
                .map(|k| {
                    let ang = std::f64::consts::TAU * k as f64 / n as f64
                        + std::f64::consts::FRAC_PI_2
                        - std::f64::consts::PI / n as f64;
                    Vec2::new(circumradius * ang.cos(), circumradius * ang.sin())
                })
                .collect();
            Arc::new(ElementGeometry::from_corners(corners).expect("regular polygon"))
        })
        .clone()
}

/// Evaluates the map `F(x) = sum lambda_i(x) a_i` from the reference polygon
/// onto `target`, together with its Jacobian.
pub fn eval_map(
    reference: &ElementGeometry,
    target: &ElementGeometry,
    ref_point: Vec2,
) -> Result<MapEval, BasisError> {
    if reference.n() != target.n() {
        return Err(BasisError::VertexCountMismatch {
            reference: reference.n(),
            target: target.n(),
        });
    }
    let basis = eval_basis_h1(reference, ref_point)?;
    Ok(map_from_basis(&basis, target))
}

/// Map evaluation from an already computed reference-basis evaluation.
pub fn map_from_basis(reference_basis: &BasisEval, target: &ElementGeometry) -> MapEval {
    let mut point = Vec2::ZERO;
    let mut jac = Mat2::default();
    for (i, &a) in target.corners.iter().enumerate() {
        point += a * reference_basis.values[i];
        jac = jac.add(Mat2::outer(a, reference_basis.gradients[i]));
    }
    MapEval { point, jacobian: jac, det: jac.det() }
}

/// Independent determinant route: the triple-determinant expansion
/// `det J = 2 sum_{i<j<k} D(l_i, l_j, l_k) A(a_i, a_j, a_k)`.
pub fn det_jacobian_expansion(reference_basis: &BasisEval, target: &ElementGeometry) -> f64 {
    let n = target.n();
    let v = &reference_basis.values;
    let g = &reference_basis.gradients;
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let d = v[i] * (g[j].x * g[k].y - g[j].y * g[k].x)
                    - v[j] * (g[i].x * g[k].y - g[i].y * g[k].x)
                    + v[k] * (g[i].x * g[j].y - g[i].y * g[j].x);
                let (a, b, c) = (target.corners[i], target.corners[j], target.corners[k]);
                let area = 0.5 * ((b - a).cross(c - a));
                sum += d * area;
            }
        }
    }
    2.0 * sum
}
