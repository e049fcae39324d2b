//! Numerical integration on convex polygons and facets.
//!
//! Polygon rules fan-triangulate the element from its centroid, split each
//! fan triangle at the outer-edge midpoint, and apply a collapsed Gauss
//! product rule on each half with the collapse placed at the polygon corner
//! and the radial coordinate substituted `u = s^2`. The substitution clusters
//! nodes toward the corners, where the rational Wachspress integrands vary
//! fastest (flat corners push the weight-function zeros close to the
//! boundary), while keeping exactness for bivariate polynomials up to the
//! requested total degree; all weights stay positive and all nodes strictly
//! interior.
//!
//! Facet rules are plain Gauss-Legendre on the segment.

use crate::mesh::ElementGeometry;
use crate::vec2::Vec2;
use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("unsupported polygon rule degree {0} (supported: 2..=12)")]
    UnsupportedDegree(usize),
    #[error("unsupported facet point count {0} (supported: 1..=16)")]
    UnsupportedCount(usize),
}

/// Points and positive weights; weights sum to the region measure.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

/// A facet rule: parameters along the segment, mapped points, and weights
/// summing to the segment length.
#[derive(Clone, Debug)]
pub struct FacetRule {
    pub params: Vec<f64>,
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

/// Radial clustering exponent of the corner-collapsed parametrization.
const RADIAL_EXPONENT: i32 = 2;

/// Gauss-Legendre nodes/weights on [-1, 1] (weights sum to 2).
fn gauss_legendre_raw(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Chebyshev-based initial guess, then Newton on P_m
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * d * d);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (1.0, 0.0);
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

static GL_CACHE: Lazy<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Gauss-Legendre rule on [0, 1] (weights sum to 1), cached per point count.
pub fn gauss_legendre_unit(m: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    let mut cache = GL_CACHE.lock().unwrap();
    cache
        .entry(m)
        .or_insert_with(|| {
            let (x, w) = gauss_legendre_raw(m);
            let t: Vec<f64> = x.iter().map(|&v| 0.5 * (v + 1.0)).collect();
            let wt: Vec<f64> = w.iter().map(|&v| 0.5 * v).collect();
            Arc::new((t, wt))
        })
        .clone()
}

/// Barycentric node pattern on a triangle with relative weights summing to 1.
type TrianglePattern = Vec<([f64; 3], f64)>;

static TRI_CACHE: Lazy<Mutex<HashMap<usize, Arc<TrianglePattern>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Corner-collapsed pattern on the triangle (C, P, Q), with the collapse and
/// the radial `u = s^RADIAL_EXPONENT` clustering at the first vertex.
fn triangle_pattern(degree: usize) -> Arc<TrianglePattern> {
    let mut cache = TRI_CACHE.lock().unwrap();
    cache
        .entry(degree)
        .or_insert_with(|| {
            let p = RADIAL_EXPONENT;
            // Exactness for degree d needs 2 m_s - 1 >= p d + 2p - 1 and
            // 2 m_v - 1 >= d. The orders below exceed that on purpose: the
            // rational basis integrands (stiffness entries in particular)
            // vary sharply near flat corners, and degree+6 / degree+8 holds
            // their error below 1e-9 relative over the admissible polygon
            // family. Exactness is preserved by construction.
            let m_s = degree + 6;
            let m_v = degree + 8;
            let gs = gauss_legendre_unit(m_s);
            let gv = gauss_legendre_unit(m_v);
            let mut pattern: TrianglePattern = Vec::with_capacity(m_s * m_v);
            for (&s, &ws) in gs.0.iter().zip(&gs.1) {
                let u = s.powi(p);
                let jac = 2.0 * p as f64 * s.powi(2 * p - 1);
                for (&v, &wv) in gv.0.iter().zip(&gv.1) {
                    let bary = [1.0 - u, u * (1.0 - v), u * v];
                    pattern.push((bary, jac * ws * wv));
                }
            }
            Arc::new(pattern)
        })
        .clone()
}

/// Composite rule over the polygon, exact for total degree <= `degree`.
pub fn polygon_rule(geo: &ElementGeometry, degree: usize) -> Result<QuadratureRule, QuadratureError> {
    if !(2..=12).contains(&degree) {
        return Err(QuadratureError::UnsupportedDegree(degree));
    }
    let pattern = triangle_pattern(degree);
    let n = geo.n();
    let apex = geo.centroid;
    let mut points = Vec::with_capacity(2 * n * pattern.len());
    let mut weights = Vec::with_capacity(2 * n * pattern.len());
    for i in 0..n {
        let a = geo.corners[i];
        let b = geo.corners[(i + 1) % n];
        let m = a.midpoint(b);
        // two corner-collapsed halves per fan triangle
        for (c, p0, q0) in [(a, m, apex), (b, apex, m)] {
            let area = 0.5 * (p0 - c).cross(q0 - c);
            for &(bary, w) in pattern.iter() {
                let p = c * bary[0] + p0 * bary[1] + q0 * bary[2];
                points.push(p);
                weights.push(w * area);
            }
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Gauss-Legendre rule on the segment `[p0, p1]`.
pub fn facet_rule(p0: Vec2, p1: Vec2, npoints: usize) -> Result<FacetRule, QuadratureError> {
    if !(1..=16).contains(&npoints) {
        return Err(QuadratureError::UnsupportedCount(npoints));
    }
    let gl = gauss_legendre_unit(npoints);
    let len = p0.dist(p1);
    let points = gl.0.iter().map(|&t| p0 + (p1 - p0) * t).collect();
    let weights = gl.1.iter().map(|&w| w * len).collect();
    Ok(FacetRule { params: gl.0.clone(), points, weights })
}

/// Unit-interval rule (params, weights with sum 1) for trace integrals.
pub fn facet_rule_on_segment(npoints: usize) -> (Vec<f64>, Vec<f64>) {
    let gl = gauss_legendre_unit(npoints);
    (gl.0.clone(), gl.1.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::eval_basis_h1;
    use crate::verify::sample_regular_polygon;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_square_geo() -> ElementGeometry {
        ElementGeometry::from_corners(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    fn integrate(rule: &QuadratureRule, f: impl Fn(Vec2) -> f64) -> f64 {
        rule.points.iter().zip(&rule.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    #[test]
    fn weights_positive_sum_to_area_points_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 3..=8 {
            let geo = sample_regular_polygon(&mut rng, n);
            for degree in [2usize, 5, 8, 12] {
                let rule = polygon_rule(&geo, degree).unwrap();
                assert!(rule.weights.iter().all(|&w| w > 0.0));
                let sum: f64 = rule.weights.iter().sum();
                assert!((sum - geo.area).abs() <= 1e-13 * geo.area);
                for &p in &rule.points {
                    assert!((0..n).all(|j| geo.edge_distance(j, p) > 0.0));
                }
            }
        }
    }

    #[test]
    fn polynomial_exactness_on_unit_square() {
        let geo = unit_square_geo();
        let rule = polygon_rule(&geo, 2).unwrap();
        assert!((integrate(&rule, |_| 1.0) - 1.0).abs() < 1e-14);
        let rule = polygon_rule(&geo, 4).unwrap();
        let v = integrate(&rule, |p| p.x * p.x * p.y * p.y);
        assert!((v - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn hexagon_area() {
        let corners: Vec<Vec2> = (0..6)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 6.0;
                Vec2::new(a.cos(), a.sin())
            })
            .collect();
        let geo = ElementGeometry::from_corners(corners).unwrap();
        let rule = polygon_rule(&geo, 3).unwrap();
        let area = integrate(&rule, |_| 1.0);
        let exact = 1.5 * 3.0f64.sqrt();
        assert!((area - exact).abs() < 1e-13 * exact);
    }

    #[test]
    fn monomial_exactness_random_polygons() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [4usize, 6] {
            let geo = sample_regular_polygon(&mut rng, n);
            let reference = polygon_rule(&geo, 12).unwrap();
            for degree in [2usize, 4, 8] {
                let rule = polygon_rule(&geo, degree).unwrap();
                for (a, b) in [(0usize, 2usize), (2, 2), (3, 1), (4, 4)] {
                    if a + b > degree {
                        continue;
                    }
                    let f = |p: Vec2| p.x.powi(a as i32) * p.y.powi(b as i32);
                    let lhs = integrate(&rule, f);
                    let rhs = integrate(&reference, f);
                    assert!(
                        (lhs - rhs).abs() <= 1e-13 * rhs.abs().max(geo.area),
                        "deg {degree} monomial ({a},{b}): {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn rational_self_convergence() {
        // basis products are rational; degree 8 vs 12 must agree tightly
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 3..=8 {
            let geo = sample_regular_polygon(&mut rng, n);
            let r8 = polygon_rule(&geo, 8).unwrap();
            let r12 = polygon_rule(&geo, 12).unwrap();
            let f = |p: Vec2| {
                let b = eval_basis_h1(&geo, p).unwrap();
                b.values[0] * b.values[1 % n]
            };
            let v8 = integrate(&r8, f);
            let v12 = integrate(&r12, f);
            assert!(
                (v8 - v12).abs() <= 1e-9 * geo.area,
                "n={n}: {v8} vs {v12}, diff {}",
                (v8 - v12).abs()
            );
        }
    }

    #[test]
    fn gradient_product_stability() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [4usize, 6, 8] {
            let geo = sample_regular_polygon(&mut rng, n);
            let mut k8 = vec![0.0; n * n];
            let mut k12 = vec![0.0; n * n];
            for (rule, out) in [(polygon_rule(&geo, 8).unwrap(), &mut k8),
                (polygon_rule(&geo, 12).unwrap(), &mut k12)]
            {
                for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                    let b = eval_basis_h1(&geo, p).unwrap();
                    for i in 0..n {
                        for j in 0..n {
                            out[i * n + j] += w * b.gradients[i].dot(b.gradients[j]);
                        }
                    }
                }
            }
            let frob: f64 = k12.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff: f64 =
                k8.iter().zip(&k12).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(diff <= 1e-8 * frob, "n={n}: diff {diff} vs frob {frob}");
        }
    }

    #[test]
    fn facet_rule_basics() {
        let r = facet_rule(Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), 4).unwrap();
        let total: f64 = r.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        // t^5 on [0,1] with 3 points (exact to degree 5)
        let (ts, ws) = facet_rule_on_segment(3);
        let v: f64 = ts.iter().zip(&ws).map(|(&t, &w)| w * t.powi(5)).sum();
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn facet_rational_jump_self_convergence() {
        // normal-derivative trace of a hat function across two unit squares
        let left = unit_square_geo();
        let right = ElementGeometry::from_corners(vec![
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, 1.0),
        ])
        .unwrap();
        let jump = |t: f64| {
            use crate::basis::eval_basis_on_edge;
            let n = Vec2::new(1.0, 0.0);
            // shared vertex (1,0): index 1 in left, 0 in right
            let bl = eval_basis_on_edge(&left, 1, t).unwrap();
            let br = eval_basis_on_edge(&right, 3, 1.0 - t).unwrap();
            let g = bl.gradients[1] - br.gradients[0];
            g.dot(n)
        };
        let int_with = |m: usize| -> f64 {
            let (ts, ws) = facet_rule_on_segment(m);
            ts.iter().zip(&ws).map(|(&t, &w)| w * jump(t) * jump(t)).sum()
        };
        let v8 = int_with(8);
        let v16 = int_with(16);
        assert!((v8 - v16).abs() <= 1e-10 * v16.abs(), "{v8} vs {v16}");
    }

    #[test]
    fn unsupported_parameters_rejected() {
        let geo = unit_square_geo();
        assert!(matches!(polygon_rule(&geo, 1), Err(QuadratureError::UnsupportedDegree(1))));
        assert!(matches!(polygon_rule(&geo, 13), Err(QuadratureError::UnsupportedDegree(13))));
        assert!(matches!(
            facet_rule(Vec2::ZERO, Vec2::new(1.0, 0.0), 0),
            Err(QuadratureError::UnsupportedCount(0))
        ));
        assert!(matches!(
            facet_rule(Vec2::ZERO, Vec2::new(1.0, 0.0), 17),
            Err(QuadratureError::UnsupportedCount(17))
        ));
    }
}
