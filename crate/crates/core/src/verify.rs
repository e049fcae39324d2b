//! Numerical verification of the geometric inequalities behind the method.
//!
//! Each check samples shape-regular random polygons, evaluates a scale-free
//! ratio (derivative bounds, Jacobian bounds, inverse estimates, trace
//! constants), and records the observed bracket. The inequalities only assert
//! existence of constants depending on the regularity parameters, so the
//! brackets below are recorded observations kept as regression baselines; the
//! hard guarantees are positivity where required and scale invariance of
//! every ratio.

use crate::basis::{
    det_jacobian_expansion, eval_basis, eval_basis_h1, eval_basis_on_edge, map_from_basis,
    reference_polygon,
};
use crate::mesh::{polygon_shape, ElementGeometry};
use crate::quadrature::{facet_rule_on_segment, polygon_rule};
use crate::vec2::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// Sampler acceptance bounds (stricter than any mesh the solver produces).
const SAMPLE_ASPECT_MAX: f64 = 6.0; // C1
const SAMPLE_CLEARANCE_MIN: f64 = 0.1; // C2
const SAMPLE_ANGLE_MIN_DEG: f64 = 20.0;
const SAMPLE_ANGLE_MAX_DEG: f64 = 160.0;

/// Observed ratio brackets, committed as regression baselines. Values are
/// empirical maxima over the default sample sets, rounded up with headroom.
pub mod brackets {
    /// max |grad lambda| * h_T
    pub const GRADIENT_RATIO_MAX: f64 = 30.0;
    /// max |hessian lambda| * h_T^2
    pub const HESSIAN_RATIO_MAX: f64 = 700.0;
    /// min det J / h_T^2 over shape-regular samples
    pub const DET_RATIO_MIN: f64 = 0.01;
    /// max det J / h_T^2
    pub const DET_RATIO_MAX: f64 = 12.0;
    /// max ||J||_2 / h_T
    pub const JACOBIAN_NORM_RATIO_MAX: f64 = 12.0;
    /// max ||J^{-1}||_2 * h_T
    pub const JACOBIAN_INV_RATIO_MAX: f64 = 60.0;
    /// max |v|_{1,T} h_T / ||v||_{0,T} over span{lambda_i, lap lambda_i}
    pub const INVERSE_RATIO_MAX: f64 = 60.0;
    /// max ||d_t v||_e h_e / ||v||_e over edge normal-derivative traces
    pub const EDGE_INVERSE_RATIO_MAX: f64 = 40.0;
    /// max ||v||_inf h_e^{1/2} / ||v||_e on edges
    pub const EDGE_SUP_RATIO_MAX: f64 = 6.0;
    /// max ||v||_e / (h^{-1/2}||v|| + h^{1/2}|v|_1)
    pub const TRACE_RATIO_MAX: f64 = 5.0;
}

/// One verified statement: the sampled scale-free ratio and its bracket.
#[derive(Clone, Debug)]
pub struct LemmaReport {
    pub lemma: &'static str,
    pub samples: String,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Secondary ratio where the statement bounds two quantities.
    pub aux_max: Option<f64>,
    /// Largest relative drift of any sampled ratio under uniform scaling.
    pub scale_drift: f64,
    pub pass: bool,
}

impl LemmaReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}: {}", self.lemma, if self.pass { "PASS" } else { "FAIL" });
        let _ = writeln!(s, "  samples: {}", self.samples);
        let _ = writeln!(s, "  ratio range: [{:.6e}, {:.6e}]", self.ratio_min, self.ratio_max);
        if let Some(aux) = self.aux_max {
            let _ = writeln!(s, "  secondary ratio max: {aux:.6e}");
        }
        let _ = writeln!(s, "  scaling drift: {:.3e}", self.scale_drift);
        s
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}\n",
            self.lemma,
            self.ratio_min,
            self.ratio_max,
            self.aux_max.map_or(String::new(), |v| v.to_string()),
            self.scale_drift,
            self.pass
        )
    }
}

/// Random convex polygon satisfying the sampler's regularity bounds:
/// sorted random angles on a circle with radial jitter, rejection-filtered.
pub fn sample_regular_polygon(rng: &mut ChaCha8Rng, n: usize) -> ElementGeometry {
    let jitter = 0.3 * (3.0 / n as f64);
    let min_gap = 0.25 * std::f64::consts::TAU / n as f64;
    let amin = SAMPLE_ANGLE_MIN_DEG.to_radians();
    let amax = SAMPLE_ANGLE_MAX_DEG.to_radians();
    for _ in 0..100_000 {
        let mut angles: Vec<f64> =
            (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let gap_ok = (0..n).all(|i| {
            let next = if i + 1 == n {
                angles[0] + std::f64::consts::TAU
            } else {
                angles[i + 1]
            };
            next - angles[i] >= min_gap
        });
        if !gap_ok {
            continue;
        }
        let corners: Vec<Vec2> = angles
            .iter()
            .map(|&a| {
                let r = 1.0 + rng.gen_range(-jitter..jitter);
                Vec2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        let Ok(geo) = ElementGeometry::from_corners(corners) else { continue };
        let s = polygon_shape(&geo);
        if s.diameter / s.inscribed_diameter <= SAMPLE_ASPECT_MAX
            && s.clearance / s.diameter >= SAMPLE_CLEARANCE_MIN
            && s.angle_min >= amin
            && s.angle_max <= amax
        {
            return geo;
        }
    }
    panic!("polygon sampler failed to produce an admissible {n}-gon");
}

fn scaled_geometry(geo: &ElementGeometry, s: f64) -> ElementGeometry {
    ElementGeometry::from_corners(geo.corners.iter().map(|&c| c * s).collect()).unwrap()
}

/// Interior sample points: the fan-rule nodes of the given degree.
fn rule_points(geo: &ElementGeometry, degree: usize) -> Vec<Vec2> {
    polygon_rule(geo, degree).unwrap().points
}

fn drift(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Derivative bounds: `max |grad lambda| h_T` and `max |hess lambda| h_T^2`
/// are finite and scale-invariant. Boundary points are included through the
/// edge branch, where the gradient attains its extremes.
pub fn check_gradient_bound(n_polygons: usize, seed: u64) -> LemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratio_max = 0.0f64;
    let mut hess_max = 0.0f64;
    let mut scale_drift = 0.0f64;
    let mut count = 0usize;
    for idx in 0..n_polygons {
        let n = 3 + idx % 6;
        let geo = sample_regular_polygon(&mut rng, n);
        let h_t = geo.diameter;
        let mut grad_here = 0.0f64;
        for p in rule_points(&geo, 6) {
            let b = eval_basis(&geo, p).unwrap();
            for g in &b.gradients {
                grad_here = grad_here.max(g.norm() * h_t);
            }
            // hessian by one numeric differentiation of the exact gradient
            let step = 1e-6 * h_t;
            if (0..n).all(|j| geo.edge_distance(j, p) > 2.0 * step) {
                for i in 0..n {
                    let gx = eval_basis(&geo, p + Vec2::new(step, 0.0)).unwrap().gradients[i];
                    let gx2 = eval_basis(&geo, p - Vec2::new(step, 0.0)).unwrap().gradients[i];
                    let gy = eval_basis(&geo, p + Vec2::new(0.0, step)).unwrap().gradients[i];
                    let gy2 = eval_basis(&geo, p - Vec2::new(0.0, step)).unwrap().gradients[i];
                    let hxx = (gx.x - gx2.x) / (2.0 * step);
                    let hxy = (gx.y - gx2.y) / (2.0 * step);
                    let hyy = (gy.y - gy2.y) / (2.0 * step);
                    let frob = (hxx * hxx + 2.0 * hxy * hxy + hyy * hyy).sqrt();
                    hess_max = hess_max.max(frob * h_t * h_t);
                }
            }
            count += 1;
        }
        for e in 0..n {
            for k in 0..8 {
                let b = eval_basis_on_edge(&geo, e, k as f64 / 8.0).unwrap();
                for g in &b.gradients {
                    grad_here = grad_here.max(g.norm() * h_t);
                }
            }
        }
        ratio_max = ratio_max.max(grad_here);
        // scale invariance of the per-polygon maximum
        let s = 1024.0;
        let geo_s = scaled_geometry(&geo, s);
        let mut grad_scaled = 0.0f64;
        for p in rule_points(&geo, 6) {
            let b = eval_basis(&geo_s, p * s).unwrap();
            for g in &b.gradients {
                grad_scaled = grad_scaled.max(g.norm() * geo_s.diameter);
            }
        }
        for e in 0..n {
            for k in 0..8 {
                let b = eval_basis_on_edge(&geo_s, e, k as f64 / 8.0).unwrap();
                for g in &b.gradients {
                    grad_scaled = grad_scaled.max(g.norm() * geo_s.diameter);
                }
            }
        }
        scale_drift = scale_drift.max(drift(grad_here, grad_scaled));
    }
    let pass = ratio_max.is_finite()
        && hess_max.is_finite()
        && ratio_max <= brackets::GRADIENT_RATIO_MAX
        && hess_max <= brackets::HESSIAN_RATIO_MAX
        && scale_drift <= 1e-9;
    LemmaReport {
        lemma: "gradient-bound",
        samples: format!("{n_polygons} polygons, {count} interior points"),
        ratio_min: 0.0,
        ratio_max,
        aux_max: Some(hess_max),
        scale_drift,
        pass,
    }
}

/// Jacobian bounds of the reference-to-physical map: `det J / h_T^2` stays in
/// a positive bracket, `||J||_2 / h_T` and `||J^{-1}||_2 h_T` stay bounded.
/// A non-positive determinant anywhere fails the check outright.
pub fn check_jacobian_bounds(n_polygons: usize, seed: u64) -> LemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut det_min = f64::INFINITY;
    let mut det_max = 0.0f64;
    let mut norm_max = 0.0f64;
    let mut inv_max = 0.0f64;
    let mut scale_drift = 0.0f64;
    let mut count = 0usize;
    let mut positive = true;
    for idx in 0..n_polygons {
        let n = 3 + idx % 6;
        let reference = reference_polygon(n);
        let target = sample_regular_polygon(&mut rng, n);
        let target_s = scaled_geometry(&target, 1.0 / 1024.0);
        let h2 = target.diameter * target.diameter;
        for p in rule_points(&reference, 12) {
            let basis = eval_basis_h1(&reference, p).unwrap();
            let m = map_from_basis(&basis, &target);
            if m.det <= 0.0 {
                positive = false;
            }
            let dr = m.det / h2;
            det_min = det_min.min(dr);
            det_max = det_max.max(dr);
            norm_max = norm_max.max(m.jacobian.norm2() / target.diameter);
            inv_max = inv_max.max(target.diameter / m.jacobian.sigma_min());
            let ms = map_from_basis(&basis, &target_s);
            scale_drift = scale_drift.max(drift(dr, ms.det / (target_s.diameter * target_s.diameter)));
            count += 1;
        }
    }
    let pass = positive
        && det_min > 0.0
        && det_min >= brackets::DET_RATIO_MIN
        && det_max <= brackets::DET_RATIO_MAX
        && norm_max <= brackets::JACOBIAN_NORM_RATIO_MAX
        && inv_max <= brackets::JACOBIAN_INV_RATIO_MAX
        && scale_drift <= 1e-9;
    LemmaReport {
        lemma: "jacobian-bounds",
        samples: format!("{n_polygons} polygons, {count} map evaluations"),
        ratio_min: det_min,
        ratio_max: det_max,
        aux_max: Some(norm_max.max(inv_max)),
        scale_drift,
        pass,
    }
}

/// Determinant cross-check: direct differentiation vs the triple-determinant
/// expansion; returns the largest relative discrepancy.
pub fn det_expansion_discrepancy(n_polygons: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for idx in 0..n_polygons {
        let n = 3 + idx % 6;
        let reference = reference_polygon(n);
        let target = sample_regular_polygon(&mut rng, n);
        for p in rule_points(&reference, 8) {
            let basis = eval_basis_h1(&reference, p).unwrap();
            let direct = map_from_basis(&basis, &target).det;
            let expanded = det_jacobian_expansion(&basis, &target);
            worst = worst.max((direct - expanded).abs() / direct.abs());
            count += 1;
        }
    }
    (worst, count)
}

/// Element inverse estimate over `span{lambda_i, lap lambda_i}`:
/// `|v|_1 h_T / ||v||_0` bounded and scale-invariant.
pub fn check_inverse_estimate(n_polygons: usize, seed: u64) -> LemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratio_max = 0.0f64;
    let mut scale_drift = 0.0f64;
    let mut count = 0usize;
    for idx in 0..n_polygons {
        let n = 3 + idx % 6;
        let geo = sample_regular_polygon(&mut rng, n);
        let geo_s = scaled_geometry(&geo, 1024.0);
        for _ in 0..5 {
            let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let beta: Vec<f64> =
                (0..n).map(|_| rng.gen_range(-1.0..1.0) * geo.diameter * geo.diameter).collect();
            let r = inverse_ratio(&geo, &alpha, &beta);
            // coefficients of the Laplacian part carry units of length^2
            let beta_s: Vec<f64> = beta.iter().map(|b| b * 1024.0 * 1024.0).collect();
            let r_s = inverse_ratio(&geo_s, &alpha, &beta_s);
            ratio_max = ratio_max.max(r);
            scale_drift = scale_drift.max(drift(r, r_s));
            count += 1;
        }
    }
    let pass = ratio_max <= brackets::INVERSE_RATIO_MAX && scale_drift <= 1e-9;
    LemmaReport {
        lemma: "element-inverse-estimate",
        samples: format!("{n_polygons} polygons, {count} random members"),
        ratio_min: 0.0,
        ratio_max,
        aux_max: None,
        scale_drift,
        pass,
    }
}

/// `|v|_1 h / ||v||_0` for `v = sum alpha_i lambda_i + beta_i lap lambda_i`,
/// with the gradient of the Laplacian part taken by one numeric step of the
/// exact Laplacian.
fn inverse_ratio(geo: &ElementGeometry, alpha: &[f64], beta: &[f64]) -> f64 {
    let rule = polygon_rule(geo, 10).unwrap();
    let n = geo.n();
    let step = 1e-6 * geo.diameter;
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (&p, &w) in rule.points.iter().zip(&rule.weights) {
        let b = eval_basis(geo, p).unwrap();
        let mut v = 0.0;
        let mut g = Vec2::ZERO;
        for i in 0..n {
            v += alpha[i] * b.values[i] + beta[i] * b.laplacians[i];
            g += b.gradients[i] * alpha[i];
        }
        // numeric gradient of the Laplacian part
        let lap_at = |q: Vec2| -> f64 {
            let bb = eval_basis(geo, q).unwrap();
            (0..n).map(|i| beta[i] * bb.laplacians[i]).sum()
        };
        if (0..n).all(|j| geo.edge_distance(j, p) > 2.0 * step) {
            let gx = (lap_at(p + Vec2::new(step, 0.0)) - lap_at(p - Vec2::new(step, 0.0)))
                / (2.0 * step);
            let gy = (lap_at(p + Vec2::new(0.0, step)) - lap_at(p - Vec2::new(0.0, step)))
                / (2.0 * step);
            g += Vec2::new(gx, gy);
        }
        l2 += w * v * v;
        h1 += w * g.norm_sq();
    }
    if l2 <= 0.0 {
        return 0.0;
    }
    (h1 / l2).sqrt() * geo.diameter
}

/// Edge inverse estimates on the normal-derivative trace space of a shared
/// edge: tangential-derivative and sup-norm ratios.
pub fn check_edge_inverse(n_samples: usize, seed: u64) -> LemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tang_max = 0.0f64;
    let mut sup_max = 0.0f64;
    let mut scale_drift = 0.0f64;
    for idx in 0..n_samples {
        let n_plus = 3 + idx % 6;
        let n_minus = 3 + (idx / 2) % 6;
        let pair = shared_edge_pair(&mut rng, n_plus, n_minus);
        let coeff: Vec<f64> =
            (0..(n_plus + n_minus)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (t, s) = edge_inverse_ratios(&pair, &coeff);
        tang_max = tang_max.max(t);
        sup_max = sup_max.max(s);
        let scaled = EdgePair {
            plus: scaled_geometry(&pair.plus, 1024.0),
            minus: scaled_geometry(&pair.minus, 1024.0),
            plus_edge: pair.plus_edge,
            minus_edge: pair.minus_edge,
        };
        // normal-derivative coefficients scale like 1/h
        let coeff_s: Vec<f64> = coeff.iter().map(|c| c / 1024.0).collect();
        let (t_s, s_s) = edge_inverse_ratios(&scaled, &coeff_s);
        scale_drift = scale_drift.max(drift(t, t_s)).max(drift(s, s_s));
    }
    let pass = tang_max <= brackets::EDGE_INVERSE_RATIO_MAX
        && sup_max <= brackets::EDGE_SUP_RATIO_MAX
        && scale_drift <= 1e-9;
    LemmaReport {
        lemma: "edge-inverse-estimate",
        samples: format!("{n_samples} element pairs"),
        ratio_min: 0.0,
        ratio_max: tang_max,
        aux_max: Some(sup_max),
        scale_drift,
        pass,
    }
}

pub struct EdgePair {
    pub plus: ElementGeometry,
    pub minus: ElementGeometry,
    pub plus_edge: usize,
    pub minus_edge: usize,
}

/// Two admissible polygons glued along a shared edge: sample one polygon,
/// then mirror a second sample so both lie on opposite sides of edge 0.
pub fn shared_edge_pair(rng: &mut ChaCha8Rng, n_plus: usize, n_minus: usize) -> EdgePair {
    loop {
        let plus = sample_regular_polygon(rng, n_plus);
        let a = plus.corners[0];
        let b = plus.corners[1];
        let other = sample_regular_polygon(rng, n_minus);
        // map other's edge 0 onto [b, a] (reversed so it sits on the far side)
        let oa = other.corners[0];
        let ob = other.corners[1];
        let scale = a.dist(b) / oa.dist(ob);
        let rot_from = (ob - oa).normalized();
        let rot_to = (a - b).normalized();
        let cos = rot_from.dot(rot_to);
        let sin = rot_from.cross(rot_to);
        let xform = |p: Vec2| -> Vec2 {
            let q = (p - oa) * scale;
            b + Vec2::new(cos * q.x - sin * q.y, sin * q.x + cos * q.y)
        };
        let corners: Vec<Vec2> = other.corners.iter().map(|&c| xform(c)).collect();
        if let Ok(minus) = ElementGeometry::from_corners(corners) {
            // the glued polygon must sit fully on the far side of the edge
            let nrm = plus.normals[0];
            let mid = a.midpoint(b);
            if minus.corners.iter().all(|&c| (c - mid).dot(nrm) > -1e-12 * minus.diameter) {
                return EdgePair { plus, minus, plus_edge: 0, minus_edge: 0 };
            }
        }
    }
}

/// (tangential ratio, sup ratio) for one random member of the trace space.
fn edge_inverse_ratios(pair: &EdgePair, coeff: &[f64]) -> (f64, f64) {
    let a = pair.plus.corners[pair.plus_edge];
    let b = pair.plus.corners[(pair.plus_edge + 1) % pair.plus.n()];
    let h_e = a.dist(b);
    let n_e = pair.plus.normals[pair.plus_edge];
    let np = pair.plus.n();
    let eval_v = |t: f64| -> f64 {
        // v(t) = sum_i c_i (n_e . grad lambda_i^plus) + c_{np+i} (n_e . grad lambda_i^minus)
        let bp = eval_basis_on_edge(&pair.plus, pair.plus_edge, t).unwrap();
        // the minus element traverses the shared edge in the opposite direction
        let bm = eval_basis_on_edge(&pair.minus, pair.minus_edge, 1.0 - t).unwrap();
        let mut v = 0.0;
        for i in 0..np {
            v += coeff[i] * bp.gradients[i].dot(n_e);
        }
        for i in 0..pair.minus.n() {
            v += coeff[np + i] * bm.gradients[i].dot(n_e);
        }
        v
    };
    let rule = facet_rule_on_segment(16);
    let mut l2 = 0.0;
    let mut dt2 = 0.0;
    let dt = 1e-7;
    for (&t, &w) in rule.0.iter().zip(&rule.1) {
        let v = eval_v(t);
        l2 += w * v * v;
        let d = (eval_v((t + dt).min(1.0)) - eval_v((t - dt).max(0.0)))
            / ((t + dt).min(1.0) - (t - dt).max(0.0));
        dt2 += w * d * d;
    }
    // physical: ||v||_e^2 = h_e * l2 ; ||d_t v||_e^2 = h_e * dt2 / h_e^2
    let mut sup = 0.0f64;
    for k in 0..=200 {
        sup = sup.max(eval_v(k as f64 / 200.0).abs());
    }
    if l2 <= 0.0 {
        return (0.0, 0.0);
    }
    let tang_ratio = (dt2 / l2).sqrt(); // (h_e^{-1} sqrt scale) * h_e cancels
    let sup_ratio = sup / (h_e * l2).sqrt() * h_e.sqrt();
    (tang_ratio, sup_ratio)
}

/// Trace inequality: `||v||_e / (h^{-1/2} ||v||_T + h^{1/2} |v|_T)` bounded,
/// sampled over coordinates, their pairwise products, and random quadratics.
pub fn check_trace_inequality(n_polygons: usize, seed: u64) -> LemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratio_max = 0.0f64;
    let mut scale_drift = 0.0f64;
    let mut count = 0usize;
    for idx in 0..n_polygons {
        let n = 3 + idx % 6;
        let geo = sample_regular_polygon(&mut rng, n);
        let geo_s = scaled_geometry(&geo, 1024.0);
        for family in 0..3usize {
            let quad: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let i_pick = rng.gen_range(0..n);
            let j_pick = rng.gen_range(0..n);
            for e in 0..n {
                let r = trace_ratio(&geo, e, family, i_pick, j_pick, &quad);
                let r_s = trace_ratio(&geo_s, e, family, i_pick, j_pick, &quad);
                ratio_max = ratio_max.max(r);
                scale_drift = scale_drift.max(drift(r, r_s));
                count += 1;
            }
        }
    }
    let pass = ratio_max <= brackets::TRACE_RATIO_MAX && scale_drift <= 1e-9;
    LemmaReport {
        lemma: "trace-inequality",
        samples: format!("{n_polygons} polygons, {count} (edge, function) pairs"),
        ratio_min: 0.0,
        ratio_max,
        aux_max: None,
        scale_drift,
        pass,
    }
}

/// Quadratics are evaluated in diameter-normalized local coordinates so the
/// same coefficients stay meaningful across scales.
fn trace_ratio(
    geo: &ElementGeometry,
    edge: usize,
    family: usize,
    i_pick: usize,
    j_pick: usize,
    quad: &[f64; 6],
) -> f64 {
    let d = geo.diameter;
    let c0 = geo.centroid;
    let value = |b: &crate::basis::BasisEval| -> (f64, Vec2) {
        match family {
            0 => (b.values[i_pick], b.gradients[i_pick]),
            1 => (
                b.values[i_pick] * b.values[j_pick],
                b.gradients[i_pick] * b.values[j_pick] + b.gradients[j_pick] * b.values[i_pick],
            ),
            _ => {
                let u = (b.point - c0) / d;
                let v = quad[0]
                    + quad[1] * u.x
                    + quad[2] * u.y
                    + quad[3] * u.x * u.x
                    + quad[4] * u.x * u.y
                    + quad[5] * u.y * u.y;
                let g = Vec2::new(
                    quad[1] + 2.0 * quad[3] * u.x + quad[4] * u.y,
                    quad[2] + quad[4] * u.x + 2.0 * quad[5] * u.y,
                ) / d;
                (v, g)
            }
        }
    };
    let rule = polygon_rule(geo, 10).unwrap();
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (&p, &w) in rule.points.iter().zip(&rule.weights) {
        let b = eval_basis(geo, p).unwrap();
        let (v, g) = value(&b);
        l2 += w * v * v;
        h1 += w * g.norm_sq();
    }
    let (ts, ws) = facet_rule_on_segment(16);
    let h_e = geo.edge_lengths[edge];
    let mut edge_l2 = 0.0;
    for (&t, &w) in ts.iter().zip(&ws) {
        let b = eval_basis_on_edge(geo, edge, t).unwrap();
        let (v, _) = value(&b);
        edge_l2 += w * v * v * h_e;
    }
    let denom = l2.sqrt() / d.sqrt() + (h1 * d).sqrt();
    if denom <= 0.0 {
        return 0.0;
    }
    edge_l2.sqrt() / denom
}

/// Runs the whole battery with default sample sizes.
pub fn run_all(seed: u64) -> Vec<LemmaReport> {
    vec![
        check_gradient_bound(60, seed),
        check_jacobian_bounds(120, seed ^ 1),
        check_inverse_estimate(40, seed ^ 2),
        check_edge_inverse(40, seed ^ 3),
        check_trace_inequality(40, seed ^ 4),
    ]
}
