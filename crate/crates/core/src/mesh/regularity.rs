//! Shape-regularity metrics.
//!
//! The estimator constants depend on uniform mesh-family bounds: aspect ratio
//! (diameter over inscribed-disk diameter), corner clearance relative to the
//! diameter, interior angle range, corner count, and vertex patch size. The
//! report computes each element's numbers and the global extremes.

use super::{ElementGeometry, PolygonMesh};
use crate::vec2::Vec2;

#[derive(Clone, Debug)]
pub struct ElementShape {
    pub element: usize,
    /// h_T: largest corner-to-corner distance.
    pub diameter: f64,
    /// rho_T: diameter of the largest inscribed disk.
    pub inscribed_diameter: f64,
    /// h_*: minimum distance from a corner to a non-adjacent edge line.
    pub clearance: f64,
    pub angle_min: f64,
    pub angle_max: f64,
    pub n_corners: usize,
}

#[derive(Clone, Debug)]
pub struct RegularityReport {
    pub per_element: Vec<ElementShape>,
    /// C1: max over elements of diameter / inscribed_diameter.
    pub aspect_max: f64,
    /// C2: min over elements of clearance / diameter.
    pub clearance_min: f64,
    /// Largest interior angle in the mesh (radians).
    pub angle_upper: f64,
    /// Smallest interior angle in the mesh (radians).
    pub angle_lower: f64,
    /// N: largest corner count.
    pub max_corners: usize,
    /// M: largest number of elements meeting at a single vertex.
    pub max_patch: usize,
}

/// Shape metrics of a standalone polygon (no mesh required).
pub fn polygon_shape(geo: &ElementGeometry) -> ElementShape {
    let angles = geo.interior_angles();
    let (mut amin, mut amax) = (f64::INFINITY, 0.0f64);
    for &a in &angles {
        amin = amin.min(a);
        amax = amax.max(a);
    }
    ElementShape {
        element: 0,
        diameter: geo.diameter,
        inscribed_diameter: geo.inscribed_diameter(),
        clearance: geo.clearance(),
        angle_min: amin,
        angle_max: amax,
        n_corners: geo.n(),
    }
}

pub(super) fn regularity_report(mesh: &PolygonMesh) -> RegularityReport {
    let mut per_element = Vec::with_capacity(mesh.n_elements());
    let mut aspect_max = 0.0f64;
    let mut clearance_min = f64::INFINITY;
    let mut angle_upper = 0.0f64;
    let mut angle_lower = f64::INFINITY;
    let mut max_corners = 0usize;
    for el in mesh.elements() {
        let mut shape = polygon_shape(mesh.geometry(el.id));
        shape.element = el.id;
        aspect_max = aspect_max.max(shape.diameter / shape.inscribed_diameter);
        clearance_min = clearance_min.min(shape.clearance / shape.diameter);
        angle_upper = angle_upper.max(shape.angle_max);
        angle_lower = angle_lower.min(shape.angle_min);
        max_corners = max_corners.max(shape.n_corners);
        per_element.push(shape);
    }
    let mut patch = vec![0usize; mesh.n_vertices()];
    for el in mesh.elements() {
        for &v in mesh.expanded_loop(el.id) {
            patch[v] += 1;
        }
    }
    let max_patch = patch.into_iter().max().unwrap_or(0);
    RegularityReport {
        per_element,
        aspect_max,
        clearance_min,
        angle_upper,
        angle_lower,
        max_corners,
        max_patch,
    }
}

#[allow(dead_code)]
pub(crate) fn regular_polygon(n: usize, circumradius: f64) -> Vec<Vec2> {
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            Vec2::new(circumradius * a.cos(), circumradius * a.sin())
        })
        .collect()
}
