//! Benchmark problem catalog.
//!
//! Three Poisson problems with closed-form solutions: a localized peak on the
//! unit square, an interior layer on the unit square, and the corner
//! singularity on the L-shaped domain. Sources and gradients are
//! hand-differentiated closed forms validated by finite differences in the
//! tests; no symbolic machinery at run time.

use crate::mesh::Domain;
use crate::vec2::Vec2;

#[derive(Clone, Copy)]
pub struct ExampleDefinition {
    pub id: u8,
    pub name: &'static str,
    pub domain: Domain,
    pub solution: fn(Vec2) -> f64,
    pub gradient: fn(Vec2) -> Vec2,
    /// `f = -lap u`.
    pub source: fn(Vec2) -> f64,
    /// Dirichlet data `g = u` on the boundary.
    pub boundary: fn(Vec2) -> f64,
}

pub fn example_catalog() -> [ExampleDefinition; 3] {
    [
        ExampleDefinition {
            id: 1,
            name: "peak",
            domain: Domain::UnitSquare,
            solution: peak_u,
            gradient: peak_grad,
            source: peak_f,
            boundary: peak_u,
        },
        ExampleDefinition {
            id: 2,
            name: "interior-layer",
            domain: Domain::UnitSquare,
            solution: layer_u,
            gradient: layer_grad,
            source: layer_f,
            boundary: zero,
        },
        ExampleDefinition {
            id: 3,
            name: "corner-singularity",
            domain: Domain::LShape,
            solution: corner_u,
            gradient: corner_grad,
            source: zero,
            boundary: corner_u,
        },
    ]
}

pub fn example(id: u8) -> Option<ExampleDefinition> {
    example_catalog().into_iter().find(|e| e.id == id)
}

fn zero(_: Vec2) -> f64 {
    0.0
}

// -- Example 1: localized peak ------------------------------------------------

const PEAK_BETA: f64 = 10.0;
const PEAK_CENTER: Vec2 = Vec2 { x: 0.5, y: 0.5 };

fn peak_u(p: Vec2) -> f64 {
    let d = p - PEAK_CENTER;
    10.0 * (-PEAK_BETA * d.norm_sq()).exp()
}

fn peak_grad(p: Vec2) -> Vec2 {
    let d = p - PEAK_CENTER;
    d * (-2.0 * PEAK_BETA * peak_u(p))
}

fn peak_f(p: Vec2) -> f64 {
    let s = (p - PEAK_CENTER).norm_sq();
    4.0 * PEAK_BETA * (1.0 - PEAK_BETA * s) * peak_u(p)
}

// -- Example 2: interior layer ------------------------------------------------

const LAYER_K: f64 = 60.0;
const LAYER_CENTER: Vec2 = Vec2 { x: 1.25, y: -0.25 };

fn layer_u(p: Vec2) -> f64 {
    bubble(p) * (LAYER_K * (radius(p) - 1.0)).atan()
}

fn bubble(p: Vec2) -> f64 {
    p.x * (1.0 - p.x) * p.y * (1.0 - p.y)
}

fn radius(p: Vec2) -> f64 {
    (p - LAYER_CENTER).norm()
}

fn layer_grad(p: Vec2) -> Vec2 {
    let r = radius(p);
    let a = (LAYER_K * (r - 1.0)).atan();
    let da = LAYER_K / (1.0 + (LAYER_K * (r - 1.0)).powi(2));
    let grad_bubble = Vec2::new(
        (1.0 - 2.0 * p.x) * p.y * (1.0 - p.y),
        p.x * (1.0 - p.x) * (1.0 - 2.0 * p.y),
    );
    let grad_r = (p - LAYER_CENTER) / r;
    grad_bubble * a + grad_r * (bubble(p) * da)
}

fn layer_f(p: Vec2) -> f64 {
    let r = radius(p);
    let t = LAYER_K * (r - 1.0);
    let denom = 1.0 + t * t;
    let a = t.atan();
    let da = LAYER_K / denom;
    let dda = -2.0 * LAYER_K * LAYER_K * t / (denom * denom);
    let lap_bubble = -2.0 * p.y * (1.0 - p.y) - 2.0 * p.x * (1.0 - p.x);
    let grad_bubble = Vec2::new(
        (1.0 - 2.0 * p.x) * p.y * (1.0 - p.y),
        p.x * (1.0 - p.x) * (1.0 - 2.0 * p.y),
    );
    let grad_r = (p - LAYER_CENTER) / r;
    // lap(a(r)) = a'' + a'/r in 2D
    let lap_a = dda + da / r;
    let lap_u = lap_bubble * a + 2.0 * grad_bubble.dot(grad_r) * da + bubble(p) * lap_a;
    -lap_u
}

// -- Example 3: corner singularity on the L ------------------------------------

const TWO_THIRDS: f64 = 2.0 / 3.0;

/// Polar angle in [0, 2 pi), measured CCW from the positive x-axis; the
/// branch cut lies along the re-entrant edges so the solution is continuous
/// on the L-shaped domain.
fn corner_angle(p: Vec2) -> f64 {
    let mut theta = p.y.atan2(p.x);
    if theta < 0.0 {
        theta += std::f64::consts::TAU;
    }
    theta
}

fn corner_u(p: Vec2) -> f64 {
    let r = p.norm();
    if r == 0.0 {
        return 0.0;
    }
    r.powf(TWO_THIRDS) * (TWO_THIRDS * corner_angle(p)).sin()
}

fn corner_grad(p: Vec2) -> Vec2 {
    let r = p.norm();
    if r == 0.0 {
        return Vec2::ZERO;
    }
    let theta = corner_angle(p);
    let radial = Vec2::new(theta.cos(), theta.sin());
    let angular = Vec2::new(-theta.sin(), theta.cos());
    let s = (TWO_THIRDS * theta).sin();
    let c = (TWO_THIRDS * theta).cos();
    (radial * s + angular * c) * (TWO_THIRDS * r.powf(TWO_THIRDS - 1.0))
}
