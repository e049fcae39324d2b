//! Adaptive polygonal finite elements for the 2D Poisson problem.
//!
//! The discretization uses Wachspress generalized barycentric coordinates on
//! meshes of convex polygons. On top of the solver sit a residual a posteriori
//! error estimator, Dörfler marking, and a polytree local refinement strategy
//! that keeps at most one hanging node per edge.
//!
//! Module map:
//! - [`mesh`]: polygon mesh data model, topology, regularity metrics, generators
//! - [`basis`]: Wachspress coordinates, derivatives, and the reference-polygon map
//! - [`quadrature`]: polygon and facet integration rules
//! - [`assembly`]: degree-of-freedom handling, stiffness/load assembly, CG solver
//! - [`estimate`]: residual error indicators
//! - [`adapt`]: marking, refinement, and the adaptive loop
//! - [`verify`]: numerical checks of the geometric inequalities the method rests on
//! - [`problems`]: the benchmark problem catalog
//! - [`experiment`]: experiment driver and convergence reporting
//! - [`export`]: VTK / SVG / CSV output

pub mod adapt;
pub mod assembly;
pub mod basis;
pub mod estimate;
pub mod experiment;
pub mod export;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod vec2;
pub mod verify;

pub use vec2::{Mat2, Vec2};

/// Caps rayon parallelism from the `POLYAFEM_THREADS` environment variable.
///
/// Call once at process start; later calls (or an already-built pool) are
/// silently ignored.
pub fn init_thread_pool() {
    if let Ok(raw) = std::env::var("POLYAFEM_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
