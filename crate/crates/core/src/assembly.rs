//! Degree-of-freedom management, stiffness/load assembly, and the solver.
//!
//! Hanging vertices are not degrees of freedom: their value is the average of
//! the two edge endpoints, so their rows/columns are distributed to the
//! parents with coefficient 1/2 and then eliminated. Dirichlet vertices carry
//! interpolated boundary values moved to the right-hand side. The reduced
//! system stays symmetric positive definite and is solved with a
//! Jacobi-preconditioned conjugate gradient.

use crate::basis::{eval_basis_h1_into, BasisEval, BasisError};
use crate::mesh::{PolygonMesh, VertexKind};
use crate::quadrature::{polygon_rule, QuadratureError};
use crate::vec2::Vec2;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("element {0} has vanishing area")]
    SingularElement(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("cg did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Classification of one mesh vertex.
#[derive(Clone, Debug, PartialEq)]
pub enum DofStatus {
    Free(usize),
    Dirichlet(f64),
    /// Value is the average of the two parent vertices.
    Constrained([usize; 2]),
}

#[derive(Clone, Debug)]
pub struct DofMap {
    status: Vec<DofStatus>,
    n_free: usize,
}

impl DofMap {
    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn status(&self, vertex: usize) -> &DofStatus {
        &self.status[vertex]
    }

    /// Expands a vertex into weighted contributions of free/fixed targets.
    fn expand(&self, vertex: usize, out: &mut Vec<(Term, f64)>) {
        out.clear();
        match &self.status[vertex] {
            DofStatus::Free(idx) => out.push((Term::Free(*idx), 1.0)),
            DofStatus::Dirichlet(value) => out.push((Term::Fixed(*value), 1.0)),
            DofStatus::Constrained(parents) => {
                for &p in parents {
                    match &self.status[p] {
                        DofStatus::Free(idx) => out.push((Term::Free(*idx), 0.5)),
                        DofStatus::Dirichlet(value) => out.push((Term::Fixed(*value), 0.5)),
                        DofStatus::Constrained(_) => {
                            unreachable!("constraint chains resolve in one step")
                        }
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Term {
    Free(usize),
    Fixed(f64),
}

/// Boundary vertices get interpolated Dirichlet data, hanging vertices become
/// constrained, everything else is a free dof with contiguous index.
pub fn build_dofmap(mesh: &PolygonMesh, boundary_data: impl Fn(Vec2) -> f64) -> DofMap {
    let mut status = Vec::with_capacity(mesh.n_vertices());
    let mut n_free = 0;
    for v in mesh.vertices() {
        if let VertexKind::Hanging { parents } = v.kind {
            status.push(DofStatus::Constrained(parents));
        } else if mesh.is_boundary_vertex(v.id) {
            status.push(DofStatus::Dirichlet(boundary_data(v.position)));
        } else {
            status.push(DofStatus::Free(n_free));
            n_free += 1;
        }
    }
    DofMap { status, n_free }
}

/// All-free variant (no boundary conditions); used by kernel tests.
pub fn build_dofmap_unconstrained(mesh: &PolygonMesh) -> DofMap {
    let status: Vec<DofStatus> =
        (0..mesh.n_vertices()).map(DofStatus::Free).collect();
    DofMap { status, n_free: mesh.n_vertices() }
}

/// Sparse symmetric matrix in compressed-row layout.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Sorted stable compaction; duplicate (row, col) entries are summed in
    /// insertion order, keeping assembly deterministic.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.par_sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_counts = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_counts[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_counts[r + 1] += row_counts[r];
        }
        CsrMatrix { n, row_ptr: row_counts, col_idx, values }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] = self.values[k];
                }
            }
        }
        d
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            if self.col_idx[k] == c {
                return self.values[k];
            }
        }
        0.0
    }

    /// Largest relative entrywise asymmetry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(c, r)).abs() / scale);
            }
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn dimension(&self) -> usize {
        self.matrix.n
    }
}

/// Element stiffness/load assembly with constraint elimination.
pub fn assemble(
    mesh: &PolygonMesh,
    dofmap: &DofMap,
    f: &(dyn Fn(Vec2) -> f64 + Sync),
    quad_degree: usize,
) -> Result<LinearSystem, AssemblyError> {
    struct Local {
        k: Vec<f64>,
        load: Vec<f64>,
    }
    let locals: Vec<Result<Local, AssemblyError>> = mesh
        .elements()
        .par_iter()
        .map(|el| {
            let geo = mesh.geometry(el.id);
            if geo.area <= 0.0 {
                return Err(AssemblyError::SingularElement(el.id));
            }
            let n = geo.n();
            let rule = polygon_rule(geo, quad_degree)?;
            let mut k = vec![0.0; n * n];
            let mut load = vec![0.0; n];
            let mut basis = BasisEval::default();
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                eval_basis_h1_into(geo, p, &mut basis)?;
                let fv = f(p);
                for i in 0..n {
                    load[i] += w * fv * basis.values[i];
                    for j in i..n {
                        k[i * n + j] += w * basis.gradients[i].dot(basis.gradients[j]);
                    }
                }
            }
            for i in 0..n {
                for j in 0..i {
                    k[i * n + j] = k[j * n + i];
                }
            }
            Ok(Local { k, load })
        })
        .collect();

    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = vec![0.0; dofmap.n_free()];
    let mut terms_i: Vec<(Term, f64)> = Vec::new();
    let mut terms_j: Vec<(Term, f64)> = Vec::new();
    for (el, local) in mesh.elements().iter().zip(locals) {
        let local = local?;
        let n = el.vertex_ids.len();
        for i in 0..n {
            dofmap.expand(el.vertex_ids[i], &mut terms_i);
            for &(target_i, ci) in terms_i.iter() {
                let Term::Free(row) = target_i else { continue };
                rhs[row] += ci * local.load[i];
                for j in 0..n {
                    let kij = local.k[i * n + j];
                    if kij == 0.0 {
                        continue;
                    }
                    dofmap.expand(el.vertex_ids[j], &mut terms_j);
                    for &(target_j, cj) in terms_j.iter() {
                        match target_j {
                            Term::Free(col) => triplets.push((row, col, ci * cj * kij)),
                            Term::Fixed(value) => rhs[row] -= ci * cj * kij * value,
                        }
                    }
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(dofmap.n_free(), triplets);
    Ok(LinearSystem { matrix, rhs })
}

/// Jacobi-preconditioned conjugate gradient. Returns x with
/// `||b - Ax||_2 <= rel_tol * ||b||_2`.
pub fn solve_cg(
    system: &LinearSystem,
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, AssemblyError> {
    assert!(rel_tol > 0.0 && rel_tol <= 1e-2, "rel_tol out of (0, 1e-2]");
    let a = &system.matrix;
    let b = &system.rhs;
    let n = a.n;
    let norm_b = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if norm_b == 0.0 {
        return Ok(x);
    }
    let diag = a.diagonal();
    let inv_diag: Vec<f64> =
        diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();

    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(&ri, &mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let target = rel_tol * norm_b;
    for iter in 0..max_iter {
        if dot(&r, &r).sqrt() <= target {
            return Ok(x);
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(AssemblyError::NoConvergence {
                iterations: iter,
                residual: dot(&r, &r).sqrt() / norm_b,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = dot(&r, &r).sqrt() / norm_b;
    if res <= rel_tol {
        Ok(x)
    } else {
        Err(AssemblyError::NoConvergence { iterations: max_iter, residual: res })
    }
}

/// Default iteration cap used by the experiment driver.
pub fn default_max_iter(dimension: usize) -> usize {
    20 * (dimension as f64).sqrt() as usize + 200
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full per-vertex coefficient vector of the discrete solution.
#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub vertex_values: Vec<f64>,
}

impl DiscreteSolution {
    /// Pointwise value on an element, given basis values there.
    pub fn value_from_basis(
        &self,
        mesh: &PolygonMesh,
        element: usize,
        basis_values: &[f64],
    ) -> f64 {
        mesh.elements()[element]
            .vertex_ids
            .iter()
            .zip(basis_values)
            .map(|(&v, &b)| self.vertex_values[v] * b)
            .sum()
    }
}

/// Fills Dirichlet and constrained values around the solved free coefficients.
pub fn reconstruct(
    mesh: &PolygonMesh,
    dofmap: &DofMap,
    free_values: &[f64],
) -> Result<DiscreteSolution, AssemblyError> {
    if free_values.len() != dofmap.n_free() {
        return Err(AssemblyError::DimensionMismatch {
            expected: dofmap.n_free(),
            got: free_values.len(),
        });
    }
    let mut values = vec![0.0; mesh.n_vertices()];
    for v in 0..mesh.n_vertices() {
        match dofmap.status(v) {
            DofStatus::Free(idx) => values[v] = free_values[*idx],
            DofStatus::Dirichlet(value) => values[v] = *value,
            DofStatus::Constrained(_) => {}
        }
    }
    for v in 0..mesh.n_vertices() {
        if let DofStatus::Constrained(parents) = dofmap.status(v) {
            values[v] = 0.5 * (values[parents[0]] + values[parents[1]]);
        }
    }
    Ok(DiscreteSolution { vertex_values: values })
}

/// Energy (H1 semi-norm) error `(sum_T int_T |grad u - grad u_h|^2)^{1/2}`.
pub fn energy_error(
    mesh: &PolygonMesh,
    solution: &DiscreteSolution,
    exact_gradient: &(dyn Fn(Vec2) -> Vec2 + Sync),
    quad_degree: usize,
) -> f64 {
    let per_element: Vec<f64> = mesh
        .elements()
        .par_iter()
        .map(|el| {
            let geo = mesh.geometry(el.id);
            let rule = polygon_rule(geo, quad_degree).expect("quad degree");
            let mut acc = 0.0;
            let mut basis = BasisEval::default();
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                eval_basis_h1_into(geo, p, &mut basis).expect("interior point");
                let mut grad_h = Vec2::ZERO;
                for (i, &v) in el.vertex_ids.iter().enumerate() {
                    grad_h += basis.gradients[i] * solution.vertex_values[v];
                }
                let diff = exact_gradient(p) - grad_h;
                acc += w * diff.norm_sq();
            }
            acc
        })
        .collect();
    per_element.iter().sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_initial_mesh, Domain, MeshStyle, PolygonMesh};

    fn unit_square_mesh() -> PolygonMesh {
        PolygonMesh::build_topology(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
            vec![vec![0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn dofmap_counts_on_grid() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Grid, 2, 0).unwrap();
        let dofmap = build_dofmap(&mesh, |_| 0.0);
        assert_eq!(dofmap.n_free(), 1);
        let dirichlet = (0..mesh.n_vertices())
            .filter(|&v| matches!(dofmap.status(v), DofStatus::Dirichlet(_)))
            .count();
        assert_eq!(dirichlet, 8);
    }

    #[test]
    fn hanging_vertex_is_constrained() {
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
        let dofmap = build_dofmap(&mesh, |_| 0.0);
        assert_eq!(dofmap.n_free(), 0); // everything else is boundary
        assert!(matches!(dofmap.status(6), DofStatus::Constrained([1, 2])));
        // reconstruction averages the parents
        let mut dm = dofmap.clone();
        // manually fix parents to 2 and 4
        dm.status[1] = DofStatus::Dirichlet(2.0);
        dm.status[2] = DofStatus::Dirichlet(4.0);
        let sol = reconstruct(&mesh, &dm, &[]).unwrap();
        assert_eq!(sol.vertex_values[6], 3.0);
    }

    #[test]
    fn triangle_stiffness_matches_cotangent_formula() {
        // K_ij = -cot(theta_k)/2 for i != j, with theta_k the angle opposite
        // to edge (i, j)
        let corners =
            vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.5, 1.5)];
        let mesh = PolygonMesh::build_topology(corners.clone(), vec![vec![0, 1, 2]]).unwrap();
        let dofmap = build_dofmap_unconstrained(&mesh);
        let system = assemble(&mesh, &dofmap, &|_| 0.0, 8).unwrap();
        let angle = |a: Vec2, b: Vec2, c: Vec2| {
            let u = b - a;
            let v = c - a;
            (u.dot(v) / (u.norm() * v.norm())).acos()
        };
        let th = [
            angle(corners[0], corners[1], corners[2]),
            angle(corners[1], corners[2], corners[0]),
            angle(corners[2], corners[0], corners[1]),
        ];
        // off-diagonal (i, j): opposite vertex k
        for (i, j, k) in [(0usize, 1usize, 2usize), (1, 2, 0), (0, 2, 1)] {
            let expect = -(1.0 / th[k].tan()) / 2.0;
            let got = system.matrix.get(i, j);
            assert!(
                (got - expect).abs() < 1e-10 * expect.abs().max(1.0),
                "K[{i}{j}] = {got}, cot formula {expect}"
            );
        }
    }

    #[test]
    fn square_stiffness_matches_bilinear_q1() {
        let mesh = unit_square_mesh();
        let dofmap = build_dofmap_unconstrained(&mesh);
        let system = assemble(&mesh, &dofmap, &|_| 0.0, 8).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j {
                    2.0 / 3.0
                } else if (i + 2) % 4 == j {
                    -1.0 / 3.0
                } else {
                    -1.0 / 6.0
                };
                let got = system.matrix.get(i, j);
                assert!((got - expect).abs() < 1e-8, "K[{i}{j}] = {got} vs {expect}");
            }
        }
    }

    #[test]
    fn kernel_contains_constants_and_matrix_symmetric() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Polygonal, 3, 5).unwrap();
        let dofmap = build_dofmap_unconstrained(&mesh);
        let system = assemble(&mesh, &dofmap, &|_| 0.0, 8).unwrap();
        let ones = vec![1.0; system.dimension()];
        let mut out = vec![0.0; system.dimension()];
        system.matrix.matvec(&ones, &mut out);
        let scale = system.matrix.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in out {
            assert!(v.abs() <= 1e-10 * scale);
        }
        assert!(system.matrix.asymmetry() <= 1e-12);
    }

    #[test]
    fn cg_identity_and_tridiagonal() {
        let eye = CsrMatrix::from_triplets(3, vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
        let sys = LinearSystem { matrix: eye, rhs: vec![3.0, -1.0, 2.0] };
        let x = solve_cg(&sys, 1e-10, 10).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] + 1.0).abs() < 1e-12);

        let mut triplets = Vec::new();
        for i in 0..5usize {
            triplets.push((i, i, 2.0));
            if i > 0 {
                triplets.push((i, i - 1, -1.0));
                triplets.push((i - 1, i, -1.0));
            }
        }
        let sys = LinearSystem {
            matrix: CsrMatrix::from_triplets(5, triplets),
            rhs: vec![0.0, 0.0, 1.0, 0.0, 0.0],
        };
        let x = solve_cg(&sys, 1e-12, 100).unwrap();
        let expect = [0.5, 1.0, 1.5, 1.0, 0.5];
        for (xi, ei) in x.iter().zip(expect) {
            assert!((xi - ei).abs() < 1e-10);
        }
    }

    #[test]
    fn patch_test_affine_reproduced() {
        // u = 1 + 2x - 3y, f = 0: exact on any mesh, hanging nodes included
        let u = |p: Vec2| 1.0 + 2.0 * p.x - 3.0 * p.y;
        for mesh in [
            generate_initial_mesh(Domain::UnitSquare, MeshStyle::Grid, 3, 0).unwrap(),
            generate_initial_mesh(Domain::UnitSquare, MeshStyle::Polygonal, 4, 11).unwrap(),
        ] {
            let dofmap = build_dofmap(&mesh, u);
            let system = assemble(&mesh, &dofmap, &|_| 0.0, 8).unwrap();
            let x = solve_cg(&system, 1e-12, default_max_iter(system.dimension())).unwrap();
            let sol = reconstruct(&mesh, &dofmap, &x).unwrap();
            for v in mesh.vertices() {
                let err = (sol.vertex_values[v.id] - u(v.position)).abs();
                assert!(err <= 1e-9, "vertex {} error {err}", v.id);
            }
            let e = energy_error(&mesh, &sol, &|_| Vec2::new(2.0, -3.0), 8);
            assert!(e <= 1e-9, "energy error {e}");
        }
    }

    #[test]
    fn energy_error_of_zero_solution_is_gradient_norm() {
        let mesh = unit_square_mesh();
        let sol = DiscreteSolution { vertex_values: vec![0.0; 4] };
        // |grad u| = 1 everywhere
        let e = energy_error(&mesh, &sol, &|_| Vec2::new(1.0, 0.0), 8);
        assert!((e - 1.0).abs() < 1e-10);
    }

    #[test]
    fn galerkin_residual_small_after_solve() {
        let mesh = generate_initial_mesh(Domain::UnitSquare, MeshStyle::Grid, 13, 0).unwrap();
        let beta = 10.0;
        let u = |p: Vec2| {
            10.0 * (-beta * ((p.x - 0.5).powi(2) + (p.y - 0.5).powi(2))).exp()
        };
        let f = move |p: Vec2| {
            let s = (p.x - 0.5).powi(2) + (p.y - 0.5).powi(2);
            4.0 * beta * (1.0 - beta * s) * u(p)
        };
        let dofmap = build_dofmap(&mesh, u);
        assert!((dofmap.n_free() as i64 - 144).abs() < 5);
        let system = assemble(&mesh, &dofmap, &f, 8).unwrap();
        let x = solve_cg(&system, 1e-10, default_max_iter(system.dimension())).unwrap();
        let mut ax = vec![0.0; system.dimension()];
        system.matrix.matvec(&x, &mut ax);
        let norm_b = dot(&system.rhs, &system.rhs).sqrt();
        for i in 0..system.dimension() {
            assert!((system.rhs[i] - ax[i]).abs() <= 1e-9 * norm_b);
        }
    }
}
