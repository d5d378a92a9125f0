//! Continuous Lagrange spaces on a triangle mesh.
//!
//! Global numbering: mesh vertices first (DoF `i` is vertex `i`), then
//! `p - 1` DoFs per mesh edge ordered from the lower to the higher vertex
//! index, then the interior DoFs of each element.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use super::lagrange::{n_interior, Lagrange};
use super::mesh::Mesh;
use crate::error::{invalid, Result};
use crate::geometry::Vec2;

#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: Arc<Mesh>,
    pub p: usize,
    pub element: Lagrange,
    pub n_dofs: usize,
    elem_dofs: Vec<usize>,
    pub dof_points: Vec<Vec2>,
    pub dirichlet: Vec<bool>,
}

/// Affine map of one element from the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub origin: Vec2,
    pub jac: [[f64; 2]; 2],
    /// Inverse transpose of the Jacobian.
    pub jit: [[f64; 2]; 2],
    pub det: f64,
}

impl AffineMap {
    pub fn new(v: [Vec2; 3]) -> Self {
        let (a, b) = (v[1] - v[0], v[2] - v[0]);
        let jac = [[a.x, b.x], [a.y, b.y]];
        let det = a.x * b.y - b.x * a.y;
        let jit = [[b.y / det, -a.y / det], [-b.x / det, a.x / det]];
        AffineMap { origin: v[0], jac, jit, det }
    }

    pub fn map(&self, x: [f64; 2]) -> Vec2 {
        Vec2::new(
            self.origin.x + self.jac[0][0] * x[0] + self.jac[0][1] * x[1],
            self.origin.y + self.jac[1][0] * x[0] + self.jac[1][1] * x[1],
        )
    }

    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [self.jit[0][0] * g[0] + self.jit[0][1] * g[1], self.jit[1][0] * g[0] + self.jit[1][1] * g[1]]
    }

    /// Reference coordinates of a physical point.
    pub fn inverse(&self, x: Vec2) -> [f64; 2] {
        let d = x - self.origin;
        // jac^{-1} = jit^T
        [self.jit[0][0] * d.x + self.jit[1][0] * d.y, self.jit[0][1] * d.x + self.jit[1][1] * d.y]
    }
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, p: usize) -> Result<Self> {
        let element = Lagrange::new(p)?;
        if mesh.triangles.is_empty() {
            return Err(invalid("empty mesh"));
        }
        let nv = mesh.nodes.len();
        let ne_dof = p - 1;
        let ni = n_interior(p);
        let nl = element.n_local();

        let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &mesh.triangles {
            for (a, b) in [(t[1], t[2]), (t[2], t[0]), (t[0], t[1])] {
                let n = edge_id.len();
                edge_id.entry((a.min(b), a.max(b))).or_insert(n);
            }
        }
        let n_edges = edge_id.len();
        let edge_base = nv;
        let int_base = nv + n_edges * ne_dof;
        let n_dofs = int_base + mesh.triangles.len() * ni;

        let mut elem_dofs = Vec::with_capacity(mesh.triangles.len() * nl);
        for (e, t) in mesh.triangles.iter().enumerate() {
            elem_dofs.extend_from_slice(t);
            for (a, b) in [(t[1], t[2]), (t[2], t[0]), (t[0], t[1])] {
                let id = edge_id[&(a.min(b), a.max(b))];
                let base = edge_base + id * ne_dof;
                for s in 0..ne_dof {
                    let s = if a < b { s } else { ne_dof - 1 - s };
                    elem_dofs.push(base + s);
                }
            }
            for s in 0..ni {
                elem_dofs.push(int_base + e * ni + s);
            }
        }

        let mut dof_points = vec![Vec2::new(0.0, 0.0); n_dofs];
        for e in 0..mesh.triangles.len() {
            let map = AffineMap::new(mesh.vertices(e));
            for (l, &g) in elem_dofs[e * nl..(e + 1) * nl].iter().enumerate() {
                dof_points[g] = map.map(element.nodes[l]);
            }
        }

        let mut dirichlet = vec![false; n_dofs];
        for be in mesh.boundary.iter().filter(|b| b.tag.is_dirichlet()) {
            dirichlet[be.a] = true;
            dirichlet[be.b] = true;
            let id = edge_id
                .get(&(be.a.min(be.b), be.a.max(be.b)))
                .ok_or_else(|| invalid("boundary edge is not a mesh edge"))?;
            for s in 0..ne_dof {
                dirichlet[edge_base + id * ne_dof + s] = true;
            }
        }

        Ok(FeSpace { mesh, p, element, n_dofs, elem_dofs, dof_points, dirichlet })
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.triangles.len()
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        let nl = self.element.n_local();
        &self.elem_dofs[e * nl..(e + 1) * nl]
    }

    pub fn map(&self, e: usize) -> AffineMap {
        AffineMap::new(self.mesh.vertices(e))
    }

    pub fn n_free(&self) -> usize {
        self.dirichlet.iter().filter(|d| !**d).count()
    }

    /// Spaces on the same triangulation (element-by-element comparable).
    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
            || (self.mesh.nodes == other.mesh.nodes && self.mesh.triangles == other.mesh.triangles)
    }
}

/// A finite element function: coefficients in the nodal basis of a space.
#[derive(Debug, Clone)]
pub struct FieldFunction {
    pub space: Arc<FeSpace>,
    pub coeffs: Vec<Complex64>,
}

impl FieldFunction {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs {
            return Err(crate::error::Error::DimensionMismatch(format!(
                "{} coefficients for {} DoFs",
                coeffs.len(),
                space.n_dofs
            )));
        }
        Ok(FieldFunction { space, coeffs })
    }

    pub fn zero(space: Arc<FeSpace>) -> Self {
        let n = space.n_dofs;
        FieldFunction { space, coeffs: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(space: Arc<FeSpace>, f: &(dyn Fn(Vec2) -> Complex64 + Sync)) -> Self {
        let coeffs = space.dof_points.iter().map(|&x| f(x)).collect();
        FieldFunction { space, coeffs }
    }

    /// Value and physical gradient in element `e` at reference point `x`.
    pub fn eval_in(&self, e: usize, x: [f64; 2]) -> (Complex64, [Complex64; 2]) {
        let tab = self.space.element.tabulate(x);
        let map = self.space.map(e);
        self.combine(e, &tab.values, &tab.grads, &map)
    }

    pub(crate) fn combine(
        &self,
        e: usize,
        values: &[f64],
        grads: &[[f64; 2]],
        map: &AffineMap,
    ) -> (Complex64, [Complex64; 2]) {
        let mut v = Complex64::new(0.0, 0.0);
        let mut g = [Complex64::new(0.0, 0.0); 2];
        for (l, &d) in self.space.element_dofs(e).iter().enumerate() {
            let c = self.coeffs[d];
            v += c * values[l];
            let gp = map.grad(grads[l]);
            g[0] += c * gp[0];
            g[1] += c * gp[1];
        }
        (v, g)
    }

    /// Re-expresses the field in another space on the same mesh whose
    /// degree is at least this one's (exact).
    pub fn prolong(&self, fine: Arc<FeSpace>) -> Result<FieldFunction> {
        if !self.space.same_mesh(&fine) || fine.p < self.space.p {
            return Err(invalid("prolongation needs the same mesh and a degree at least as high"));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); fine.n_dofs];
        let tabs: Vec<_> = fine.element.nodes.iter().map(|&x| self.space.element.tabulate(x)).collect();
        for e in 0..fine.n_elements() {
            let dofs = self.space.element_dofs(e);
            for (l, &g) in fine.element_dofs(e).iter().enumerate() {
                coeffs[g] = dofs.iter().zip(&tabs[l].values).map(|(&d, &v)| self.coeffs[d] * v).sum();
            }
        }
        FieldFunction::new(fine, coeffs)
    }

    /// Values at the mesh vertices as CSV rows `x, y, re, im`.
    pub fn vertex_rows(&self) -> Vec<Vec<String>> {
        use crate::io::fmt_f64;
        self.space
            .mesh
            .nodes
            .iter()
            .zip(&self.coeffs)
            .map(|(x, c)| vec![fmt_f64(x.x), fmt_f64(x.y), fmt_f64(c.re), fmt_f64(c.im)])
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use crate::fem::mesh::{BoundaryEdge, BoundaryTag};

    pub fn square_mesh(n: usize) -> Mesh {
        let mut nodes = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                nodes.push(Vec2::new(i as f64 / n as f64, j as f64 / n as f64));
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::new();
        for j in 0..n {
            for i in 0..n {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut boundary = Vec::new();
        for i in 0..n {
            for (a, b) in [(id(i, 0), id(i + 1, 0)), (id(i, n), id(i + 1, n)), (id(0, i), id(0, i + 1)), (id(n, i), id(n, i + 1))] {
                boundary.push(BoundaryEdge { a, b, tag: BoundaryTag::Truncation });
            }
        }
        let tags = vec![Default::default(); triangles.len()];
        Mesh { nodes, triangles, boundary, tags }
    }

    /// Unit square without boundary conditions.
    pub fn square_mesh_free(n: usize) -> Mesh {
        Mesh { boundary: Vec::new(), ..square_mesh(n) }
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::square_mesh;
    use super::*;

    #[test]
    fn dof_counts_and_sharing() {
        let mesh = Arc::new(square_mesh(3));
        for p in 1..=4 {
            let s = FeSpace::new(mesh.clone(), p).unwrap();
            let n = 3 * p;
            assert_eq!(s.n_dofs, (n + 1) * (n + 1), "p={p}");
            assert_eq!(s.n_free(), (n - 1) * (n - 1));
            // Shared nodes have one index: distinct global DoFs sit at distinct points.
            let mut pts: Vec<(i64, i64)> =
                s.dof_points.iter().map(|x| ((x.x * 1e9).round() as i64, (x.y * 1e9).round() as i64)).collect();
            pts.sort();
            pts.dedup();
            assert_eq!(pts.len(), s.n_dofs);
        }
    }

    #[test]
    fn interpolation_is_exact_for_polynomials() {
        let mesh = Arc::new(square_mesh(2));
        let s = Arc::new(FeSpace::new(mesh, 2).unwrap());
        let f = |x: Vec2| Complex64::new(x.x * x.y - x.y * x.y, 2.0 * x.x);
        let u = FieldFunction::interpolate(s, &f);
        for e in 0..8 {
            let (v, g) = u.eval_in(e, [0.3, 0.2]);
            let x = u.space.map(e).map([0.3, 0.2]);
            assert!((v - f(x)).norm() < 1e-12);
            assert!((g[0] - Complex64::new(x.y, 2.0)).norm() < 1e-11);
            assert!((g[1] - Complex64::new(x.x - 2.0 * x.y, 0.0)).norm() < 1e-11);
        }
    }

    #[test]
    fn prolongation_preserves_values() {
        let mesh = Arc::new(square_mesh(2));
        let s1 = Arc::new(FeSpace::new(mesh.clone(), 2).unwrap());
        let s4 = Arc::new(FeSpace::new(mesh, 4).unwrap());
        let u = FieldFunction::interpolate(s1, &|x| Complex64::new(x.x.sin(), x.y));
        let w = u.prolong(s4).unwrap();
        for e in 0..8 {
            let (a, _) = u.eval_in(e, [0.1, 0.6]);
            let (b, _) = w.eval_in(e, [0.1, 0.6]);
            assert!((a - b).norm() < 1e-12);
        }
    }
}
