//! Galerkin assembly of `a_k(u, v) = int k^-2 A grad u . grad v + k^-2 (b . grad u) v - n u v`
//! and of the real `H^1_k` Gram matrix, with Dirichlet elimination.

use std::ops::AddAssign;

use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use num_complex::Complex64;
use rayon::prelude::*;

use super::multifrontal::Cells;
use super::quadrature::{triangle_rule, TriangleRule};
use super::space::FeSpace;
use crate::error::{invalid, Result};
use crate::geometry::Vec2;
use crate::pml::{PmlCoefficients, PmlProfile};

pub type Source<'a> = &'a (dyn Fn(Vec2) -> Complex64 + Sync);

/// Coefficients of the operator: free space, or the radial PML.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Medium {
    Free,
    Pml(PmlProfile),
}

impl Medium {
    pub fn coefficients(&self, x: Vec2) -> PmlCoefficients {
        match self {
            Medium::Free => PmlCoefficients::IDENTITY,
            Medium::Pml(p) => p.coefficients(x),
        }
    }
}

/// Sparse system over the free (non-Dirichlet) DoFs.
#[derive(Debug, Clone)]
pub struct ComplexSystem {
    pub matrix: SparseColMat<usize, Complex64>,
    pub rhs: Vec<Complex64>,
    /// Free DoF list; `free[i]` is the global DoF of unknown `i`.
    pub free: Vec<usize>,
    /// Elements as lists of free unknowns, used to order the direct solve.
    pub cells: Cells,
    /// Values of all DoFs with the Dirichlet ones filled in.
    pub lifting: Vec<Complex64>,
    pub k: f64,
}

impl ComplexSystem {
    pub fn n(&self) -> usize {
        self.free.len()
    }
}

pub(crate) fn free_index(space: &FeSpace) -> (Vec<usize>, Vec<usize>) {
    let mut free = Vec::new();
    let mut index = vec![usize::MAX; space.n_dofs];
    for d in 0..space.n_dofs {
        if !space.dirichlet[d] {
            index[d] = free.len();
            free.push(d);
        }
    }
    (free, index)
}

/// Sorted CSC pattern of the free-free block.
fn pattern(space: &FeSpace, index: &[usize], n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut cols: Vec<Vec<u32>> = vec![Vec::new(); n];
    for e in 0..space.n_elements() {
        let dofs: Vec<usize> = space.element_dofs(e).iter().map(|&d| index[d]).filter(|&i| i != usize::MAX).collect();
        for &j in &dofs {
            let c = &mut cols[j];
            c.extend(dofs.iter().map(|&i| i as u32));
            if c.len() > 256 && c.len() > 2 * c.capacity() / 3 {
                c.sort_unstable();
                c.dedup();
            }
        }
    }
    let mut col_ptr = Vec::with_capacity(n + 1);
    col_ptr.push(0);
    let mut row_idx = Vec::new();
    for c in &mut cols {
        c.sort_unstable();
        c.dedup();
        row_idx.extend(c.iter().map(|&i| i as usize));
        col_ptr.push(row_idx.len());
        *c = Vec::new();
    }
    (col_ptr, row_idx)
}

/// CSC column pointers, row indices and values, reduced load vector, free DoFs.
type Assembled<T> = (Vec<usize>, Vec<usize>, Vec<T>, Vec<Complex64>, Vec<usize>);

/// Element-parallel assembly with a deterministic, element-ordered scatter.
/// `local(e)` returns the row-major element matrix (row = test function)
/// and the element load vector.
pub(crate) fn assemble_generic<T, F>(
    space: &FeSpace,
    lifting: &[Complex64],
    local: F,
) -> Assembled<T>
where
    T: Copy + Default + AddAssign + Send + Into<Complex64>,
    F: Fn(usize) -> (Vec<T>, Vec<Complex64>) + Sync,
{
    let (free, index) = free_index(space);
    let n = free.len();
    let (col_ptr, row_idx) = pattern(space, &index, n);
    let mut values = vec![T::default(); row_idx.len()];
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    let nl = space.element.n_local();
    const CHUNK: usize = 4096;
    for start in (0..space.n_elements()).step_by(CHUNK) {
        let end = (start + CHUNK).min(space.n_elements());
        let locals: Vec<(Vec<T>, Vec<Complex64>)> = (start..end).into_par_iter().map(&local).collect();
        for (e, (m, f)) in (start..end).zip(locals) {
            let dofs = space.element_dofs(e);
            for (li, &gi) in dofs.iter().enumerate() {
                let i = index[gi];
                if i == usize::MAX {
                    continue;
                }
                rhs[i] += f[li];
                for (lj, &gj) in dofs.iter().enumerate() {
                    let v = m[li * nl + lj];
                    let j = index[gj];
                    if j == usize::MAX {
                        rhs[i] -= v.into() * lifting[gj];
                    } else {
                        let col = &row_idx[col_ptr[j]..col_ptr[j + 1]];
                        let pos = col.binary_search(&i).expect("entry in pattern");
                        values[col_ptr[j] + pos] += v;
                    }
                }
            }
        }
    }
    (col_ptr, row_idx, values, rhs, free)
}

pub(crate) fn to_sparse<T: Copy>(n: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>, values: Vec<T>) -> SparseColMat<usize, T> {
    let sym = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
    SparseColMat::new(sym, values)
}

/// Elements as cliques of free unknowns.
pub(crate) fn element_cells(space: &FeSpace) -> Cells {
    let (_, index) = free_index(space);
    let mut cells = Cells::new();
    for e in 0..space.n_elements() {
        let vars = space.element_dofs(e).iter().map(|&d| index[d]).filter(|&i| i != usize::MAX);
        cells.push(vars, space.mesh.barycenter(e));
    }
    cells
}

/// Quadrature rule of degree `2p + 2`.
pub fn element_rule(p: usize) -> Result<TriangleRule> {
    triangle_rule(2 * p + 2)
}

/// Assembles the Galerkin system with source `f` and Dirichlet data `g`
/// (zero when `None`) imposed by nodal interpolation.
pub fn assemble(space: &FeSpace, medium: &Medium, k: f64, f: Source, g: Option<Source>) -> Result<ComplexSystem> {
    if !(k > 0.0) {
        return Err(invalid("wavenumber must be positive"));
    }
    let rule = element_rule(space.p)?;
    let tabs: Vec<_> = rule.points.iter().map(|&x| space.element.tabulate(x)).collect();
    let nl = space.element.n_local();
    let k2 = 1.0 / (k * k);
    let zero = Complex64::new(0.0, 0.0);
    let mut lifting = vec![zero; space.n_dofs];
    if let Some(g) = g {
        for d in 0..space.n_dofs {
            if space.dirichlet[d] {
                lifting[d] = g(space.dof_points[d]);
            }
        }
    }
    let local = |e: usize| {
        let map = space.map(e);
        let jw = map.det.abs();
        let mut m = vec![zero; nl * nl];
        let mut load = vec![zero; nl];
        let mut grads = vec![[0.0; 2]; nl];
        for (q, tab) in tabs.iter().enumerate() {
            let x = map.map(rule.points[q]);
            let w = rule.weights[q] * jw;
            let c = medium.coefficients(x);
            for (gp, gr) in grads.iter_mut().zip(&tab.grads) {
                *gp = map.grad(*gr);
            }
            let fx = f(x) * w;
            for i in 0..nl {
                let (vi, gi) = (tab.values[i], grads[i]);
                load[i] += fx * vi;
                for j in 0..nl {
                    let gj = grads[j];
                    let agj = [c.a[0][0] * gj[0] + c.a[0][1] * gj[1], c.a[1][0] * gj[0] + c.a[1][1] * gj[1]];
                    let stiff = agj[0] * gi[0] + agj[1] * gi[1];
                    let drift = (c.b[0] * gj[0] + c.b[1] * gj[1]) * vi;
                    m[i * nl + j] += w * ((stiff + drift) * k2 - c.n * (tab.values[j] * vi));
                }
            }
        }
        (m, load)
    };
    let (col_ptr, row_idx, values, rhs, free) = assemble_generic(space, &lifting, local);
    let matrix = to_sparse(free.len(), col_ptr, row_idx, values);
    let cells = element_cells(space);
    Ok(ComplexSystem { matrix, rhs, free, cells, lifting, k })
}

/// Real Gram matrix of the `H^1_k` inner product `int k^-2 grad u . grad v + u v`
/// on the free DoFs, and the right-hand side `(u, phi_i)_{H^1_k}` minus the
/// Dirichlet coupling, for a target given by `eval(e, q)` at the rule points.
pub(crate) fn assemble_gram<E>(
    space: &FeSpace,
    k: f64,
    rule: &TriangleRule,
    lifting: &[Complex64],
    eval: E,
) -> (SparseColMat<usize, f64>, Vec<Complex64>, Vec<usize>)
where
    E: Fn(usize, usize) -> (Complex64, [Complex64; 2]) + Sync,
{
    let tabs: Vec<_> = rule.points.iter().map(|&x| space.element.tabulate(x)).collect();
    let nl = space.element.n_local();
    let k2 = 1.0 / (k * k);
    let local = |e: usize| {
        let map = space.map(e);
        let jw = map.det.abs();
        let mut m = vec![0.0; nl * nl];
        let mut load = vec![Complex64::new(0.0, 0.0); nl];
        for (q, tab) in tabs.iter().enumerate() {
            let w = rule.weights[q] * jw;
            let grads: Vec<[f64; 2]> = tab.grads.iter().map(|g| map.grad(*g)).collect();
            let (u, gu) = eval(e, q);
            for i in 0..nl {
                let gi = grads[i];
                load[i] += w * (u * tab.values[i] + (gu[0] * gi[0] + gu[1] * gi[1]) * k2);
                for j in 0..nl {
                    let gj = grads[j];
                    m[i * nl + j] += w * (tab.values[i] * tab.values[j] + k2 * (gi[0] * gj[0] + gi[1] * gj[1]));
                }
            }
        }
        (m, load)
    };
    let (col_ptr, row_idx, values, rhs, free) = assemble_generic(space, lifting, local);
    (to_sparse(free.len(), col_ptr, row_idx, values), rhs, free)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fem::mesh::Mesh;

    fn single_triangle() -> Arc<Mesh> {
        Arc::new(Mesh {
            nodes: vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            triangles: vec![[0, 1, 2]],
            boundary: vec![],
            tags: vec![Default::default()],
        })
    }

    fn dense(sys: &ComplexSystem) -> Vec<Vec<Complex64>> {
        let n = sys.n();
        let mut d = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        let m = sys.matrix.as_ref();
        for j in 0..n {
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                d[i][j] = *v;
            }
        }
        d
    }

    #[test]
    fn reference_triangle_stiffness_minus_mass() {
        let s = FeSpace::new(single_triangle(), 1).unwrap();
        let sys = assemble(&s, &Medium::Free, 1.0, &|_| Complex64::new(0.0, 0.0), None).unwrap();
        let stiff = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        let mass = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        let d = dense(&sys);
        for i in 0..3 {
            for j in 0..3 {
                let want = stiff[i][j] - mass[i][j] / 24.0;
                assert!((d[i][j] - want).norm() < 1e-14, "({i},{j}) {} vs {want}", d[i][j]);
            }
        }
    }

    #[test]
    fn mass_row_sums_are_areas() {
        let mesh = Arc::new(crate::fem::space::tests_support::square_mesh_free(3));
        for p in 1..=3 {
            let s = FeSpace::new(mesh.clone(), p).unwrap();
            // With k huge the stiffness part vanishes and -M remains.
            let sys = assemble(&s, &Medium::Free, 1e12, &|_| Complex64::new(0.0, 0.0), None).unwrap();
            let d = dense(&sys);
            let total: Complex64 = d.iter().flatten().sum();
            assert!((total + 1.0).norm() < 1e-12, "p={p} total={total}");
        }
    }

    #[test]
    fn free_space_matrix_is_complex_symmetric() {
        let mesh = Arc::new(crate::fem::space::tests_support::square_mesh_free(2));
        let s = FeSpace::new(mesh, 2).unwrap();
        let sys = assemble(&s, &Medium::Free, 3.0, &|_| Complex64::new(1.0, 0.0), None).unwrap();
        let d = dense(&sys);
        for i in 0..d.len() {
            for j in 0..d.len() {
                assert!((d[i][j] - d[j][i]).norm() < 1e-13);
            }
        }
        let load: Complex64 = sys.rhs.iter().sum();
        assert!((load - 1.0).norm() < 1e-12);
    }
}
