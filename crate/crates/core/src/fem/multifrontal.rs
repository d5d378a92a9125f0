//! Multifrontal sparse LU for structurally symmetric matrices, ordered by
//! geometric nested dissection of the unknowns' coordinates.
//!
//! Each front eliminates its pivot block with dense partial pivoting in
//! double precision. For numerically symmetric matrices only the upper
//! off-diagonal block is kept. The stored factors may be rounded to single
//! precision (`Multifrontal<Complex32>`) for use with iterative refinement.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor, solve as lu_solve};
use faer::linalg::matmul::matmul;
use faer::perm::PermRef;
use faer::sparse::SparseColMat;
use faer::{Accum, Conj, Mat, MatMut, Par};
use num_complex::{Complex32, Complex64};

use crate::error::{invalid, Result};
use crate::geometry::Vec2;

/// Subsets at most this large are not dissected further.
const LEAF_SIZE: usize = 96;

struct Node {
    vars: Vec<usize>,
    n_children: usize,
}

/// Scalar type of stored factors.
pub trait FactorScalar: faer::traits::ComplexField + Copy + std::ops::SubAssign + Send + Sync + 'static {
    fn from_c64(z: Complex64) -> Self;
    fn to_c64(self) -> Complex64;
}

impl FactorScalar for Complex64 {
    fn from_c64(z: Complex64) -> Self {
        z
    }
    fn to_c64(self) -> Complex64 {
        self
    }
}

impl FactorScalar for Complex32 {
    fn from_c64(z: Complex64) -> Self {
        Complex32::new(z.re as f32, z.im as f32)
    }
    fn to_c64(self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }
}

fn cast<T: FactorScalar>(m: faer::MatRef<'_, Complex64>) -> Mat<T> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| T::from_c64(m[(i, j)]))
}

/// Dense LU with partial pivoting, stored in place.
struct DenseLu<T> {
    lu: Mat<T>,
    perm: Vec<usize>,
    perm_inv: Vec<usize>,
}

impl DenseLu<Complex64> {
    fn new(mut a: Mat<Complex64>) -> Self {
        let n = a.nrows();
        let (mut perm, mut perm_inv) = (vec![0usize; n], vec![0usize; n]);
        let mut buf = MemBuffer::new(factor::lu_in_place_scratch::<usize, Complex64>(n, n, Par::Seq, Default::default()));
        factor::lu_in_place(a.as_mut(), &mut perm, &mut perm_inv, Par::Seq, MemStack::new(&mut buf), Default::default());
        Self { lu: a, perm, perm_inv }
    }

    fn is_singular(&self) -> bool {
        (0..self.lu.nrows()).any(|i| {
            let d = self.lu[(i, i)];
            d.norm() == 0.0 || !d.re.is_finite() || !d.im.is_finite()
        })
    }

    fn cast<T: FactorScalar>(&self) -> DenseLu<T> {
        DenseLu { lu: cast(self.lu.as_ref()), perm: self.perm.clone(), perm_inv: self.perm_inv.clone() }
    }
}

impl<T: FactorScalar> DenseLu<T> {
    fn solve_in_place(&self, rhs: MatMut<'_, T>) {
        let n = self.lu.nrows();
        let mut buf = MemBuffer::new(lu_solve::solve_in_place_scratch::<usize, T>(n, rhs.ncols(), Par::Seq));
        let perm = PermRef::new_checked(&self.perm, &self.perm_inv, n);
        let lu = self.lu.as_ref();
        lu_solve::solve_in_place_with_conj(lu, lu, perm, Conj::No, rhs, Par::Seq, MemStack::new(&mut buf));
    }
}

struct Front<T> {
    vars: Vec<usize>,
    rows: Vec<usize>,
    lu: Option<DenseLu<T>>,
    /// Pivot rows against the update rows (`vars x rows`).
    upper: Mat<T>,
    /// Update rows against the pivot columns, absent for symmetric input.
    lower: Option<Mat<T>>,
}

/// Factorization of a square sparse matrix with factors stored as `T`.
pub struct Multifrontal<T = Complex64> {
    n: usize,
    fronts: Vec<Front<T>>,
}

/// Cliques covering the sparsity pattern (usually finite elements), each with
/// a representative point. Every nonzero `(i, j)` must lie in some cell
/// containing both `i` and `j`.
#[derive(Debug, Clone, Default)]
pub struct Cells {
    pub ptr: Vec<usize>,
    pub vars: Vec<usize>,
    pub centers: Vec<Vec2>,
}

impl Cells {
    pub fn new() -> Self {
        Self { ptr: vec![0], vars: Vec::new(), centers: Vec::new() }
    }

    pub fn push(&mut self, vars: impl IntoIterator<Item = usize>, center: Vec2) {
        self.vars.extend(vars);
        self.ptr.push(self.vars.len());
        self.centers.push(center);
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    fn cell(&self, c: usize) -> &[usize] {
        &self.vars[self.ptr[c]..self.ptr[c + 1]]
    }
}

struct Dissector<'a> {
    cells: &'a Cells,
    /// 0: unassigned; otherwise the stamp of the last visit or `ASSIGNED`.
    mark: Vec<u32>,
    stamp: u32,
    nodes: Vec<Node>,
}

const ASSIGNED: u32 = u32::MAX;

impl Dissector<'_> {
    fn fresh(&mut self) -> u32 {
        self.stamp += 1;
        self.stamp
    }

    /// Unassigned variables of `cells`, each once.
    fn collect(&mut self, cells: &[usize]) -> Vec<usize> {
        let s = self.fresh();
        let mut out = Vec::new();
        for &c in cells {
            for &v in self.cells.cell(c) {
                if self.mark[v] != ASSIGNED && self.mark[v] != s {
                    self.mark[v] = s;
                    out.push(v);
                }
            }
        }
        out
    }

    fn leaf(&mut self, vars: Vec<usize>) {
        for &v in &vars {
            self.mark[v] = ASSIGNED;
        }
        self.nodes.push(Node { vars, n_children: 0 });
    }

    /// Appends the subtree of `cells` in postorder.
    fn dissect(&mut self, mut cells: Vec<usize>) {
        let vars = self.collect(&cells);
        if vars.len() <= LEAF_SIZE || cells.len() < 2 {
            self.leaf(vars);
            return;
        }
        let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for &c in &cells {
            let p = self.cells.centers[c];
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let wide = hi.x - lo.x >= hi.y - lo.y;
        let key = |p: Vec2| if wide { p.x } else { p.y };
        let centers = &self.cells.centers;
        cells.sort_by(|&a, &b| key(centers[a]).total_cmp(&key(centers[b])).then(a.cmp(&b)));
        let right = cells.split_off(cells.len() / 2);
        let left = cells;
        let sl = self.fresh();
        for &c in &left {
            for &v in self.cells.cell(c) {
                if self.mark[v] != ASSIGNED {
                    self.mark[v] = sl;
                }
            }
        }
        let mut sep = Vec::new();
        for &c in &right {
            for &v in self.cells.cell(c) {
                if self.mark[v] == sl {
                    self.mark[v] = ASSIGNED;
                    sep.push(v);
                }
            }
        }
        self.dissect(left);
        self.dissect(right);
        self.nodes.push(Node { vars: sep, n_children: 2 });
    }
}

fn transpose(a: &SparseColMat<usize, Complex64>) -> SparseColMat<usize, Complex64> {
    a.as_ref().transpose().to_col_major().expect("transpose allocation")
}

enum Symmetry {
    None,
    Pattern,
    Values,
}

fn symmetry(a: &SparseColMat<usize, Complex64>) -> Symmetry {
    let a = a.as_ref();
    let scale = a.val().iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut values = true;
    for j in 0..a.ncols() {
        for (i, x) in a.row_idx_of_col(j).zip(a.val_of_col(j)) {
            let col = a.row_idx_of_col_raw(i);
            match col.binary_search(&j) {
                Ok(pos) => values &= (a.val_of_col(i)[pos] - x).norm() <= 1e-13 * scale,
                Err(_) => return Symmetry::None,
            }
        }
    }
    if values { Symmetry::Values } else { Symmetry::Pattern }
}

impl<T: FactorScalar> Multifrontal<T> {
    /// Factorizes `a`, whose sparsity pattern must be symmetric and covered
    /// by `cells`.
    pub fn factorize(a: &SparseColMat<usize, Complex64>, cells: &Cells) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || cells.vars.iter().any(|&v| v >= n) {
            return Err(invalid("multifrontal solve needs a square matrix and cells indexing its unknowns"));
        }
        let at = match symmetry(a) {
            Symmetry::None => return Err(invalid("multifrontal solve needs a structurally symmetric matrix")),
            Symmetry::Values => None,
            Symmetry::Pattern => Some(transpose(a)),
        };

        let mut dis = Dissector { cells, mark: vec![0; n], stamp: 0, nodes: Vec::new() };
        dis.dissect((0..cells.len()).collect());
        let mut nodes = dis.nodes;
        let orphans: Vec<usize> = (0..n).filter(|&v| dis.mark[v] != ASSIGNED).collect();
        if !orphans.is_empty() {
            // Unknowns outside every cell couple to nothing but themselves.
            nodes.insert(0, Node { vars: orphans, n_children: 0 });
            nodes.push(Node { vars: Vec::new(), n_children: 2 });
        }
        let mut rank = vec![0usize; n];
        let mut next = 0;
        for node in &nodes {
            for &v in &node.vars {
                rank[v] = next;
                next += 1;
            }
        }

        let mut loc = vec![usize::MAX; n];
        let mut seen = vec![usize::MAX; n];
        let mut stack: Vec<(Vec<usize>, Mat<Complex64>)> = Vec::new();
        let mut fronts = Vec::with_capacity(nodes.len());
        let mut start = 0;
        for (t, node) in nodes.iter().enumerate() {
            let r0 = start;
            let r1 = r0 + node.vars.len();
            start = r1;
            let children = stack.split_off(stack.len() - node.n_children);
            let mut rows = Vec::new();
            let mut push = |u: usize, rows: &mut Vec<usize>| {
                if rank[u] >= r1 && seen[u] != t {
                    seen[u] = t;
                    rows.push(u);
                }
            };
            for &v in &node.vars {
                for u in a.as_ref().row_idx_of_col(v) {
                    push(u, &mut rows);
                }
            }
            for (crows, _) in &children {
                for &u in crows {
                    push(u, &mut rows);
                }
            }
            rows.sort_by_key(|&u| rank[u]);
            let s = node.vars.len();
            let m = s + rows.len();
            for (l, &v) in node.vars.iter().chain(&rows).enumerate() {
                loc[v] = l;
            }

            let mut f = Mat::<Complex64>::zeros(m, m);
            for &v in &node.vars {
                let lv = loc[v];
                let col = a.as_ref();
                for (u, val) in col.row_idx_of_col(v).zip(col.val_of_col(v)) {
                    if rank[u] >= r0 {
                        f[(loc[u], lv)] += *val;
                    }
                }
                let row = at.as_ref().unwrap_or(a).as_ref();
                for (u, val) in row.row_idx_of_col(v).zip(row.val_of_col(v)) {
                    if rank[u] >= r1 {
                        f[(lv, loc[u])] += *val;
                    }
                }
            }
            for (crows, upd) in &children {
                for (b, &ub) in crows.iter().enumerate() {
                    let lb = loc[ub];
                    for (a_, &ua) in crows.iter().enumerate() {
                        f[(loc[ua], lb)] += upd[(a_, b)];
                    }
                }
            }
            drop(children);
            for &v in node.vars.iter().chain(&rows) {
                loc[v] = usize::MAX;
            }

            let r = rows.len();
            if s == 0 {
                stack.push((rows.clone(), f));
                fronts.push(Front { vars: Vec::new(), rows, lu: None, upper: Mat::zeros(0, 0), lower: None });
                continue;
            }
            let lu = DenseLu::new(f.as_ref().submatrix(0, 0, s, s).to_owned());
            if lu.is_singular() {
                return Err(invalid("zero pivot in multifrontal factorization"));
            }
            let upper = f.as_ref().submatrix(0, s, s, r).to_owned();
            let mut x = upper.clone();
            lu.solve_in_place(x.as_mut());
            let lower = f.as_ref().submatrix(s, 0, r, s).to_owned();
            let mut update = f.as_ref().submatrix(s, s, r, r).to_owned();
            drop(f);
            matmul(update.as_mut(), Accum::Add, lower.as_ref(), x.as_ref(), -Complex64::new(1.0, 0.0), Par::Seq);
            stack.push((rows.clone(), update));
            let lower = at.as_ref().map(|_| cast(lower.as_ref()));
            let (lu, upper) = (lu.cast(), cast(upper.as_ref()));
            fronts.push(Front { vars: node.vars.clone(), rows, lu: Some(lu), upper, lower });
        }
        Ok(Self { n, fronts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let one = T::from_c64(Complex64::new(1.0, 0.0));
        let mut w: Vec<T> = b.iter().map(|&z| T::from_c64(z)).collect();
        for f in &self.fronts {
            let Some(lu) = &f.lu else { continue };
            let mut z = Mat::<T>::from_fn(f.vars.len(), 1, |i, _| w[f.vars[i]]);
            lu.solve_in_place(z.as_mut());
            for (i, &v) in f.vars.iter().enumerate() {
                w[v] = z[(i, 0)];
            }
            if f.rows.is_empty() {
                continue;
            }
            let mut y = Mat::<T>::zeros(f.rows.len(), 1);
            match &f.lower {
                Some(l) => matmul(y.as_mut(), Accum::Replace, l.as_ref(), z.as_ref(), one, Par::Seq),
                None => matmul(y.as_mut(), Accum::Replace, f.upper.transpose(), z.as_ref(), one, Par::Seq),
            }
            for (i, &u) in f.rows.iter().enumerate() {
                w[u] -= y[(i, 0)];
            }
        }
        for f in self.fronts.iter().rev() {
            let Some(lu) = &f.lu else { continue };
            if f.rows.is_empty() {
                continue;
            }
            let x2 = Mat::<T>::from_fn(f.rows.len(), 1, |i, _| w[f.rows[i]]);
            let mut t = Mat::<T>::zeros(f.vars.len(), 1);
            matmul(t.as_mut(), Accum::Replace, f.upper.as_ref(), x2.as_ref(), one, Par::Seq);
            lu.solve_in_place(t.as_mut());
            for (i, &v) in f.vars.iter().enumerate() {
                w[v] -= t[(i, 0)];
            }
        }
        w.into_iter().map(T::to_c64).collect()
    }

    /// Number of stored factor entries.
    pub fn factor_entries(&self) -> usize {
        self.fronts
            .iter()
            .map(|f| {
                let (s, r) = (f.vars.len(), f.rows.len());
                s * s + s * r * if f.lower.is_some() { 2 } else { 1 }
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::to_sparse;
    use rand::{Rng, SeedableRng};

    /// Five-point Laplacian minus `shift` on an `m x m` grid, with an optional
    /// antisymmetric drift.
    fn grid(m: usize, shift: f64, drift: f64) -> (SparseColMat<usize, Complex64>, Cells) {
        let n = m * m;
        let id = |i: usize, j: usize| i * m + j;
        let mut col_ptr = vec![0];
        let (mut rows, mut vals) = (Vec::new(), Vec::new());
        for c in 0..n {
            let (i, j) = (c / m, c % m);
            let mut entries = vec![(c, Complex64::new(4.0 - shift, 0.1))];
            if i > 0 { entries.push((id(i - 1, j), Complex64::new(-1.0 - drift, 0.0))) }
            if i + 1 < m { entries.push((id(i + 1, j), Complex64::new(-1.0 + drift, 0.0))) }
            if j > 0 { entries.push((id(i, j - 1), Complex64::new(-1.0, 0.0))) }
            if j + 1 < m { entries.push((id(i, j + 1), Complex64::new(-1.0, 0.0))) }
            entries.sort_by_key(|e| e.0);
            for (r, v) in entries {
                rows.push(r);
                vals.push(v);
            }
            col_ptr.push(rows.len());
        }
        let mut cells = Cells::new();
        for i in 0..m.saturating_sub(1) {
            for j in 0..m - 1 {
                cells.push([id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1)], Vec2::new(i as f64, j as f64));
            }
        }
        (to_sparse(n, col_ptr, rows, vals), cells)
    }

    fn check(m: usize, shift: f64, drift: f64) {
        let (a, cells) = grid(m, shift, drift);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Complex64> = (0..a.nrows()).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let mut b = vec![Complex64::new(0.0, 0.0); x.len()];
        for j in 0..x.len() {
            for (i, v) in a.as_ref().row_idx_of_col(j).zip(a.as_ref().val_of_col(j)) {
                b[i] += v * x[j];
            }
        }
        let mf = Multifrontal::<Complex64>::factorize(&a, &cells).unwrap();
        let y = mf.solve(&b);
        let err = y.iter().zip(&x).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "m={m} err={err}");
    }

    #[test]
    fn solves_symmetric_indefinite_grid() {
        check(1, 3.7, 0.0);
        check(7, 0.0, 0.0);
        check(40, 3.7, 0.0);
    }

    #[test]
    fn solves_unsymmetric_grid() {
        check(33, 2.2, 0.3);
    }

    #[test]
    fn single_precision_factors_are_close() {
        let (a, cells) = grid(30, 2.2, 0.0);
        let x: Vec<Complex64> = (0..a.nrows()).map(|i| Complex64::new((i as f64).sin(), 1.0)).collect();
        let b = crate::fem::solve::tests_matvec(&a, &x);
        let y = Multifrontal::<Complex32>::factorize(&a, &cells).unwrap().solve(&b);
        let err = y.iter().zip(&x).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-3 && err > 1e-12, "{err}");
    }

    #[test]
    fn fill_is_far_below_dense() {
        let (a, cells) = grid(60, 1.0, 0.0);
        let mf = Multifrontal::<Complex64>::factorize(&a, &cells).unwrap();
        assert!(mf.factor_entries() < 3600 * 3600 / 20, "{}", mf.factor_entries());
    }
}
