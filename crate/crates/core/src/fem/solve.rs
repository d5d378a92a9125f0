//! Sparse direct solves with iterative refinement and a residual check.

use std::sync::Arc;

use faer::sparse::SparseColMat;
use faer::{prelude::*, Mat, Side};
use num_complex::{Complex32, Complex64};

use super::assembly::{assemble, assemble_gram, ComplexSystem, Medium, Source};
use super::multifrontal::{FactorScalar, Multifrontal};
use super::quadrature::triangle_rule;
use super::space::{FeSpace, FieldFunction};
use crate::error::{invalid, Error, Result};

/// Relative residual accepted by [`solve`].
pub const RESIDUAL_TOL: f64 = 1e-8;

fn matvec<T>(a: &SparseColMat<usize, T>, x: &[Complex64]) -> Vec<Complex64>
where
    T: Copy + Into<Complex64>,
{
    let a = a.as_ref();
    let mut y = vec![Complex64::new(0.0, 0.0); a.nrows()];
    for (j, xj) in x.iter().enumerate() {
        for (i, v) in a.row_idx_of_col(j).zip(a.val_of_col(j)) {
            y[i] += (*v).into() * xj;
        }
    }
    y
}

#[cfg(test)]
pub(crate) fn tests_matvec(a: &SparseColMat<usize, Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    matvec(a, x)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt()
}

/// Iterative refinement against the double-precision matrix. Stops at a
/// relative residual of `1e-3 RESIDUAL_TOL`, after `max_steps` corrections,
/// or when a correction fails to halve the residual. Returns the iterate and
/// its residual.
fn refine<T: FactorScalar>(sys: &ComplexSystem, mf: &Multifrontal<T>, max_steps: usize) -> (Vec<Complex64>, f64) {
    let bnorm = norm(&sys.rhs).max(f64::MIN_POSITIVE);
    let residual = |x: &[Complex64]| -> (Vec<Complex64>, f64) {
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return (Vec::new(), f64::INFINITY);
        }
        let ax = matvec(&sys.matrix, x);
        let r: Vec<Complex64> = sys.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let rn = norm(&r) / bnorm;
        (r, rn)
    };
    let mut x = mf.solve(&sys.rhs);
    let (mut r, mut rn) = residual(&x);
    for _ in 0..max_steps {
        if rn <= 1e-3 * RESIDUAL_TOL || !rn.is_finite() {
            break;
        }
        let mut next = x.clone();
        for (xi, d) in next.iter_mut().zip(mf.solve(&r)) {
            *xi += d;
        }
        let (r2, rn2) = residual(&next);
        if !(rn2 < rn) {
            break;
        }
        let stalled = rn2 > 0.5 * rn;
        (x, r, rn) = (next, r2, rn2);
        if stalled {
            break;
        }
    }
    (x, rn)
}

/// Solves the free-DoF system and returns the full coefficient vector
/// (Dirichlet values included).
///
/// The multifrontal factors are first stored in single precision and the
/// solution refined against the double-precision matrix; if that does not
/// reach [`RESIDUAL_TOL`], the system is refactored with double-precision
/// factors.
pub fn solve(sys: &ComplexSystem) -> Result<Vec<Complex64>> {
    let n = sys.n();
    let mut full = sys.lifting.clone();
    if n == 0 {
        return Ok(full);
    }
    let singular = |reason: String| Error::Singular { k: sys.k, reason };
    let mf = Multifrontal::<Complex32>::factorize(&sys.matrix, &sys.cells).map_err(|e| singular(e.to_string()))?;
    let (mut x, mut residual) = refine(sys, &mf, 20);
    drop(mf);
    if !(residual <= RESIDUAL_TOL) {
        log::debug!("single-precision factors reached residual {residual:.3e}; refactoring in double precision");
        let mf = Multifrontal::<Complex64>::factorize(&sys.matrix, &sys.cells).map_err(|e| singular(e.to_string()))?;
        (x, residual) = refine(sys, &mf, 4);
    }
    if residual.is_infinite() {
        return Err(singular("non-finite solution".into()));
    }
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::Residual { residual, tol: RESIDUAL_TOL });
    }
    for (i, &d) in sys.free.iter().enumerate() {
        full[d] = x[i];
    }
    Ok(full)
}

/// Assembles and solves on `space`.
pub fn galerkin(space: Arc<FeSpace>, medium: &Medium, k: f64, f: Source, g: Option<Source>) -> Result<FieldFunction> {
    let sys = assemble(&space, medium, k, f, g)?;
    let coeffs = solve(&sys)?;
    FieldFunction::new(space, coeffs)
}

/// Galerkin solution of degree `p_ref` on the mesh of `coarse`, used as a
/// proxy for the exact solution.
pub fn reference_solution(
    coarse: &FeSpace,
    medium: &Medium,
    k: f64,
    f: Source,
    g: Option<Source>,
    p_ref: usize,
) -> Result<FieldFunction> {
    if p_ref <= coarse.p {
        return Err(invalid("reference degree must exceed the coarse degree"));
    }
    let space = Arc::new(FeSpace::new(coarse.mesh.clone(), p_ref)?);
    galerkin(space, medium, k, f, g)
}

fn cholesky_solve(a: &SparseColMat<usize, f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Singular { k: f64::NAN, reason: format!("Gram matrix: {e:?}") })?;
    let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let x = llt.solve(&b);
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}

/// `H^1_k`-orthogonal projection of `reference` onto `coarse` (same mesh).
/// Dirichlet DoFs of `coarse` take the reference's values there, so the
/// projection lies in the same affine space as the Galerkin solution.
pub fn best_approximation(reference: &FieldFunction, coarse: Arc<FeSpace>, k: f64) -> Result<FieldFunction> {
    if !reference.space.same_mesh(&coarse) {
        return Err(invalid("best approximation needs spaces on the same mesh"));
    }
    let zero = Complex64::new(0.0, 0.0);
    let rule = triangle_rule(reference.space.p + coarse.p)?;
    let ref_tabs: Vec<_> = rule.points.iter().map(|&x| reference.space.element.tabulate(x)).collect();
    let node_tabs: Vec<_> = coarse.element.nodes.iter().map(|&x| reference.space.element.tabulate(x)).collect();

    let mut lifting = vec![zero; coarse.n_dofs];
    for e in 0..coarse.n_elements() {
        let map = coarse.map(e);
        for (l, &d) in coarse.element_dofs(e).iter().enumerate() {
            if coarse.dirichlet[d] {
                lifting[d] = reference.combine(e, &node_tabs[l].values, &node_tabs[l].grads, &map).0;
            }
        }
    }

    let eval = |e: usize, q: usize| {
        let map = reference.space.map(e);
        reference.combine(e, &ref_tabs[q].values, &ref_tabs[q].grads, &map)
    };
    let (gram, rhs, free) = assemble_gram(&coarse, k, &rule, &lifting, eval);
    let mut coeffs = lifting;
    if !free.is_empty() {
        let re = cholesky_solve(&gram, &rhs.iter().map(|c| c.re).collect::<Vec<_>>())?;
        let im = cholesky_solve(&gram, &rhs.iter().map(|c| c.im).collect::<Vec<_>>())?;
        for (i, &d) in free.iter().enumerate() {
            coeffs[d] = Complex64::new(re[i], im[i]);
        }
    }
    FieldFunction::new(coarse, coeffs)
}
