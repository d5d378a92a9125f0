//! k-weighted Sobolev norms restricted to regions. An element belongs to a
//! region when its barycenter does.

use num_complex::Complex64;

use super::quadrature::triangle_rule;
use super::space::FieldFunction;
use crate::error::{invalid, Result};
use crate::geometry::Vec2;

pub type Region<'a> = &'a (dyn Fn(Vec2) -> bool + Sync);

/// Value and gradient of a function known in closed form.
pub type Exact<'a> = &'a (dyn Fn(Vec2) -> (Complex64, [Complex64; 2]) + Sync);

fn density(v: Complex64, g: [Complex64; 2], m: u32, k: f64) -> f64 {
    let mut s = v.norm_sqr();
    if m >= 1 {
        s += (g[0].norm_sqr() + g[1].norm_sqr()) / (k * k);
    }
    s
}

/// `(sum_{|a| <= m} k^{-2|a|} ||d^a u||^2_{L2(region)})^{1/2}` for `m` in {0, 1}.
pub fn local_norm(u: &FieldFunction, region: Region, m: u32, k: f64) -> f64 {
    let zero = |_: Vec2| (Complex64::new(0.0, 0.0), [Complex64::new(0.0, 0.0); 2]);
    error_norm(u, &zero, region, m, k)
}

/// Norm of `u - exact`.
pub fn error_norm(u: &FieldFunction, exact: Exact, region: Region, m: u32, k: f64) -> f64 {
    let space = &u.space;
    let rule = triangle_rule(2 * space.p + 4).expect("low degree rule");
    let tabs: Vec<_> = rule.points.iter().map(|&x| space.element.tabulate(x)).collect();
    let mut total = 0.0;
    for e in 0..space.n_elements() {
        if !region(space.mesh.barycenter(e)) {
            continue;
        }
        let map = space.map(e);
        let mut s = 0.0;
        for (q, t) in tabs.iter().enumerate() {
            let (v, g) = u.combine(e, &t.values, &t.grads, &map);
            let (ve, ge) = exact(map.map(rule.points[q]));
            s += rule.weights[q] * density(v - ve, [g[0] - ge[0], g[1] - ge[1]], m, k);
        }
        total += s * map.det.abs();
    }
    total.sqrt()
}

/// Norm of `u - v` for fields on the same mesh (any degrees).
pub fn difference_norm(u: &FieldFunction, v: &FieldFunction, region: Region, m: u32, k: f64) -> Result<f64> {
    if !u.space.same_mesh(&v.space) {
        return Err(invalid("difference norm needs fields on the same mesh"));
    }
    let rule = triangle_rule(2 * u.space.p.max(v.space.p))?;
    let tu: Vec<_> = rule.points.iter().map(|&x| u.space.element.tabulate(x)).collect();
    let tv: Vec<_> = rule.points.iter().map(|&x| v.space.element.tabulate(x)).collect();
    let mut total = 0.0;
    for e in 0..u.space.n_elements() {
        if !region(u.space.mesh.barycenter(e)) {
            continue;
        }
        let map = u.space.map(e);
        let mut s = 0.0;
        for q in 0..rule.weights.len() {
            let (a, ga) = u.combine(e, &tu[q].values, &tu[q].grads, &map);
            let (b, gb) = v.combine(e, &tv[q].values, &tv[q].grads, &map);
            s += rule.weights[q] * density(a - b, [ga[0] - gb[0], ga[1] - gb[1]], m, k);
        }
        total += s * map.det.abs();
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fem::space::tests_support::square_mesh;
    use crate::fem::FeSpace;

    #[test]
    fn constant_and_plane_wave_norms() {
        let mesh = Arc::new(square_mesh(4));
        let s = Arc::new(FeSpace::new(mesh, 2).unwrap());
        let one = FieldFunction::interpolate(s.clone(), &|_| Complex64::new(1.0, 0.0));
        assert!((local_norm(&one, &|_| true, 0, 3.0) - 1.0).abs() < 1e-13);
        assert_eq!(local_norm(&one, &|x| x.x > 5.0, 1, 3.0), 0.0);
        let half = local_norm(&one, &|x| x.x < 0.5, 0, 3.0);
        assert!((half - 0.5f64.sqrt()).abs() < 1e-13);

        let k = 7.0;
        let zero = FieldFunction::zero(s);
        let wave = |x: Vec2| {
            let v = Complex64::from_polar(1.0, k * x.x);
            (v, [Complex64::new(0.0, k) * v, Complex64::new(0.0, 0.0)])
        };
        let n = error_norm(&zero, &wave, &|_| true, 1, k);
        assert!((n * n - 2.0).abs() < 1e-10, "{n}");
    }
}
