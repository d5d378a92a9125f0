//! Lagrange elements of degree 1 to 4 on the reference triangle with
//! equispaced nodes.
//!
//! Local node order: the three vertices, then `p - 1` nodes on each edge
//! `e0 = (v1, v2)`, `e1 = (v2, v0)`, `e2 = (v0, v1)` traversed in that
//! direction, then interior nodes.

use faer::prelude::*;
use faer::Mat;

use crate::error::{invalid, Result};

pub const MAX_DEGREE: usize = 4;

#[derive(Debug, Clone)]
pub struct Lagrange {
    pub p: usize,
    pub nodes: Vec<[f64; 2]>,
    exponents: Vec<(i32, i32)>,
    /// `coef[i][m]`: coefficient of monomial `m` in basis function `i`.
    coef: Vec<Vec<f64>>,
}

/// Values and reference gradients of every basis function at one point.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

pub fn n_local(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

pub fn n_interior(p: usize) -> usize {
    if p < 3 {
        0
    } else {
        (p - 1) * (p - 2) / 2
    }
}

fn reference_nodes(p: usize) -> Vec<[f64; 2]> {
    let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut nodes = v.to_vec();
    let h = 1.0 / p as f64;
    for (a, b) in [(1, 2), (2, 0), (0, 1)] {
        for t in 1..p {
            let s = t as f64 * h;
            nodes.push([v[a][0] + s * (v[b][0] - v[a][0]), v[a][1] + s * (v[b][1] - v[a][1])]);
        }
    }
    for j in 1..p {
        for i in 1..p {
            if i + j < p {
                nodes.push([i as f64 * h, j as f64 * h]);
            }
        }
    }
    nodes
}

impl Lagrange {
    pub fn new(p: usize) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&p) {
            return Err(invalid(format!("polynomial degree {p} not in 1..={MAX_DEGREE}")));
        }
        let nodes = reference_nodes(p);
        let exponents: Vec<(i32, i32)> =
            (0..=p as i32).flat_map(|d| (0..=d).map(move |b| (d - b, b))).collect();
        let n = nodes.len();
        let v = Mat::<f64>::from_fn(n, n, |i, m| {
            let (a, b) = exponents[m];
            nodes[i][0].powi(a) * nodes[i][1].powi(b)
        });
        let inv = v.partial_piv_lu().solve(Mat::<f64>::identity(n, n));
        let coef = (0..n).map(|i| (0..n).map(|m| inv[(m, i)]).collect()).collect();
        Ok(Lagrange { p, nodes, exponents, coef })
    }

    pub fn n_local(&self) -> usize {
        self.nodes.len()
    }

    pub fn tabulate(&self, x: [f64; 2]) -> Tabulation {
        let pw = |t: f64, e: i32| if e <= 0 { 1.0 } else { t.powi(e) };
        let mono: Vec<(f64, f64, f64)> = self
            .exponents
            .iter()
            .map(|&(a, b)| {
                let v = pw(x[0], a) * pw(x[1], b);
                let dx = if a > 0 { a as f64 * pw(x[0], a - 1) * pw(x[1], b) } else { 0.0 };
                let dy = if b > 0 { b as f64 * pw(x[0], a) * pw(x[1], b - 1) } else { 0.0 };
                (v, dx, dy)
            })
            .collect();
        let mut values = Vec::with_capacity(self.coef.len());
        let mut grads = Vec::with_capacity(self.coef.len());
        for c in &self.coef {
            let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
            for (ci, m) in c.iter().zip(&mono) {
                v += ci * m.0;
                gx += ci * m.1;
                gy += ci * m.2;
            }
            values.push(v);
            grads.push([gx, gy]);
        }
        Tabulation { values, grads }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronecker_property_and_partition_of_unity() {
        for p in 1..=MAX_DEGREE {
            let e = Lagrange::new(p).unwrap();
            assert_eq!(e.n_local(), n_local(p));
            for (i, x) in e.nodes.iter().enumerate() {
                let t = e.tabulate(*x);
                for (j, v) in t.values.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-10, "p={p} i={i} j={j} v={v}");
                }
            }
            let t = e.tabulate([0.21, 0.33]);
            assert!((t.values.iter().sum::<f64>() - 1.0).abs() < 1e-11);
            let gs: [f64; 2] = t.grads.iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
            assert!(gs[0].abs() < 1e-9 && gs[1].abs() < 1e-9);
        }
    }

    #[test]
    fn reproduces_polynomials_of_its_degree() {
        let e = Lagrange::new(3).unwrap();
        let f = |x: [f64; 2]| x[0].powi(3) - 2.0 * x[0] * x[1] * x[1] + x[1];
        let x = [0.17, 0.4];
        let t = e.tabulate(x);
        let interp: f64 = e.nodes.iter().zip(&t.values).map(|(n, v)| f(*n) * v).sum();
        assert!((interp - f(x)).abs() < 1e-12);
    }

    #[test]
    fn node_layout() {
        let e = Lagrange::new(4).unwrap();
        assert_eq!(e.nodes[3], [0.75, 0.25]);
        assert_eq!(e.nodes[6], [0.0, 0.75]);
        assert_eq!(e.nodes[9], [0.25, 0.0]);
        assert_eq!(n_interior(4), 3);
        assert_eq!(&e.nodes[12..], &[[0.25, 0.25], [0.5, 0.25], [0.25, 0.5]]);
        assert!(Lagrange::new(5).is_err());
    }
}
