//! Gauss rules on the reference triangle `(0,0), (1,0), (0,1)`.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

/// Highest polynomial degree for which a rule is provided.
pub const MAX_DEGREE: usize = 40;

#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    /// Weights summing to the reference area 1/2.
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Collapsed (Duffy) tensor Gauss-Legendre rule exact for polynomials of total degree `degree`.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    if degree > MAX_DEGREE {
        return Err(Error::Quadrature(degree));
    }
    let n = (degree + 3) / 2;
    let gl = GaussLegendre::new(NonZeroUsize::new(n).expect("n >= 1"));
    let nodes: Vec<(f64, f64)> = gl.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for &(u, wu) in &nodes {
        for &(v, wv) in &nodes {
            points.push([u, v * (1.0 - u)]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    Ok(TriangleRule { points, weights, degree })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn integrates_monomials_exactly() {
        for degree in [0, 1, 3, 4, 6, 9, 10] {
            let r = triangle_rule(degree).unwrap();
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let q: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert!((q - exact).abs() < 1e-14, "degree {degree} x^{a} y^{b}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn too_high_degree_is_an_error() {
        assert!(matches!(triangle_rule(MAX_DEGREE + 1), Err(Error::Quadrature(_))));
    }
}
