//! Compactly supported Gaussian beams of width `k^{-1/2}`.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{ObstacleSpec, Scene, Vec2};

/// Default support radius of the bump.
pub const R_BUMP: f64 = 0.4;

/// Distance from the aim point back to the centre of the outgoing beam.
pub const OUT_STANDOFF: f64 = 1.8;

/// Height of the aim point above the bottom of the right wall.
pub const OUT_AIM_LIFT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSpec {
    pub x0: Vec2,
    pub xi0: Vec2,
    pub k: f64,
    #[serde(default = "default_r_bump")]
    pub r_bump: f64,
}

fn default_r_bump() -> f64 {
    R_BUMP
}

impl BeamSpec {
    /// The beam at the origin travelling along `+x`.
    pub fn incoming(k: f64) -> Self {
        BeamSpec { x0: Vec2::new(0.0, 0.0), xi0: Vec2::new(1.0, 0.0), k, r_bump: R_BUMP }
    }
}

/// `chi(y) = exp(-|y|^2 / (2 (r^2 - |y|^2)))` inside the disk of radius `r`, zero outside.
pub fn bump(y: Vec2, r: f64) -> f64 {
    let s = y.norm2();
    let r2 = r * r;
    if s < r2 {
        (-0.5 * s / (r2 - s)).exp()
    } else {
        0.0
    }
}

/// `f(x) = C k^{1/4} chi(x - x0) exp(-k ((x - x0) . xi0_perp)^2) exp(i k x . xi0)`
/// with `C` chosen so that `||f||_{L^2} = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBeam {
    pub spec: BeamSpec,
    /// Normalization constant `C`.
    pub c: f64,
}

impl GaussianBeam {
    pub fn eval(&self, x: Vec2) -> Complex64 {
        let s = &self.spec;
        let y = x - s.x0;
        let chi = bump(y, s.r_bump);
        if chi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let t = y.dot(s.xi0.perp());
        let amp = self.c * s.k.powf(0.25) * chi * (-s.k * t * t).exp();
        Complex64::from_polar(amp, s.k * x.dot(s.xi0))
    }
}

/// `int chi(y)^2 exp(-2 k (y . e2)^2) dy` by composite Gauss-Legendre on the
/// bounding square in beam coordinates.
pub(crate) fn profile_integral(k: f64, r: f64, panels: usize, order: usize) -> f64 {
    let gl = GaussLegendre::new(NonZeroUsize::new(order).expect("order >= 1"));
    let pairs = gl.as_node_weight_pairs();
    let width = 2.0 * r / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    for i in 0..panels {
        let a = -r + i as f64 * width;
        for &(x, w) in pairs.iter() {
            nodes.push((a + 0.5 * width * (x + 1.0), 0.5 * width * w));
        }
    }
    let mut total = 0.0;
    for &(t, wt) in &nodes {
        let g = (-2.0 * k * t * t).exp();
        for &(s, ws) in &nodes {
            let chi = bump(Vec2::new(s, t), r);
            total += wt * ws * chi * chi * g;
        }
    }
    total
}

pub fn gaussian_beam(spec: BeamSpec) -> Result<GaussianBeam> {
    if !(spec.k > 0.0 && spec.k.is_finite()) {
        return Err(invalid("beam wavenumber must be positive"));
    }
    if !(spec.r_bump > 0.0) || (spec.xi0.norm() - 1.0).abs() > 1e-12 {
        return Err(invalid("beam needs r_bump > 0 and a unit direction"));
    }
    let integral = profile_integral(spec.k, spec.r_bump, 40, 8);
    let c = 1.0 / (spec.k.sqrt() * integral).sqrt();
    Ok(GaussianBeam { spec, c })
}

/// Beam from outside the cavity aimed near the bottom left corner of the
/// right-most wall, with direction `(cos(3/sqrt k), sin(3/sqrt k))`.
pub fn beam_out(scene: &Scene, k: f64) -> Result<BeamSpec> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid("beam wavenumber must be positive"));
    }
    let right = scene
        .obstacles
        .iter()
        .filter_map(|o| match o.spec {
            ObstacleSpec::RoundedRect { center, half_widths, .. } => Some((center, half_widths)),
            ObstacleSpec::Disk { .. } => None,
        })
        .max_by(|a, b| a.0[0].total_cmp(&b.0[0]))
        .ok_or_else(|| invalid("outgoing beam needs a rectangular wall"))?;
    let (center, half) = right;
    let aim = Vec2::new(center[0] - half[0], center[1] - half[1] + OUT_AIM_LIFT);
    let a = 3.0 / k.sqrt();
    let xi0 = Vec2::new(a.cos(), a.sin());
    Ok(BeamSpec { x0: aim - OUT_STANDOFF * xi0, xi0, k, r_bump: R_BUMP })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_two_wall_scene;

    #[test]
    fn normalization_is_converged() {
        for k in [5.0, 40.0, 140.0] {
            let coarse = profile_integral(k, R_BUMP, 40, 8);
            let fine = profile_integral(k, R_BUMP, 80, 12);
            assert!(((coarse - fine) / fine).abs() < 1e-7, "k={k}: {coarse} {fine}");
        }
    }

    #[test]
    fn unit_norm_on_independent_grid() {
        let k = 30.0;
        let b = gaussian_beam(BeamSpec { x0: Vec2::new(0.3, -0.2), xi0: Vec2::new(0.6, 0.8), k, r_bump: R_BUMP }).unwrap();
        let n = 1200;
        let h = 2.0 * R_BUMP / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = Vec2::new(0.3 - R_BUMP + (i as f64 + 0.5) * h, -0.2 - R_BUMP + (j as f64 + 0.5) * h);
                s += b.eval(x).norm_sqr() * h * h;
            }
        }
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn support_is_the_bump_disk() {
        let b = gaussian_beam(BeamSpec::incoming(20.0)).unwrap();
        assert_eq!(b.eval(Vec2::new(0.4, 0.0)), Complex64::new(0.0, 0.0));
        assert_eq!(b.eval(Vec2::new(0.0, -0.41)), Complex64::new(0.0, 0.0));
        assert!(b.eval(Vec2::new(0.399, 0.0)).norm() > 0.0);
    }

    #[test]
    fn outgoing_beam_geometry() {
        let scene = build_two_wall_scene(true);
        let s = beam_out(&scene, 100.0).unwrap();
        assert!((s.xi0.x - 0.3f64.cos()).abs() < 1e-15 && (s.xi0.y - 0.3f64.sin()).abs() < 1e-15);
        let k_region = scene.cover.get(crate::geometry::RegionTag::K).unwrap();
        assert!(!k_region.contains(s.x0));
        // Over the desk-scale range the beam centre also clears both walls.
        for n in [6, 10, 14] {
            let x0 = beam_out(&scene, crate::experiments::k_n(n)).unwrap().x0;
            assert!(scene.in_domain(x0) && !k_region.contains(x0), "n={n}: {x0}");
        }
        // The ray from x0 reaches the right wall's left face.
        let right = &scene.obstacles[1].curve;
        let (t, normal) = right.boundary_hit(s.x0, s.xi0, 1e-9).unwrap();
        let hit = s.x0 + t * s.xi0;
        assert!((normal.x + 1.0).abs() < 1e-12 && normal.y.abs() < 1e-12);
        let face_x = match scene.obstacles[1].spec {
            ObstacleSpec::RoundedRect { center, half_widths, .. } => center[0] - half_widths[0],
            _ => unreachable!(),
        };
        assert!((hit.x - face_x).abs() < 1e-9, "{hit}");
    }
}
