//! Radial PML coefficients in two dimensions.
//!
//! The scaled radius is `r + i f(r)` with the cubic ramp
//! `f(r) = amp (r - R-)^3 / (3 (R_tr - R-)^2)` beyond the onset radius `R-`.
//! With `alpha = 1 + i f'` and `beta = 1 + i f / r` the two formulations are
//!
//! * divergence form: `A = H diag(beta/alpha, alpha/beta) H^T`, `b = 0`, `n = alpha beta`;
//! * unmultiplied: `A = H diag(alpha^-2, beta^-2) H^T`, `n = 1` and a first-order
//!   term along the radial direction,
//!
//! where `H` rotates by the polar angle. In three dimensions the divergence
//! form uses `D = diag(beta^2/alpha, alpha, alpha)` and `n = alpha beta^2`;
//! that case is not implemented.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::Vec2;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    DivergenceForm,
    Unmultiplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmlProfile {
    pub r_pml_minus: f64,
    pub r_tr: f64,
    pub formulation: Formulation,
    /// Multiplier of the cubic ramp.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub f: f64,
    pub fp: f64,
    pub alpha: Complex64,
    pub beta: Complex64,
}

/// Coefficient triple of the sesquilinear form at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlCoefficients {
    pub a: [[Complex64; 2]; 2],
    pub b: [Complex64; 2],
    pub n: Complex64,
}

impl PmlCoefficients {
    pub const IDENTITY: PmlCoefficients =
        PmlCoefficients { a: [[ONE, ZERO], [ZERO, ONE]], b: [ZERO, ZERO], n: ONE };

    /// `A xi . conj(xi)`.
    pub fn quadratic_form(&self, xi: [Complex64; 2]) -> Complex64 {
        let mut s = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                s += self.a[i][j] * xi[j] * xi[i].conj();
            }
        }
        s
    }

    pub fn det_a(&self) -> Complex64 {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }
}

impl PmlProfile {
    pub fn new(r_pml_minus: f64, r_tr: f64, formulation: Formulation) -> Result<Self> {
        let p = PmlProfile { r_pml_minus, r_tr, formulation, amplitude: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_pml_minus > 0.0 && self.r_pml_minus < self.r_tr && self.amplitude >= 0.0) {
            return Err(invalid("PML profile needs 0 < R_pml_minus < R_tr and amplitude >= 0"));
        }
        Ok(())
    }

    fn width(&self) -> f64 {
        self.r_tr - self.r_pml_minus
    }

    /// `(f, f', f'')` of the ramp, zero below the onset radius.
    pub fn ramp(&self, r: f64) -> (f64, f64, f64) {
        let s = r - self.r_pml_minus;
        if s <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let w2 = self.width() * self.width();
        let a = self.amplitude;
        (a * s * s * s / (3.0 * w2), a * s * s / w2, 2.0 * a * s / w2)
    }

    pub fn scaling(&self, r: f64) -> Result<Scaling> {
        if !(r > 0.0 && r < self.r_tr) {
            return Err(invalid(format!("radius {r} outside (0, R_tr)")));
        }
        Ok(self.scaling_unchecked(r))
    }

    fn scaling_unchecked(&self, r: f64) -> Scaling {
        let (f, fp, _) = self.ramp(r);
        let beta = if f == 0.0 { ONE } else { ONE + I * (f / r) };
        Scaling { f, fp, alpha: ONE + I * fp, beta }
    }

    /// Coefficients at `x`. Inside the onset disk they are `(I, 0, 1)`,
    /// which also covers the origin where the polar frame is undefined.
    /// Points on or beyond `R_tr` are evaluated with the ramp continued,
    /// which only happens for quadrature nodes of boundary elements.
    pub fn coefficients(&self, x: Vec2) -> PmlCoefficients {
        let r = x.norm();
        if r <= self.r_pml_minus {
            return PmlCoefficients::IDENTITY;
        }
        let Scaling { f, fp, alpha, beta } = self.scaling_unchecked(r);
        let (c, s) = (x.x / r, x.y / r);
        let (d_r, d_t, n, b_r) = match self.formulation {
            Formulation::DivergenceForm => (beta / alpha, alpha / beta, alpha * beta, ZERO),
            Formulation::Unmultiplied => {
                let (_, _, fpp) = self.ramp(r);
                let dalpha = I * fpp;
                let dbeta = I * ((fp * r - f) / (r * r));
                let dlog = dalpha / alpha + dbeta / beta;
                // Sign chosen so that alpha beta times this operator equals the
                // divergence-form operator.
                (ONE / (alpha * alpha), ONE / (beta * beta), ONE, -dlog / (alpha * alpha))
            }
        };
        // H diag(d_r, d_t) H^T with H the rotation by the polar angle.
        let a = [
            [d_r * (c * c) + d_t * (s * s), (d_r - d_t) * (c * s)],
            [(d_r - d_t) * (c * s), d_r * (s * s) + d_t * (c * c)],
        ];
        PmlCoefficients { a, b: [b_r * c, b_r * s], n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GardingReport {
    /// Minimum over the samples of `Re(e^{i omega} A xi . conj(xi)) / |xi|^2`.
    pub min_ratio: f64,
    pub omega: f64,
}

fn garding_min(profile: &PmlProfile, samples: &[(Vec2, [Complex64; 2])], omega: f64) -> f64 {
    let rot = Complex64::from_polar(1.0, omega);
    samples
        .iter()
        .map(|(x, xi)| {
            let c = profile.coefficients(*x);
            let nrm = xi[0].norm_sqr() + xi[1].norm_sqr();
            (rot * c.quadratic_form(*xi)).re / nrm
        })
        .fold(f64::INFINITY, f64::min)
}

/// Coercivity check of the principal part over sample pairs `(x, xi)`.
/// The divergence form is checked with `omega = 0`; for the unmultiplied
/// form `omega` is scanned over a grid in `(-pi/2, pi/2)` and the best
/// minimum is reported.
pub fn garding_check(profile: &PmlProfile, samples: &[(Vec2, [Complex64; 2])]) -> GardingReport {
    match profile.formulation {
        Formulation::DivergenceForm => GardingReport { min_ratio: garding_min(profile, samples, 0.0), omega: 0.0 },
        Formulation::Unmultiplied => {
            let n = 180;
            (1..n)
                .map(|i| {
                    let omega = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / n as f64;
                    GardingReport { min_ratio: garding_min(profile, samples, omega), omega }
                })
                .max_by(|a, b| a.min_ratio.total_cmp(&b.min_ratio))
                .expect("non-empty scan")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_wall_profile(form: Formulation) -> PmlProfile {
        PmlProfile::new(2.2, 2.7, form).unwrap()
    }

    #[test]
    fn scaling_at_onset_and_end() {
        let p = two_wall_profile(Formulation::DivergenceForm);
        let s = p.scaling(2.2).unwrap();
        assert_eq!((s.f, s.fp), (0.0, 0.0));
        assert_eq!(s.alpha, ONE);
        assert_eq!(s.beta, ONE);
        let s = p.scaling(2.7 - 1e-12).unwrap();
        assert!((s.fp - 1.0).abs() < 1e-10);
        assert!((s.alpha - (ONE + I)).norm() < 1e-10);
        assert!(p.scaling(2.7).is_err());
        assert!(p.scaling(3.0).is_err());
    }

    #[test]
    fn f_over_r_nondecreasing() {
        let p = two_wall_profile(Formulation::DivergenceForm);
        let mut prev = 0.0;
        for i in 0..1000 {
            let r = 2.2 + 0.5 * i as f64 / 1000.0;
            let (f, _, _) = p.ramp(r);
            assert!(f / r >= prev);
            prev = f / r;
        }
    }

    #[test]
    fn coefficient_examples() {
        let p = two_wall_profile(Formulation::DivergenceForm);
        assert_eq!(p.coefficients(Vec2::new(1.0, 0.3)), PmlCoefficients::IDENTITY);
        assert_eq!(p.coefficients(Vec2::new(0.0, 0.0)), PmlCoefficients::IDENTITY);
        let r = 2.5;
        let s = p.scaling(r).unwrap();
        let c = p.coefficients(Vec2::new(r, 0.0));
        assert!((c.a[0][0] - s.beta / s.alpha).norm() < 1e-14);
        assert!((c.a[1][1] - s.alpha / s.beta).norm() < 1e-14);
        assert!(c.a[0][1].norm() < 1e-14);
        assert!((c.n - s.alpha * s.beta).norm() < 1e-14);
        assert_eq!(c.b, [ZERO, ZERO]);

        let q = two_wall_profile(Formulation::Unmultiplied);
        let c = q.coefficients(Vec2::new(r, 0.0));
        assert!((c.a[0][0] - ONE / (s.alpha * s.alpha)).norm() < 1e-14);
        assert!((c.a[1][1] - ONE / (s.beta * s.beta)).norm() < 1e-14);
        assert_eq!(c.n, ONE);
        assert!(c.b[1].norm() < 1e-14);
    }

    #[test]
    fn divergence_form_is_complex_symmetric() {
        let p = two_wall_profile(Formulation::DivergenceForm);
        for i in 0..50 {
            let x = (2.2 + 0.5 * i as f64 / 50.0) * Vec2::from_angle(0.37 * i as f64);
            let c = p.coefficients(x);
            assert!((c.a[0][1] - c.a[1][0]).norm() < 1e-14);
            assert!(c.det_a().norm() > 1e-3);
        }
    }

    /// Both formulations describe the same operator up to the factor alpha beta:
    /// `-div(A_div grad u) - n_div k^2 u = alpha beta (-div(D grad u) + b.grad u - k^2 u)`.
    /// Checked with centered differences on a smooth complex test function.
    #[test]
    fn formulations_agree_up_to_alpha_beta() {
        let pd = two_wall_profile(Formulation::DivergenceForm);
        let pu = two_wall_profile(Formulation::Unmultiplied);
        let k = 3.0;
        let u = |x: Vec2| Complex64::new(0.0, k * (0.6 * x.x + 0.8 * x.y)).exp() * (1.0 + x.x * x.y);
        let h = 1e-4;
        let grad = |x: Vec2| {
            [
                (u(Vec2::new(x.x + h, x.y)) - u(Vec2::new(x.x - h, x.y))) / (2.0 * h),
                (u(Vec2::new(x.x, x.y + h)) - u(Vec2::new(x.x, x.y - h))) / (2.0 * h),
            ]
        };
        let flux = |p: &PmlProfile, x: Vec2| {
            let c = p.coefficients(x);
            let g = grad(x);
            [c.a[0][0] * g[0] + c.a[0][1] * g[1], c.a[1][0] * g[0] + c.a[1][1] * g[1]]
        };
        let div = |p: &PmlProfile, x: Vec2| {
            let fx = (flux(p, Vec2::new(x.x + h, x.y))[0] - flux(p, Vec2::new(x.x - h, x.y))[0]) / (2.0 * h);
            let fy = (flux(p, Vec2::new(x.x, x.y + h))[1] - flux(p, Vec2::new(x.x, x.y - h))[1]) / (2.0 * h);
            fx + fy
        };
        for x in [Vec2::new(2.4, 0.3), Vec2::new(-1.5, 1.7), Vec2::new(0.2, -2.55)] {
            let cd = pd.coefficients(x);
            let cu = pu.coefficients(x);
            let g = grad(x);
            let lhs = -div(&pd, x) - cd.n * k * k * u(x);
            let rhs = cd.n * (-div(&pu, x) + cu.b[0] * g[0] + cu.b[1] * g[1] - k * k * u(x));
            assert!((lhs - rhs).norm() < 1e-4 * lhs.norm().max(1.0), "{x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn continuity_at_onset() {
        for form in [Formulation::DivergenceForm, Formulation::Unmultiplied] {
            let p = two_wall_profile(form);
            for i in 0..16 {
                let d = Vec2::from_angle(i as f64 * 0.4);
                let a = p.coefficients((2.2 - 1e-8) * d);
                let b = p.coefficients((2.2 + 1e-8) * d);
                for r in 0..2 {
                    for c in 0..2 {
                        assert!((a.a[r][c] - b.a[r][c]).norm() < 1e-6);
                    }
                    assert!((a.b[r] - b.b[r]).norm() < 1e-6);
                }
                assert!((a.n - b.n).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn garding_interior_is_one() {
        let p = two_wall_profile(Formulation::DivergenceForm);
        let samples: Vec<_> = (0..20)
            .map(|i| (Vec2::new(0.1 * i as f64, 0.0), [Complex64::new(1.0, i as f64), Complex64::new(-0.5, 0.2)]))
            .collect();
        let rep = garding_check(&p, &samples);
        assert!((rep.min_ratio - 1.0).abs() < 1e-14);
        assert_eq!(rep.omega, 0.0);
    }

    #[test]
    fn garding_unmultiplied_scan_finds_positive() {
        let p = two_wall_profile(Formulation::Unmultiplied);
        let mut samples = Vec::new();
        for i in 0..400 {
            let t = i as f64;
            let r = 2.2 + 0.4999 * ((t * 0.618).fract());
            let x = r * Vec2::from_angle(t * 1.3);
            let xi = [Complex64::new((t * 0.7).cos(), (t * 1.1).sin()), Complex64::new((t * 0.3).sin(), (t * 0.9).cos())];
            samples.push((x, xi));
        }
        let rep = garding_check(&p, &samples);
        assert!(rep.min_ratio > 0.0, "{rep:?}");
    }
}
