//! Closed-form oracles shared by the integration tests.
#![allow(dead_code)]

use helmplan::{Complex64, Vec2};
use puruspe::{Jn, Yn};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn j_signed(n: i64, x: f64) -> f64 {
    let v = Jn(n.unsigned_abs() as u32, x);
    if n < 0 && n % 2 != 0 {
        -v
    } else {
        v
    }
}

fn h1_signed(n: i64, x: f64) -> Complex64 {
    let m = n.unsigned_abs() as u32;
    let v = Complex64::new(Jn(m, x), Yn(m, x));
    if n < 0 && n % 2 != 0 {
        -v
    } else {
        v
    }
}

/// `i^n` for integer `n`.
fn i_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => I,
        2 => Complex64::new(-1.0, 0.0),
        _ => -I,
    }
}

/// Field scattered by a sound-soft disk of radius `a` at the origin from the
/// plane wave `e^{ikx}`, as a Hankel series truncated at `|n| <= n_max`.
pub struct SoundSoftDisk {
    pub k: f64,
    pub a: f64,
    pub n_max: i64,
    coef: Vec<Complex64>,
}

impl SoundSoftDisk {
    pub fn new(k: f64, a: f64, n_max: i64) -> Self {
        let coef = (-n_max..=n_max).map(|n| -i_pow(n) * j_signed(n, k * a) / h1_signed(n, k * a)).collect();
        SoundSoftDisk { k, a, n_max, coef }
    }

    /// Scattered field at `x` (|x| >= a).
    pub fn scattered(&self, x: Vec2) -> Complex64 {
        let (r, th) = (x.norm(), x.y.atan2(x.x));
        (-self.n_max..=self.n_max)
            .zip(&self.coef)
            .map(|(n, c)| c * h1_signed(n, self.k * r) * Complex64::from_polar(1.0, n as f64 * th))
            .sum()
    }

    pub fn incident(&self, x: Vec2) -> Complex64 {
        Complex64::from_polar(1.0, self.k * x.x)
    }
}

/// Partial sum of the Jacobi-Anger expansion of `e^{ikx}`, for testing the Bessel layer.
pub fn plane_wave_series(k: f64, x: Vec2, n_max: i64) -> Complex64 {
    let (r, th) = (x.norm(), x.y.atan2(x.x));
    (-n_max..=n_max).map(|n| i_pow(n) * j_signed(n, k * r) * Complex64::from_polar(1.0, n as f64 * th)).sum()
}
