mod common;

use common::{plane_wave_series, SoundSoftDisk};
use helmplan::{Complex64, Vec2};

#[test]
fn jacobi_anger_reproduces_plane_wave() {
    let k = 10.0;
    for &(x, y) in &[(1.3, 0.2), (-0.7, 1.5), (0.0, -1.9)] {
        let p = Vec2::new(x, y);
        let s = plane_wave_series(k, p, 60);
        assert!((s - Complex64::from_polar(1.0, k * x)).norm() < 1e-10, "{p}: {s}");
    }
}

#[test]
fn scattered_field_cancels_incident_on_the_disk() {
    let o = SoundSoftDisk::new(10.0, 1.0, 40);
    for i in 0..24 {
        let p = Vec2::from_angle(i as f64 * 0.2618);
        assert!((o.scattered(p) + o.incident(p)).norm() < 1e-9);
    }
}

#[test]
fn scattered_field_is_outgoing() {
    // Far field: u_s ~ r^{-1/2} e^{ikr}, so |u_s| sqrt(r) settles and the phase advances by k dr.
    let o = SoundSoftDisk::new(10.0, 1.0, 40);
    let d = Vec2::from_angle(0.7);
    let (r1, r2) = (400.0, 400.0 + 0.05);
    let (a, b) = (o.scattered(r1 * d), o.scattered(r2 * d));
    let ratio = b / a * (r2 / r1).sqrt();
    assert!((ratio - Complex64::from_polar(1.0, 10.0 * 0.05)).norm() < 1e-3, "{ratio}");
}
