//! Billiard ray tracing in the exterior of the obstacles, phase-space
//! sampling of survival times, and the ray-based estimate of `rho(k)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Region, Scene, Vec2};

pub const MAX_BOUNCE: usize = 1_000_000;
/// Hits with `|xi . n|` below this continue straight through the tangency.
pub const EPS_TAN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayState {
    pub x: Vec2,
    pub xi: Vec2,
}

impl RayState {
    pub fn new(x: Vec2, xi: Vec2) -> Self {
        RayState { x, xi: xi.normalized() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub point: Vec2,
    pub xi_in: Vec2,
    pub xi_out: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exit {
    /// Time of first entry into `r > R_pml_minus`.
    Pml(f64),
    /// Still inside at `t_max`.
    Survived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: RayState,
    pub events: Vec<Event>,
    pub exit: Exit,
    pub t_max: f64,
}

impl Trajectory {
    /// Exit time, or `t_max` for surviving rays.
    pub fn exit_time(&self) -> f64 {
        match self.exit {
            Exit::Pml(t) => t,
            Exit::Survived => self.t_max,
        }
    }

    /// Final state at the exit point (or at `t_max`).
    pub fn end_state(&self) -> RayState {
        let (t0, x0, xi) = match self.events.last() {
            Some(e) => (e.time, e.point, e.xi_out),
            None => (0.0, self.start.x, self.start.xi),
        };
        RayState { x: x0 + (self.exit_time() - t0) * xi, xi }
    }
}

fn reflect(xi: Vec2, n: Vec2) -> Vec2 {
    (xi - 2.0 * xi.dot(n) * n).normalized()
}

/// Distance along `dir` from `x` (inside the disk) to the circle of radius `r`.
fn exit_distance(x: Vec2, dir: Vec2, r: f64) -> f64 {
    let b = x.dot(dir);
    let c = x.norm2() - r * r;
    let disc = (b * b - c).max(0.0);
    -b + disc.sqrt()
}

fn nearest_hit(scene: &Scene, x: Vec2, dir: Vec2, eps: f64) -> Option<(f64, Vec2)> {
    scene
        .obstacles
        .iter()
        .filter_map(|o| o.curve.boundary_hit(x, dir, eps))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

fn trace_impl(scene: &Scene, state: RayState, t_max: f64, mut events: Option<&mut Vec<Event>>) -> Result<Exit> {
    let eps = 1e-9 * scene.diameter();
    let (mut x, mut xi, mut t) = (state.x, state.xi, 0.0);
    let mut bounces = 0usize;
    loop {
        let t_exit = exit_distance(x, xi, scene.r_pml_minus);
        match nearest_hit(scene, x, xi, eps) {
            Some((th, n)) if th < t_exit => {
                if t + th >= t_max {
                    return Ok(Exit::Survived);
                }
                t += th;
                x = x + th * xi;
                if xi.dot(n).abs() >= EPS_TAN {
                    let out = reflect(xi, n);
                    if let Some(ev) = events.as_deref_mut() {
                        ev.push(Event { time: t, point: x, xi_in: xi, xi_out: out });
                    }
                    xi = out;
                    bounces += 1;
                    if bounces > MAX_BOUNCE {
                        return Err(Error::TooManyBounces(MAX_BOUNCE));
                    }
                }
            }
            _ => {
                return Ok(if t + t_exit >= t_max { Exit::Survived } else { Exit::Pml(t + t_exit) });
            }
        }
    }
}

fn check_start(scene: &Scene, x: Vec2) -> Result<()> {
    if scene.in_obstacle(x) {
        return Err(Error::InsideObstacle(x.x, x.y));
    }
    if x.norm() >= scene.r_pml_minus {
        return Err(Error::OutsideDomain(x.x, x.y));
    }
    Ok(())
}

/// Traces a ray with specular reflection until it enters the PML or `t_max`.
pub fn trace_ray(scene: &Scene, state: RayState, t_max: f64) -> Result<Trajectory> {
    check_start(scene, state.x)?;
    if !(t_max > 0.0) {
        return Err(invalid("t_max must be positive"));
    }
    let mut events = Vec::new();
    let exit = trace_impl(scene, state, t_max, Some(&mut events))?;
    Ok(Trajectory { start: state, events, exit, t_max })
}

/// Survival time `min(t_max, exit time)` without recording events.
pub fn survival_time(scene: &Scene, state: RayState, t_max: f64) -> Result<f64> {
    Ok(match trace_impl(scene, state, t_max, None)? {
        Exit::Pml(t) => t,
        Exit::Survived => t_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSampleGrid {
    pub points: Vec<Vec2>,
    /// Direction angles `2 pi j / M`.
    pub angles: Vec<f64>,
    pub delta: f64,
    pub t_max: Option<f64>,
    /// Row-major `points x directions` survival times, empty until filled.
    pub survival: Vec<f64>,
}

impl PhaseSampleGrid {
    pub fn m(&self) -> usize {
        self.angles.len()
    }

    pub fn direction(&self, j: usize) -> Vec2 {
        Vec2::from_angle(self.angles[j])
    }

    pub fn t(&self, i: usize, j: usize) -> f64 {
        self.survival[i * self.m() + j]
    }

    pub fn is_filled(&self) -> bool {
        !self.survival.is_empty()
    }
}

/// Square lattice of spacing `delta` (centered at the origin) clipped to
/// `r < R_pml_minus` outside the obstacles, with `m` equispaced directions.
pub fn sample_phase_space(scene: &Scene, delta: f64, m: usize) -> Result<PhaseSampleGrid> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("sampling step must be positive"));
    }
    if m < 8 || m % 2 == 1 {
        return Err(invalid("need an even number of directions, at least 8"));
    }
    let r = scene.r_pml_minus;
    let n = (r / delta).floor() as i64;
    let mut points = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let p = Vec2::new(i as f64 * delta, j as f64 * delta);
            if p.norm() < r && !scene.in_obstacle(p) {
                points.push(p);
            }
        }
    }
    let angles = (0..m).map(|j| 2.0 * std::f64::consts::PI * j as f64 / m as f64).collect();
    Ok(PhaseSampleGrid { points, angles, delta, t_max: None, survival: Vec::new() })
}

/// Fills `t_ij` in parallel; the result does not depend on scheduling.
pub fn fill_survival(scene: &Scene, mut grid: PhaseSampleGrid, t_max: f64) -> Result<PhaseSampleGrid> {
    if !(t_max > 0.0) {
        return Err(invalid("t_max must be positive"));
    }
    let m = grid.m();
    let dirs: Vec<Vec2> = (0..m).map(|j| grid.direction(j)).collect();
    let pts = &grid.points;
    let survival = (0..pts.len() * m)
        .into_par_iter()
        .map(|idx| survival_time(scene, RayState { x: pts[idx / m], xi: dirs[idx % m] }, t_max))
        .collect::<Result<Vec<f64>>>()?;
    grid.survival = survival;
    grid.t_max = Some(t_max);
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSets {
    pub k_hat: Vec<Vec2>,
    pub v_hat: Vec<Vec2>,
    pub inflation: f64,
}

impl RegionSets {
    pub fn k_region(&self) -> Region {
        Region::Cloud { points: self.k_hat.iter().map(|p| [p.x, p.y]).collect(), radius: self.inflation }
    }

    pub fn v_region(&self) -> Region {
        Region::Cloud { points: self.v_hat.iter().map(|p| [p.x, p.y]).collect(), radius: self.inflation }
    }
}

fn filled_t_max(grid: &PhaseSampleGrid) -> Result<f64> {
    match grid.t_max {
        Some(t) if grid.is_filled() => Ok(t),
        _ => Err(invalid("survival times not filled")),
    }
}

/// `K_hat`: sample points with some direction surviving to `t_max` both
/// forward and backward in time (the backward ray is the opposite direction).
/// `V_hat`: lattice points (spacing `delta`) crossed by the trajectories
/// launched from `K_hat` and farther than `inflation` from `K_hat`.
pub fn classify_regions(scene: &Scene, grid: &PhaseSampleGrid, inflation: f64) -> Result<RegionSets> {
    let t_max = filled_t_max(grid)?;
    let m = grid.m();
    let trapped: Vec<usize> =
        (0..grid.points.len()).filter(|&i| (0..m).any(|j| grid.t(i, j) >= t_max && grid.t(i, (j + m / 2) % m) >= t_max)).collect();
    let k_hat: Vec<Vec2> = trapped.iter().map(|&i| grid.points[i]).collect();

    let d = grid.delta;
    let near_k = |p: Vec2| k_hat.iter().any(|q| q.dist(p) < inflation);
    let cells: std::collections::BTreeSet<(i64, i64)> = trapped
        .par_iter()
        .map(|&i| {
            let mut cells = std::collections::BTreeSet::new();
            for j in 0..m {
                let start = RayState { x: grid.points[i], xi: grid.direction(j) };
                let traj = trace_ray(scene, start, t_max)?;
                let mut legs: Vec<(f64, Vec2, Vec2)> = vec![(0.0, start.x, start.xi)];
                legs.extend(traj.events.iter().map(|e| (e.time, e.point, e.xi_out)));
                let end = traj.exit_time();
                for (l, &(t0, x0, xi)) in legs.iter().enumerate() {
                    let t1 = legs.get(l + 1).map_or(end, |n| n.0);
                    let steps = ((t1 - t0) / (0.5 * d)).ceil() as usize;
                    for s in 0..=steps {
                        let p = x0 + ((t1 - t0) * s as f64 / steps.max(1) as f64) * xi;
                        cells.insert(((p.x / d).round() as i64, (p.y / d).round() as i64));
                    }
                }
            }
            Ok(cells)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let v_hat = cells
        .into_iter()
        .map(|(a, b)| Vec2::new(a as f64 * d, b as f64 * d))
        .filter(|&p| p.norm() < scene.r_pml_minus && !scene.in_obstacle(p) && !near_k(p))
        .collect();
    Ok(RegionSets { k_hat, v_hat, inflation })
}

/// Phase-space measure attached to one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeWeight {
    /// `delta^(2d-1)` per sample.
    #[default]
    LatticeCube,
    /// `delta^d * 2 pi / M`: the Liouville measure of a lattice cell times an angular cell.
    PhaseCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalProfile {
    /// Distinct survival times, ascending.
    pub times: Vec<f64>,
    /// `V(times[i])`, non-increasing.
    pub volume: Vec<f64>,
    pub v0: f64,
}

impl SurvivalProfile {
    /// `V(t)`: measure of samples with survival time `>= t`.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.v0;
        }
        let i = self.times.partition_point(|&s| s < t);
        self.volume.get(i).copied().unwrap_or(0.0)
    }

    /// Generalized inverse `sup{t : V(t) >= s}`; `None` if `s > V(0)`.
    pub fn inverse(&self, s: f64) -> Option<f64> {
        if s > self.v0 || self.v0 == 0.0 {
            return None;
        }
        let n = self.volume.partition_point(|&v| v >= s);
        Some(if n == 0 { 0.0 } else { self.times[n - 1] })
    }
}

pub fn survival_volume(grid: &PhaseSampleGrid) -> Result<SurvivalProfile> {
    survival_volume_weighted(grid, VolumeWeight::LatticeCube)
}

pub fn survival_volume_weighted(grid: &PhaseSampleGrid, weight: VolumeWeight) -> Result<SurvivalProfile> {
    filled_t_max(grid)?;
    let w = match weight {
        VolumeWeight::LatticeCube => grid.delta.powi(3),
        VolumeWeight::PhaseCell => grid.delta.powi(2) * 2.0 * std::f64::consts::PI / grid.m() as f64,
    };
    let mut t = grid.survival.clone();
    t.sort_by(f64::total_cmp);
    let total = t.len();
    let mut times = Vec::new();
    let mut volume = Vec::new();
    let mut i = 0;
    while i < total {
        times.push(t[i]);
        volume.push(w * (total - i) as f64);
        let v = t[i];
        while i < total && t[i] == v {
            i += 1;
        }
    }
    Ok(SurvivalProfile { times, volume, v0: w * total as f64 })
}

/// `rho = k V^{-1}(1/k)`, clamped below by `k`.
pub fn estimate_rho(profile: &SurvivalProfile, k: f64) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid("k must be positive"));
    }
    match profile.inverse(1.0 / k) {
        Some(t) => Ok((k * t).max(k)),
        None => {
            log::warn!("survival volume below 1/k = {:.3e}; clamping rho to k", 1.0 / k);
            Ok(k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_two_wall_scene;

    #[test]
    fn free_flight_exit() {
        let s = Scene::empty(2.2, 2.7).unwrap();
        let tr = trace_ray(&s, RayState::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)), 50.0).unwrap();
        assert!(tr.events.is_empty());
        assert!((tr.exit_time() - 2.2).abs() < 1e-12);
    }

    #[test]
    fn horizontal_ray_trapped() {
        let s = build_two_wall_scene(false);
        let tr = trace_ray(&s, RayState::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)), 50.0).unwrap();
        assert_eq!(tr.exit, Exit::Survived);
        let ev = tr.events[0];
        assert!((ev.xi_out.x + 1.0).abs() < 1e-12 && ev.xi_out.y.abs() < 1e-12);
        for w in tr.events.windows(2) {
            assert!(w[1].time > w[0].time);
        }
    }

    #[test]
    fn start_checks() {
        let s = build_two_wall_scene(false);
        assert!(trace_ray(&s, RayState::new(Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0)), 5.0).is_err());
        assert!(trace_ray(&s, RayState::new(Vec2::new(2.3, 0.0), Vec2::new(1.0, 0.0)), 5.0).is_err());
    }

    #[test]
    fn lattice_and_directions() {
        let s = Scene::empty(1.0, 1.5).unwrap();
        let g = sample_phase_space(&s, 0.5, 8).unwrap();
        assert_eq!(g.points.len(), 9);
        assert!((g.angles[1] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!(sample_phase_space(&s, 0.0, 8).is_err());
        assert!(sample_phase_space(&s, 0.5, 4).is_err());
        assert!(sample_phase_space(&s, 0.5, 9).is_err());
    }

    #[test]
    fn profile_inverse() {
        let grid = PhaseSampleGrid {
            points: vec![Vec2::new(0.0, 0.0)],
            angles: (0..8).map(|j| j as f64).collect(),
            delta: 1.0,
            t_max: Some(5.0),
            survival: vec![1.0, 1.0, 2.0, 3.0, 3.0, 3.0, 5.0, 0.5],
        };
        let p = survival_volume(&grid).unwrap();
        assert_eq!(p.v0, 8.0);
        assert_eq!(p.eval(2.0), 5.0);
        assert_eq!(p.eval(3.5), 1.0);
        assert_eq!(p.eval(6.0), 0.0);
        assert_eq!(p.inverse(4.0), Some(3.0));
        assert_eq!(p.inverse(1.0), Some(5.0));
        assert_eq!(p.inverse(9.0), None);
        assert!((estimate_rho(&p, 0.2).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(estimate_rho(&p, 0.1).unwrap(), 0.1);
        assert_eq!(estimate_rho(&p, 1.0).unwrap(), 5.0);
    }
}
