//! Desk-scale experiments on the two-wall cavity: Gaussian-beam sources,
//! regime sweeps over `k_n = n pi / L_gap`, rate fits, the adaptive
//! refinement loop, and report generation.

pub mod adaptive;
pub mod beam;
pub mod report;
mod svg;
pub mod sweep;

use serde::{Deserialize, Serialize};

pub use adaptive::{adaptive_refine, AdaptiveOptions, AdaptiveResult, AdaptiveStep};
pub use beam::{beam_out, gaussian_beam, BeamSpec, GaussianBeam};
pub use report::{emit_report, CriterionStatus, Summary};
pub use sweep::{run_regime_sweep, RegionValues, SourceKind, SweepConfig, SweepResult, SweepRow};

use crate::billiards::{estimate_rho, fill_survival, sample_phase_space, survival_volume_weighted, SurvivalProfile, VolumeWeight};
use crate::error::{invalid, Result};
use crate::geometry::{Scene, TwoWallParams};

/// `k_n = n pi / L_gap` for the default two-wall geometry.
pub fn k_n(n: u32) -> f64 {
    n as f64 * std::f64::consts::PI / TwoWallParams::default().l_gap()
}

/// Least-squares fit of `log value = slope log k + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_rate(ks: &[f64], values: &[f64]) -> Result<RateFit> {
    if ks.len() != values.len() || ks.len() < 3 {
        return Err(invalid("rate fit needs at least three (k, value) pairs"));
    }
    if ks.iter().chain(values).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(invalid("rate fit needs positive finite samples"));
    }
    let x: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs at least two distinct k"));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(RateFit { slope, intercept, r2 })
}

/// Phase-space sampling used for ray-based estimates of `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayParams {
    /// Lattice spacing of the launch points.
    pub delta: f64,
    /// Number of launch directions.
    pub directions: usize,
    pub t_max: f64,
    #[serde(default = "phase_cell")]
    pub weight: VolumeWeight,
}

fn phase_cell() -> VolumeWeight {
    VolumeWeight::PhaseCell
}

impl Default for RayParams {
    fn default() -> Self {
        RayParams { delta: TwoWallParams::default().l_gap() / 20.0, directions: 4096, t_max: 400.0, weight: VolumeWeight::PhaseCell }
    }
}

/// Survival-volume profile of `scene` sampled with `params`.
pub fn ray_profile(scene: &Scene, params: &RayParams) -> Result<SurvivalProfile> {
    let grid = sample_phase_space(scene, params.delta, params.directions)?;
    let grid = fill_survival(scene, grid, params.t_max)?;
    survival_volume_weighted(&grid, params.weight)
}

/// How the solution-operator norm `rho(k)` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhoSource {
    /// `rho = k^2`.
    #[default]
    Conjectured,
    /// Billiard survival-volume estimate.
    Rays(RayParams),
    /// `rho = k^exponent`.
    Power { exponent: f64 },
}

/// Resolves `rho` at each `k`; ray sampling is done once.
pub fn rho_values(source: &RhoSource, scene: &Scene, ks: &[f64]) -> Result<Vec<f64>> {
    match source {
        RhoSource::Conjectured => Ok(ks.iter().map(|k| k * k).collect()),
        RhoSource::Power { exponent } => {
            if *exponent < 1.0 {
                return Err(invalid("rho exponent must be at least 1"));
            }
            Ok(ks.iter().map(|k| k.powf(*exponent)).collect())
        }
        RhoSource::Rays(params) => {
            let profile = ray_profile(scene, params)?;
            ks.iter().map(|&k| estimate_rho(&profile, k)).collect()
        }
    }
}
