//! Regime sweeps: plan, mesh, solve, reference, best approximation, ratios.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::beam::{beam_out, gaussian_beam, BeamSpec};
use super::{k_n, rho_values, RhoSource};
use crate::error::{invalid, Result};
use crate::fem::{best_approximation, difference_norm, galerkin, generate_mesh, local_norm, reference_solution, FeSpace, Medium};
use crate::geometry::{build_two_wall_scene, RegionTag, Scene, Vec2};
use crate::planner::{mesh_budgets, size_field, MeshBudget, Regime, RegimeSpec};
use crate::pml::{Formulation, PmlProfile};

/// `f_in` (beam at the cavity centre, unshifted scene) or `f_out` (beam from
/// outside aimed at the right wall, shifted scene).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    In,
    Out,
}

impl SourceKind {
    pub fn name(self) -> &'static str {
        match self {
            SourceKind::In => "in",
            SourceKind::Out => "out",
        }
    }

    pub fn scene(self) -> Scene {
        build_two_wall_scene(self == SourceKind::Out)
    }

    pub fn beam(self, scene: &Scene, k: f64) -> Result<BeamSpec> {
        match self {
            SourceKind::In => Ok(BeamSpec::incoming(k)),
            SourceKind::Out => beam_out(scene, k),
        }
    }
}

fn default_c_qo() -> f64 {
    2000.0
}
fn default_c_re() -> f64 {
    30000.0
}
fn default_hp_k() -> Option<f64> {
    Some(2.0)
}
fn default_grading() -> f64 {
    0.3
}
fn default_p() -> u32 {
    2
}
fn default_p_ref() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub regimes: Vec<Regime>,
    /// Wavenumber indices `n` with `k = n pi / L_gap`.
    pub ns: Vec<u32>,
    pub sources: Vec<SourceKind>,
    #[serde(default)]
    pub rho: RhoSource,
    /// Threshold constant for U1, QO and QOaway.
    #[serde(default = "default_c_qo")]
    pub c_qo: f64,
    /// Threshold constant for U2, RE and REaway.
    #[serde(default = "default_c_re")]
    pub c_re: f64,
    /// Fixed `h_P k`; `None` derives it from the threshold constant.
    #[serde(default = "default_hp_k")]
    pub hp_k: Option<f64>,
    #[serde(default = "default_grading")]
    pub grading: f64,
    #[serde(default = "default_p")]
    pub p: u32,
    #[serde(default = "default_p_ref")]
    pub p_ref: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            regimes: vec![Regime::U1, Regime::RE],
            ns: (6..=14).collect(),
            sources: vec![SourceKind::In],
            rho: RhoSource::Conjectured,
            c_qo: default_c_qo(),
            c_re: default_c_re(),
            hp_k: default_hp_k(),
            grading: default_grading(),
            p: default_p(),
            p_ref: default_p_ref(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() || self.ns.is_empty() || self.sources.is_empty() {
            return Err(invalid("sweep needs at least one regime, one n and one source"));
        }
        if self.ns.contains(&0) {
            return Err(invalid("wavenumber index n must be positive"));
        }
        if !(1..=3).contains(&self.p) || self.p_ref <= self.p || self.p_ref > 4 {
            return Err(invalid("need 1 <= p <= 3 and p < p_ref <= 4"));
        }
        if !(self.c_qo > 0.0 && self.c_re > 0.0) {
            return Err(invalid("threshold constants must be positive"));
        }
        Ok(())
    }

    pub fn regime_spec(&self, regime: Regime) -> RegimeSpec {
        let c = if regime.is_relative_error() { self.c_re } else { self.c_qo };
        RegimeSpec { regime, p: self.p, c, d: 2, hp_k: self.hp_k }
    }
}

/// One value per reporting region; `global` is the whole truncated domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionValues {
    pub k: f64,
    pub v: f64,
    pub i: f64,
    pub global: f64,
}

impl RegionValues {
    pub const NAN: RegionValues = RegionValues { k: f64::NAN, v: f64::NAN, i: f64::NAN, global: f64::NAN };

    pub fn as_array(&self) -> [f64; 4] {
        [self.k, self.v, self.i, self.global]
    }

    fn from_fn(mut f: impl FnMut(Option<RegionTag>) -> Result<f64>) -> Result<Self> {
        Ok(RegionValues {
            k: f(Some(RegionTag::K))?,
            v: f(Some(RegionTag::V))?,
            i: f(Some(RegionTag::I))?,
            global: f(None)?,
        })
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RegionValues { k: f(self.k), v: f(self.v), i: f(self.i), global: f(self.global) }
    }

    fn zip(a: &Self, b: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        RegionValues { k: f(a.k, b.k), v: f(a.v, b.v), i: f(a.i, b.i), global: f(a.global, b.global) }
    }
}

/// One (regime, k, source) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub regime: Regime,
    pub source: SourceKind,
    pub n: u32,
    pub k: f64,
    pub rho: f64,
    pub budget: Option<MeshBudget>,
    pub dofs: usize,
    pub elements: usize,
    /// `||u - u_h||` per region.
    pub galerkin_error: RegionValues,
    /// `||u - w_h||` per region.
    pub best_error: RegionValues,
    /// `||u||` per region.
    pub solution_norm: RegionValues,
    /// Local QO constants `||u - u_h|| / ||u - w_h||`.
    pub qo: RegionValues,
    /// Local-global relative errors `||u - u_h||_region / ||u||_global`.
    pub relative_error: RegionValues,
    pub seconds: f64,
    /// Failure message; the numeric fields are NaN when set.
    pub failure: Option<String>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Ordered by regime, source, then n.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Successful rows of one (regime, source) series, ordered by k.
    pub fn series(&self, regime: Regime, source: SourceKind) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.regime == regime && r.source == source && r.ok()).collect()
    }
}

struct Cell {
    regime: Regime,
    source: SourceKind,
    n: u32,
    k: f64,
    rho: f64,
}

fn region_predicate(scene: &Scene, tag: Option<RegionTag>) -> Result<Box<dyn Fn(Vec2) -> bool + Sync + '_>> {
    match tag {
        None => Ok(Box::new(|_| true)),
        Some(t) => {
            let r = scene.cover.get(t).ok_or_else(|| invalid(format!("scene has no {t} region")))?;
            Ok(Box::new(move |x| r.contains(x)))
        }
    }
}

fn run_cell(config: &SweepConfig, cell: &Cell) -> Result<SweepRow> {
    let start = std::time::Instant::now();
    let scene = cell.source.scene();
    let k = cell.k;
    let budget = mesh_budgets(&config.regime_spec(cell.regime), k, cell.rho)?;
    let field = size_field(&scene, &budget, config.grading)?;
    let mesh = Arc::new(generate_mesh(&scene, &|x| field.eval(x))?);
    let medium = Medium::Pml(PmlProfile::new(scene.r_pml_minus, scene.r_tr, Formulation::DivergenceForm)?);
    let beam = gaussian_beam(cell.source.beam(&scene, k)?)?;
    let f = move |x: Vec2| beam.eval(x);

    let space = Arc::new(FeSpace::new(mesh.clone(), config.p as usize)?);
    let reference = reference_solution(&space, &medium, k, &f, None, config.p_ref as usize)?;
    let uh = galerkin(space.clone(), &medium, k, &f, None)?;
    let wh = best_approximation(&reference, space.clone(), k)?;

    let galerkin_error = RegionValues::from_fn(|t| difference_norm(&reference, &uh, &*region_predicate(&scene, t)?, 1, k))?;
    let best_error = RegionValues::from_fn(|t| difference_norm(&reference, &wh, &*region_predicate(&scene, t)?, 1, k))?;
    let solution_norm = RegionValues::from_fn(|t| Ok(local_norm(&reference, &*region_predicate(&scene, t)?, 1, k)))?;
    let qo = RegionValues::zip(&galerkin_error, &best_error, |a, b| a / b);
    let global = solution_norm.global;
    let relative_error = galerkin_error.map(|e| e / global);
    if !(best_error.global <= galerkin_error.global * (1.0 + 1e-9) + 1e-12) {
        log::warn!(
            "{} n={} best approximation error {:.6e} exceeds Galerkin error {:.6e}",
            cell.regime,
            cell.n,
            best_error.global,
            galerkin_error.global
        );
    }
    let values = [galerkin_error, best_error, solution_norm].iter().flat_map(|r| r.as_array()).collect::<Vec<_>>();
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid("non-finite or negative error norm"));
    }
    Ok(SweepRow {
        regime: cell.regime,
        source: cell.source,
        n: cell.n,
        k,
        rho: cell.rho,
        budget: Some(budget),
        dofs: space.n_dofs,
        elements: mesh.triangles.len(),
        galerkin_error,
        best_error,
        solution_norm,
        qo,
        relative_error,
        seconds: start.elapsed().as_secs_f64(),
        failure: None,
    })
}

/// Runs every (regime, k_n, source) cell. Cell failures are recorded in the
/// row and do not stop the sweep.
pub fn run_regime_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut ns = config.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    let ks: Vec<f64> = ns.iter().map(|&n| k_n(n)).collect();
    let mut cells = Vec::new();
    for &regime in &config.regimes {
        for &source in &config.sources {
            let rhos = rho_values(&config.rho, &source.scene(), &ks)?;
            for ((&n, &k), &rho) in ns.iter().zip(&ks).zip(&rhos) {
                cells.push(Cell { regime, source, n, k, rho });
            }
        }
    }
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|cell| {
            log::info!("sweep cell {} {} n={} k={:.4}", cell.regime, cell.source.name(), cell.n, cell.k);
            run_cell(config, cell).unwrap_or_else(|e| {
                log::warn!("cell {} {} n={} failed: {e}", cell.regime, cell.source.name(), cell.n);
                SweepRow {
                    regime: cell.regime,
                    source: cell.source,
                    n: cell.n,
                    k: cell.k,
                    rho: cell.rho,
                    budget: None,
                    dofs: 0,
                    elements: 0,
                    galerkin_error: RegionValues::NAN,
                    best_error: RegionValues::NAN,
                    solution_norm: RegionValues::NAN,
                    qo: RegionValues::NAN,
                    relative_error: RegionValues::NAN,
                    seconds: 0.0,
                    failure: Some(e.to_string()),
                }
            })
        })
        .collect();
    Ok(SweepResult { config: config.clone(), rows })
}
