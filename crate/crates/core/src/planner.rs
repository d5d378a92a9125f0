//! Per-region mesh budgets, error-propagation matrices and size fields.
//!
//! Regions are indexed K, V, I, P (trapped, visible, invisible, PML).
//! Every regime threshold is split equally over its four terms, and all
//! unspecified constants are set to one.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{RegionTag, Scene, Vec2};
use crate::graph_paths::{certify_bound, CertResult, WeightedDigraph};

pub type Mat4 = [[f64; 4]; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    U1,
    QO,
    QOaway,
    U2,
    RE,
    REaway,
}

impl Regime {
    pub const ALL: [Regime; 6] = [Regime::U1, Regime::QO, Regime::QOaway, Regime::U2, Regime::RE, Regime::REaway];

    pub fn name(self) -> &'static str {
        match self {
            Regime::U1 => "U1",
            Regime::QO => "QO",
            Regime::QOaway => "QOaway",
            Regime::U2 => "U2",
            Regime::RE => "RE",
            Regime::REaway => "REaway",
        }
    }

    /// Regimes whose thresholds use the exponent 2p (relative-error family).
    pub fn is_relative_error(self) -> bool {
        matches!(self, Regime::U2 | Regime::RE | Regime::REaway)
    }

    /// Per region (K, V, I): `(exponent multiplier, weight)` with the
    /// threshold term `(h k)^(mult p) * weight(k, rho)`.
    fn terms(self, k: f64, rho: f64) -> [(u32, f64); 3] {
        let skr = (k * rho).sqrt();
        match self {
            Regime::U1 => [(1, rho), (1, rho), (1, rho)],
            Regime::QO => [(1, rho), (1, skr), (1, k)],
            Regime::QOaway => [(1, skr), (1, k), (1, k)],
            Regime::U2 => [(2, rho), (2, rho), (2, rho)],
            Regime::RE => [(2, rho), (2, skr), (2, k)],
            Regime::REaway => [(2, rho), (2, k), (2, k)],
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s) || r.name().replace("away", "-away").eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown regime {s}")))
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub regime: Regime,
    pub p: u32,
    /// Threshold constant.
    pub c: f64,
    #[serde(default = "two")]
    pub d: u32,
    /// Fixes `h_P k` instead of deriving it from `c`.
    #[serde(default)]
    pub hp_k: Option<f64>,
}

fn two() -> u32 {
    2
}

impl RegimeSpec {
    pub fn new(regime: Regime, p: u32, c: f64) -> Self {
        RegimeSpec { regime, p, c, d: 2, hp_k: None }
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 || !(self.c > 0.0 && self.c.is_finite()) || self.d != 2 {
            return Err(invalid("regime spec needs p >= 1, finite c > 0 and d = 2"));
        }
        if let Some(x) = self.hp_k {
            if !(x > 0.0 && x.is_finite()) {
                return Err(invalid("hp_k must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshBudget {
    pub h_k: f64,
    pub h_v: f64,
    pub h_i: f64,
    pub h_p: f64,
}

impl MeshBudget {
    pub fn uniform(h: f64) -> Self {
        MeshBudget { h_k: h, h_v: h, h_i: h, h_p: h }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.h_k, self.h_v, self.h_i, self.h_p]
    }

    pub fn from_array(h: [f64; 4]) -> Self {
        MeshBudget { h_k: h[0], h_v: h[1], h_i: h[2], h_p: h[3] }
    }

    pub fn get(&self, t: RegionTag) -> f64 {
        self.as_array()[t.index()]
    }
}

fn check_k_rho(k: f64, rho: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite() && rho.is_finite()) {
        return Err(invalid(format!("need finite k > 0 and rho, got k = {k}, rho = {rho}")));
    }
    if rho < k {
        return Err(invalid(format!("rho = {rho} must be at least k = {k}")));
    }
    Ok(())
}

/// Solves each regime term `(h k)^e w = c/4` for `h`; the P term is `(h_P k)^p = c/4`.
pub fn mesh_budgets(spec: &RegimeSpec, k: f64, rho: f64) -> Result<MeshBudget> {
    spec.validate()?;
    check_k_rho(k, rho)?;
    let p = spec.p as f64;
    let share = spec.c / 4.0;
    let t = spec.regime.terms(k, rho);
    let h = |(mult, w): (u32, f64)| (share / w).powf(1.0 / (mult as f64 * p)) / k;
    let h_p = match spec.hp_k {
        Some(x) => x / k,
        None => share.powf(1.0 / p) / k,
    };
    Ok(MeshBudget { h_k: h(t[0]), h_v: h(t[1]), h_i: h(t[2]), h_p })
}

/// The four threshold terms of a regime evaluated on a budget (P as `(h_P k)^p`).
pub fn threshold_terms(regime: Regime, budget: &MeshBudget, k: f64, rho: f64, p: u32) -> [f64; 4] {
    let t = regime.terms(k, rho);
    let hs = budget.as_array();
    let term = |i: usize| (hs[i] * k).powi((t[i].0 * p) as i32) * t[i].1;
    [term(0), term(1), term(2), (hs[3] * k).powi(p as i32)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationMatrices {
    pub c: Mat4,
    pub h: Mat4,
    pub tscr: Mat4,
    pub f: Mat4,
    pub m: Mat4,
    pub m_re: Mat4,
    pub m_omega: [f64; 4],
    pub m_re_omega: [f64; 4],
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|l| a[i][l] * b[l][j]).sum();
        }
    }
    c
}

fn row_sums(a: &Mat4) -> [f64; 4] {
    [0, 1, 2, 3].map(|i| a[i].iter().sum())
}

fn diag(v: [f64; 4]) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        m[i][i] = v[i];
    }
    m
}

/// Communication matrix: bounds on the solution in region i for data in region j.
pub fn communication_matrix(k: f64, rho: f64) -> Mat4 {
    let s = (k * rho).sqrt();
    [[rho, s, 0.0, 0.0], [s, k, k, 0.0], [0.0, k, k, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

/// Propagation matrix: simple-path sums of the four-region error graph
/// without the PML couplings.
pub fn tscr_matrix(budget: &MeshBudget, k: f64, rho: f64, p: u32) -> Mat4 {
    let a = budget.as_array().map(|h| (h * k).powi(2 * p as i32));
    let (ak, av, ai) = (a[0], a[1], a[2]);
    let s = (k * rho).sqrt();
    [
        [1.0, av * s, av * s * ai * k, 0.0],
        [ak * s, 1.0, ai * k, 0.0],
        [ak * s * av * k, av * k, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// `M = I + T C (H k)^p`, `M_RE = M (H k)^p` and their row sums.
/// Logs a warning if the budget violates the four-term mesh condition with `c = 1`.
pub fn build_matrices(budget: &MeshBudget, k: f64, rho: f64, p: u32) -> PropagationMatrices {
    let sum = mesh_condition_sum(budget, k, rho, p);
    if sum > 1.0 {
        log::warn!("budget violates the mesh condition: sum = {sum:.3e} > 1");
    }
    let c = communication_matrix(k, rho);
    let hs = budget.as_array();
    let h = diag(hs);
    let hkp = diag(hs.map(|x| (x * k).powi(p as i32)));
    let tscr = tscr_matrix(budget, k, rho, p);
    let mut m = mat4_mul(&mat4_mul(&tscr, &c), &hkp);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let m_re = mat4_mul(&m, &hkp);
    PropagationMatrices {
        c,
        h,
        tscr,
        f: [[1.0; 4]; 4],
        m_omega: row_sums(&m),
        m_re_omega: row_sums(&m_re),
        m,
        m_re,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Corollary {
    QOCoarse,
    REcoarse,
    U1,
    U2,
    QO,
    RE,
    QOaway,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Bounds the matrix `M` (quasi-optimality).
    QuasiOptimality,
    /// Bounds `M_RE` (relative error).
    RelativeError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedBound {
    pub corollary: Corollary,
    pub kind: BoundKind,
    pub matrix: Mat4,
    /// Bound on the row sums (`M_Omega` or `M_RE,Omega`).
    pub omega: [f64; 4],
}

/// Corollary bound shapes with all constants set to one; `eps` enters the
/// relative-error bounds as `sqrt(eps)`.
pub fn corollary_bound(cor: Corollary, k: f64, rho: f64, eps: f64) -> PredictedBound {
    let se = eps.sqrt();
    let kr = k / rho;
    let skr = kr.sqrt();
    let scale = |m: Mat4, s: f64| m.map(|r| r.map(|x| x * s));
    let (kind, matrix, omega) = match cor {
        Corollary::QOCoarse => {
            let (a, b) = (rho.sqrt(), k.sqrt());
            let m = [[a, a, a, 0.0], [b, b, b, 0.0], [b, b, b, 0.0], [0.0, 0.0, 0.0, 1.0]];
            (BoundKind::QuasiOptimality, m, [a, b, b, 1.0])
        }
        Corollary::REcoarse => {
            let r = (rho / k).sqrt();
            let m = [[1.0, r, r, 0.0], [skr, 1.0, 1.0, 0.0], [skr, 1.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
            (BoundKind::RelativeError, scale(m, se), [r, 1.0, 1.0, 1.0].map(|x| x * se))
        }
        Corollary::U1 => {
            let c = kr.powf(1.5) / rho;
            let m = [[1.0, skr, c, 0.0], [skr, 1.0, kr, 0.0], [c, kr, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
            (BoundKind::QuasiOptimality, m, row_sums(&m))
        }
        Corollary::U2 => {
            let c = kr.powf(1.5);
            let d = kr + 1.0 / rho.sqrt();
            let m = [
                [1.0, skr, c, 0.0],
                [skr, d, kr, 0.0],
                [c, kr * kr, d, 0.0],
                [0.0, 0.0, 0.0, 1.0 / rho.sqrt()],
            ];
            let m = scale(m, se);
            (BoundKind::RelativeError, m, row_sums(&m))
        }
        Corollary::QO => {
            let m = [
                [1.0, 1.0, 1.0 / (k * rho).sqrt(), 0.0],
                [skr, 1.0, 1.0, 0.0],
                [skr / rho, skr, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ];
            (BoundKind::QuasiOptimality, m, row_sums(&m))
        }
        Corollary::RE => {
            let m = [
                [1.0, 1.0, 1.0, 0.0],
                [skr, skr + (rho * k).powf(-0.25), 1.0, 0.0],
                [kr, kr, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ];
            let m = scale(m, se);
            (BoundKind::RelativeError, m, row_sums(&m))
        }
        Corollary::QOaway => {
            let r = (rho / k).sqrt();
            let m = [[r, r, r / (k * k), 0.0], [1.0, 1.0, 1.0, 0.0], [1.0 / k, 1.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
            (BoundKind::QuasiOptimality, m, [r, 1.0, 1.0, 1.0])
        }
    };
    PredictedBound { corollary: cor, kind, matrix, omega }
}

/// The corollary matching a regime (`REaway` uses the coarsest relative-error bound).
pub fn corollary_for(regime: Regime) -> Corollary {
    match regime {
        Regime::U1 => Corollary::U1,
        Regime::QO => Corollary::QO,
        Regime::QOaway => Corollary::QOaway,
        Regime::U2 => Corollary::U2,
        Regime::RE => Corollary::RE,
        Regime::REaway => Corollary::REcoarse,
    }
}

pub fn predicted_bound(spec: &RegimeSpec, k: f64, rho: f64) -> Result<PredictedBound> {
    spec.validate()?;
    check_k_rho(k, rho)?;
    Ok(corollary_bound(corollary_for(spec.regime), k, rho, spec.c))
}

/// Subdomain data for the general cover: the first `m_i` subdomains are
/// interior, the last `m_p` lie in the PML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverMeta {
    pub m_i: usize,
    pub m_p: usize,
    /// `adjacency[i][j]`: the subdomains `i` and `j` intersect.
    pub adjacency: Vec<Vec<bool>>,
    pub h: Vec<f64>,
}

pub type DMatrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralCoverMatrices {
    pub hdiag: DMatrix,
    pub hmin_2p: DMatrix,
    pub hmin_n: DMatrix,
    pub cmat: DMatrix,
    pub b: DMatrix,
    pub w: DMatrix,
    pub n: u32,
}

/// `H^min(l)_ij = min(h_i, h_j)^l` when the subdomains intersect, else 0.
pub fn hmin(meta: &CoverMeta, l: u32) -> DMatrix {
    let m = meta.h.len();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| if meta.adjacency[i][j] || i == j { meta.h[i].min(meta.h[j]).powi(l as i32) } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Assembles `B` and `W` of the general cover; `W` feeds the loop condition.
pub fn build_general_matrices(meta: &CoverMeta, cmat: &DMatrix, k: f64, p: u32, n_order: u32) -> Result<GeneralCoverMatrices> {
    let m = meta.m_i + meta.m_p;
    fn square<T>(a: &[Vec<T>], m: usize) -> bool {
        a.len() == m && a.iter().all(|r| r.len() == m)
    }
    if meta.h.len() != m || !square(&meta.adjacency, m) || !square(cmat, m) {
        return Err(Error::DimensionMismatch(format!("cover has {m} subdomains")));
    }
    for i in 0..m {
        for j in 0..m {
            if meta.adjacency[i][j] != meta.adjacency[j][i] {
                return Err(invalid("adjacency must be symmetric"));
            }
        }
        if !(meta.h[i] > 0.0) {
            return Err(invalid("mesh widths must be positive"));
        }
    }
    let (mi, mp) = (meta.m_i, meta.m_p);
    let pi = p as i32;
    let hk = |i: usize, e: i32| (meta.h[i] * k).powi(e);
    let hm2p = hmin(meta, 2 * p);
    let hmn = hmin(meta, n_order);
    let kn = k.powi(n_order as i32);
    let k2p = k.powi(2 * pi);
    let dim = 2 * mi + mp;

    let mut b = vec![vec![0.0; m]; dim];
    for r in 0..mi {
        for c in 0..mi {
            b[r][c] = cmat[r][c] * hk(c, pi);
        }
        b[mi + r][r] = hk(r, pi);
    }
    for r in 0..mp {
        b[2 * mi + r][mi + r] = hk(mi + r, pi);
    }

    let mut w = vec![vec![0.0; dim]; dim];
    for r in 0..mi {
        for c in 0..mi {
            let x = cmat[r][c] * hk(c, 2 * pi);
            w[r][c] = x;
            w[r][mi + c] = x;
            w[mi + r][c] = hm2p[r][c] * k2p;
            w[mi + r][mi + c] = hmn[r][c] * kn;
        }
        for c in 0..mp {
            w[r][2 * mi + c] = hmn[r][mi + c] * kn;
            w[mi + r][2 * mi + c] = hmn[r][mi + c] * kn;
        }
    }
    for r in 0..mp {
        for c in 0..mi {
            w[2 * mi + r][c] = hmn[mi + r][c] * kn;
            w[2 * mi + r][mi + c] = hmn[mi + r][c] * kn;
        }
        for c in 0..mp {
            w[2 * mi + r][2 * mi + c] = hmn[mi + r][mi + c] * kn;
        }
    }
    let hdiag = (0..m).map(|i| (0..m).map(|j| if i == j { meta.h[i] } else { 0.0 }).collect()).collect();
    Ok(GeneralCoverMatrices { hdiag, hmin_2p: hm2p, hmin_n: hmn, cmat: cmat.clone(), b, w, n: n_order })
}

/// Communication matrix of the four-region cover with the PML couplings:
/// K does not communicate with I or P, and V, I, P communicate with P at O(1).
pub fn resolvent_table(k: f64, rho: f64) -> DMatrix {
    let s = (k * rho).sqrt();
    vec![vec![rho, s, 0.0, 0.0], vec![s, k, k, 1.0], vec![0.0, k, k, 1.0], vec![0.0, 1.0, 1.0, 1.0]]
}

/// Cover metadata of the four-region cover (K and I do not meet; K does not meet P).
pub fn four_region_meta(budget: &MeshBudget) -> CoverMeta {
    let adj = vec![
        vec![true, true, false, false],
        vec![true, true, true, true],
        vec![false, true, true, true],
        vec![false, true, true, true],
    ];
    CoverMeta { m_i: 3, m_p: 1, adjacency: adj, h: budget.as_array().to_vec() }
}

/// Weighted adjacency of the four-region error-propagation graph; entry
/// `(i, j)` is the weight of the edge `i -> j`.
pub fn error_graph(budget: &MeshBudget, k: f64, rho: f64, p: u32, n_order: u32) -> DMatrix {
    let a = budget.as_array().map(|h| (h * k).powi(2 * p as i32));
    let s = (k * rho).sqrt();
    let hp = budget.h_p;
    let vp = (budget.h_v.min(hp) * k).powi(n_order as i32);
    let ip = (budget.h_i.min(hp) * k).powi(n_order as i32);
    vec![
        vec![a[0] * rho, a[1] * s, 0.0, 0.0],
        vec![a[0] * s, a[1] * k, a[2] * k, vp],
        vec![0.0, a[1] * k, a[2] * k, ip],
        vec![0.0, vp, ip, (hp * k).powi(n_order as i32)],
    ]
}

/// Four-term mesh condition sum with exponent 2p everywhere.
pub fn mesh_condition_sum(budget: &MeshBudget, k: f64, rho: f64, p: u32) -> f64 {
    let e = 2 * p as i32;
    (budget.h_k * k).powi(e) * rho + (budget.h_v * k).powi(e) * k + (budget.h_i * k).powi(e) * k + (budget.h_p * k).powi(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub simple_sum: f64,
    pub simple_condition: bool,
    pub c_loops: f64,
    pub loop_condition: bool,
    pub certification: CertResult,
}

/// Evaluates the four-term mesh condition against `c` and the simple-loop
/// condition (loop sum below one, certified bound) on the error graph with `N = 2p`.
pub fn check_conditions(budget: &MeshBudget, k: f64, rho: f64, p: u32, c: f64) -> Result<ConditionReport> {
    check_k_rho(k, rho)?;
    let simple_sum = mesh_condition_sum(budget, k, rho, p);
    let g = WeightedDigraph::new(error_graph(budget, k, rho, p, 2 * p))?;
    let cert = certify_bound(&g, 200)?;
    Ok(ConditionReport {
        simple_sum,
        simple_condition: simple_sum <= c,
        c_loops: cert.c,
        loop_condition: cert.pass,
        certification: cert,
    })
}

/// Graded mesh-size field: `h(x) = min over regions of (h_region + G dist(x, region))`.
#[derive(Debug, Clone)]
pub struct SizeField {
    regions: Vec<(RegionTag, crate::geometry::Region, f64)>,
    pub grading: f64,
}

impl SizeField {
    pub fn eval(&self, x: Vec2) -> f64 {
        self.regions
            .iter()
            .map(|(_, r, h)| h + self.grading * r.distance(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Minimum over the regions containing `x` (before grading); infinite if none.
    pub fn raw(&self, x: Vec2) -> f64 {
        self.regions.iter().filter(|(_, r, _)| r.contains(x)).map(|(_, _, h)| *h).fold(f64::INFINITY, f64::min)
    }

    /// Points of region `tag` far enough from finer regions that `h = h_tag` exactly.
    pub fn in_core(&self, tag: RegionTag, x: Vec2) -> bool {
        let Some((_, reg, h)) = self.regions.iter().find(|(t, _, _)| *t == tag) else {
            return false;
        };
        reg.contains(x)
            && self
                .regions
                .iter()
                .filter(|(t, _, hh)| *t != tag && *hh < *h)
                .all(|(_, r, hh)| r.distance(x) * self.grading >= h - hh)
    }

    pub fn min_h(&self) -> f64 {
        self.regions.iter().map(|(_, _, h)| *h).fold(f64::INFINITY, f64::min)
    }

    /// A field with constant value `h`.
    pub fn uniform(h: f64) -> SizeField {
        SizeField {
            regions: vec![(RegionTag::I, crate::geometry::Region::Annulus { r_min: 0.0, r_max: f64::INFINITY }, h)],
            grading: 1.0,
        }
    }
}

pub fn size_field(scene: &Scene, budget: &MeshBudget, grading: f64) -> Result<SizeField> {
    if !(grading > 0.0 && grading <= 1.0) {
        return Err(invalid("grading must lie in (0, 1]"));
    }
    if scene.cover.regions.is_empty() {
        return Err(invalid("empty region cover"));
    }
    let regions = scene.cover.regions.iter().map(|(t, r)| (*t, r.clone(), budget.get(*t))).collect();
    Ok(SizeField { regions, grading })
}

/// Degrees of freedom per unit area of a degree-`p` mesh of size `h`
/// (about `p^2` nodes per vertex, two triangles per vertex).
fn dof_density(h: f64, p: u32) -> f64 {
    let tri_area = 3f64.sqrt() / 4.0 * h * h;
    (p * p) as f64 / (2.0 * tri_area)
}

/// DoF estimate over the min-h partition of the cover, integrated on a grid
/// over the computational domain. Intended for ratios between budgets.
pub fn dof_estimate(scene: &Scene, budget: &MeshBudget, p: u32) -> Result<f64> {
    let field = size_field(scene, budget, 1.0)?;
    let n = 600;
    let r = scene.r_tr;
    let dx = 2.0 * r / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = Vec2::new(-r + (i as f64 + 0.5) * dx, -r + (j as f64 + 0.5) * dx);
            if scene.in_domain(x) {
                let h = match field.raw(x) {
                    h if h.is_finite() => h,
                    _ => field.eval(x),
                };
                total += dof_density(h, p) * dx * dx;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_two_wall_scene;

    #[test]
    fn qo_budget_formula() {
        let (k, rho, p, c) = (30.0, 900.0, 2u32, 0.8);
        let b = mesh_budgets(&RegimeSpec::new(Regime::QO, p, c), k, rho).unwrap();
        let s = (c / 4.0f64).powf(0.5);
        assert!((b.h_k - s / (k * rho.powf(0.5))).abs() < 1e-15);
        assert!((b.h_v - s / (k * (k * rho).powf(0.25))).abs() < 1e-15);
        assert!((b.h_i - s / (k * k.powf(0.5))).abs() < 1e-15);
        assert!((b.h_p - s / k).abs() < 1e-15);
    }

    #[test]
    fn u1_scaling_with_k() {
        let spec = RegimeSpec::new(Regime::U1, 2, 1.0);
        let h1 = mesh_budgets(&spec, 10.0, 100.0).unwrap().h_k;
        let h2 = mesh_budgets(&spec, 20.0, 400.0).unwrap().h_k;
        assert!(((h1 / h2).log2() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn re_scaling_with_k() {
        let spec = RegimeSpec::new(Regime::RE, 2, 1.0);
        let h1 = mesh_budgets(&spec, 10.0, 100.0).unwrap().h_k;
        let h2 = mesh_budgets(&spec, 20.0, 400.0).unwrap().h_k;
        assert!(((h1 / h2).log2() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn budgets_reject_bad_input() {
        let spec = RegimeSpec::new(Regime::QO, 2, 1.0);
        assert!(mesh_budgets(&spec, 10.0, 0.0).is_err());
        assert!(mesh_budgets(&spec, f64::NAN, 100.0).is_err());
        assert!(mesh_budgets(&RegimeSpec::new(Regime::QO, 0, 1.0), 10.0, 100.0).is_err());
    }

    #[test]
    fn matrix_entries() {
        let (k, rho, p) = (20.0, 400.0, 2);
        let b = mesh_budgets(&RegimeSpec::new(Regime::RE, p, 0.5), k, rho).unwrap();
        let m = build_matrices(&b, k, rho, p);
        assert_eq!(m.c[0][0], rho);
        assert_eq!(m.c[0][1], (k * rho).sqrt());
        assert_eq!(m.c[0][2], 0.0);
        assert_eq!(m.c[3][3], 1.0);
        for i in 0..4 {
            assert_eq!(m.tscr[i][i], 1.0);
            assert_eq!(m.h[i][i], b.as_array()[i]);
        }
        assert!((m.tscr[1][0] - (b.h_k * k).powi(4) * (k * rho).sqrt()).abs() < 1e-15);
        let hk = b.as_array().map(|h| (h * k).powi(2));
        for i in 0..4 {
            for j in 0..4 {
                assert!((m.m_re[i][j] - m.m[i][j] * hk[j]).abs() <= 1e-14 * m.m[i][j].abs().max(1.0));
            }
            assert!((m.m_omega[i] - m.m[i].iter().sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn tscr_is_simple_path_matrix_without_pml_edges() {
        let (k, rho, p) = (25.0, 625.0, 1);
        let b = MeshBudget { h_k: 0.004, h_v: 0.01, h_i: 0.02, h_p: 0.05 };
        let mut g = error_graph(&b, k, rho, p, 2);
        for i in 0..4 {
            g[i][3] = 0.0;
            g[3][i] = 0.0;
        }
        let t = crate::graph_paths::simple_path_matrix(&WeightedDigraph::new(g).unwrap()).unwrap();
        let ts = tscr_matrix(&b, k, rho, p);
        for i in 0..4 {
            for j in 0..4 {
                assert!((t[i][j] - ts[i][j]).abs() <= 1e-12 * ts[i][j].max(1.0), "{i}{j}");
            }
        }
    }

    #[test]
    fn corollary_examples() {
        let (k, rho) = (30.0, 900.0);
        let b = corollary_bound(Corollary::QO, k, rho, 1.0);
        assert!((b.matrix[1][0] - (k / rho).sqrt()).abs() < 1e-15);
        assert!((b.matrix[0][2] - 1.0 / (k * rho).sqrt()).abs() < 1e-15);
        let b = corollary_bound(Corollary::QOaway, k, rho, 1.0);
        assert_eq!(b.omega, [(rho / k).sqrt(), 1.0, 1.0, 1.0]);
        let b = corollary_bound(Corollary::U2, k, rho, 1.0);
        assert!((b.matrix[3][3] - 1.0 / rho.sqrt()).abs() < 1e-15);
        let spec = RegimeSpec::new(Regime::U2, 2, 0.25);
        let b = predicted_bound(&spec, k, rho).unwrap();
        assert_eq!(b.kind, BoundKind::RelativeError);
        assert!((b.matrix[3][3] - 0.5 / rho.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn general_matrices_blocks() {
        let (k, rho, p) = (20.0, 400.0, 2u32);
        let budget = MeshBudget { h_k: 0.002, h_v: 0.004, h_i: 0.01, h_p: 0.05 };
        let meta = four_region_meta(&budget);
        let g = build_general_matrices(&meta, &resolvent_table(k, rho), k, p, 2 * p).unwrap();
        assert_eq!(g.b.len(), 7);
        assert_eq!(g.w.len(), 7);
        assert_eq!(g.hmin_2p[0][2], 0.0);
        assert_eq!(g.hmin_2p[0][3], 0.0);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * b.abs();
        for i in 0..4 {
            assert!(close(g.hmin_n[i][i], budget.as_array()[i].powi(4)));
        }
        assert!(close(g.b[0][0], rho * (budget.h_k * k).powi(2)));
        assert!(close(g.b[6][3], (budget.h_p * k).powi(2)));
        assert!(close(g.w[0][0], rho * (budget.h_k * k).powi(4)));
        assert!(close(g.w[0][3], rho * (budget.h_k * k).powi(4)));
        assert!(close(g.w[1][6], (budget.h_v * k).powi(4)));
        assert!(close(g.w[6][2], (budget.h_i * k).powi(4)));
        let bad = CoverMeta { m_i: 3, m_p: 1, adjacency: meta.adjacency.clone(), h: vec![0.1; 3] };
        assert!(build_general_matrices(&bad, &resolvent_table(k, rho), k, p, 4).is_err());
    }

    #[test]
    fn condition_examples() {
        let (k, rho, p) = (30.0, 900.0, 2u32);
        let b = mesh_budgets(&RegimeSpec::new(Regime::RE, p, 0.5), k, rho).unwrap();
        let r = check_conditions(&b, k, rho, p, 0.5).unwrap();
        assert!(r.simple_condition);
        let mut b2 = b;
        b2.h_k *= 2.0;
        let first = |b: &MeshBudget| (b.h_k * k).powi(4) * rho;
        assert!((first(&b2) / first(&b) - 16.0).abs() < 1e-9);
        assert!(check_conditions(&b, k, 0.0, p, 0.5).is_err());
    }

    #[test]
    fn size_field_examples() {
        let s = build_two_wall_scene(false);
        let b = MeshBudget { h_k: 0.01, h_v: 0.02, h_i: 0.05, h_p: 0.1 };
        let f = size_field(&s, &b, 0.3).unwrap();
        assert_eq!(f.eval(Vec2::new(0.0, 0.0)), 0.01);
        assert!(f.in_core(RegionTag::K, Vec2::new(0.0, 0.0)));
        let overlap = Vec2::new(0.0, 0.85);
        assert_eq!(f.raw(overlap), 0.01);
        assert_eq!(f.eval(Vec2::new(1.9, 0.0)), 0.05);
        assert!(size_field(&s, &b, 0.0).is_err());
    }

    #[test]
    fn dof_ratios_at_n20() {
        let s = build_two_wall_scene(false);
        let k = 20.0 * std::f64::consts::PI / (0.8 * std::f64::consts::SQRT_2);
        let rho = k * k;
        let est = |r: Regime| {
            let b = mesh_budgets(&RegimeSpec::new(r, 2, 100.0), k, rho).unwrap();
            dof_estimate(&s, &b, 2).unwrap()
        };
        let ratio = est(Regime::U1) / est(Regime::QO);
        assert!(ratio >= 1.5, "U1/QO = {ratio}");
        let ratio = est(Regime::U2) / est(Regime::RE);
        assert!(ratio >= 1.5, "U2/RE = {ratio}");
    }
}
