//! Scene description: obstacles, PML radii and the overlapping region cover.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(self * v.x, self * v.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// One piece of a closed boundary curve, traversed counter-clockwise
/// around the obstacle so the outward normal is the right-hand normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Line { a: Vec2, b: Vec2 },
    /// Points `center + radius (cos t, sin t)` for `t` from `start` to `start + sweep`.
    Arc { center: Vec2, radius: f64, start: f64, sweep: f64 },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { a, b } => a.dist(b),
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Point at normalized parameter `s` in [0, 1].
    pub fn point_at(&self, s: f64) -> Vec2 {
        match *self {
            Segment::Line { a, b } => a + s * (b - a),
            Segment::Arc { center, radius, start, sweep } => {
                center + radius * Vec2::from_angle(start + s * sweep)
            }
        }
    }

    fn arc_contains_angle(start: f64, sweep: f64, theta: f64) -> bool {
        if sweep.abs() >= TAU - 1e-12 {
            return true;
        }
        let (lo, span) = if sweep >= 0.0 { (start, sweep) } else { (start + sweep, -sweep) };
        let rel = (theta - lo).rem_euclid(TAU);
        rel <= span + 1e-12 || rel >= TAU - 1e-12
    }

    /// All ray parameters `t > eps` where `origin + t dir` meets this segment,
    /// with the outward normal at each hit.
    fn hits(&self, origin: Vec2, dir: Vec2, eps: f64, out: &mut Vec<(f64, Vec2)>) {
        match *self {
            Segment::Line { a, b } => {
                let e = b - a;
                let denom = dir.cross(e);
                if denom.abs() < 1e-300 {
                    return;
                }
                let w = a - origin;
                let t = w.cross(e) / denom;
                let s = w.cross(dir) / denom;
                if t > eps && (-1e-12..=1.0 + 1e-12).contains(&s) {
                    let n = Vec2::new(e.y, -e.x).normalized();
                    out.push((t, n));
                }
            }
            Segment::Arc { center, radius, start, sweep } => {
                let oc = origin - center;
                let bq = dir.dot(oc);
                let cq = oc.norm2() - radius * radius;
                let disc = bq * bq - cq;
                if disc < 0.0 {
                    return;
                }
                let sq = disc.sqrt();
                for t in [-bq - sq, -bq + sq] {
                    if t > eps {
                        let p = origin + t * dir;
                        let rel = p - center;
                        if Self::arc_contains_angle(start, sweep, rel.angle()) {
                            let n = (1.0 / radius) * rel;
                            out.push((t, if sweep >= 0.0 { n } else { -n }));
                        }
                    }
                }
            }
        }
    }
}

/// Closed, C1 boundary made of lines and circular arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedCurve {
    pub segments: Vec<Segment>,
}

impl ClosedCurve {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// First intersection with `t > eps` together with the outward normal there.
    pub fn boundary_hit(&self, origin: Vec2, dir: Vec2, eps: f64) -> Option<(f64, Vec2)> {
        let mut hits = Vec::with_capacity(4);
        for s in &self.segments {
            s.hits(origin, dir, eps, &mut hits);
        }
        hits.into_iter().min_by(|a, b| a.0.total_cmp(&b.0))
    }

    /// Even-odd point-in-curve test using ray crossings.
    pub fn encloses(&self, p: Vec2) -> bool {
        let dir = Vec2::from_angle(0.713_724_379_8);
        let mut hits = Vec::new();
        for s in &self.segments {
            s.hits(p, dir, 0.0, &mut hits);
        }
        hits.len() % 2 == 1
    }

    /// Polyline approximation whose chords are at most `max_len(x)` long,
    /// evaluated pessimistically along each segment; arcs get at least one
    /// vertex per 22.5 degrees. Returned without the
    /// closing duplicate vertex, in counter-clockwise order.
    pub fn discretize(&self, max_len: &dyn Fn(Vec2) -> f64) -> Vec<Vec2> {
        let mut pts = Vec::new();
        for seg in &self.segments {
            let len = seg.length();
            let hmin = (0..=16)
                .map(|i| max_len(seg.point_at(i as f64 / 16.0)))
                .fold(f64::INFINITY, f64::min);
            let mut n = ((len / hmin).ceil() as usize).max(1);
            if let Segment::Arc { sweep, .. } = seg {
                n = n.max((sweep.abs() / (PI / 8.0)).ceil() as usize);
            }
            for i in 0..n {
                pts.push(seg.point_at(i as f64 / n as f64));
            }
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleSpec {
    RoundedRect { center: [f64; 2], half_widths: [f64; 2], corner_radius: f64 },
    Disk { center: [f64; 2], radius: f64 },
}

impl ObstacleSpec {
    pub fn curve(&self) -> ClosedCurve {
        match *self {
            ObstacleSpec::Disk { center, radius } => ClosedCurve {
                segments: vec![Segment::Arc {
                    center: Vec2::new(center[0], center[1]),
                    radius,
                    start: -PI,
                    sweep: TAU,
                }],
            },
            ObstacleSpec::RoundedRect { center, half_widths, corner_radius: rc } => {
                let (cx, cy) = (center[0], center[1]);
                let (hx, hy) = (half_widths[0], half_widths[1]);
                let v = Vec2::new;
                let line = |a: Vec2, b: Vec2| Segment::Line { a, b };
                let arc = |c: Vec2, start: f64| Segment::Arc { center: c, radius: rc, start, sweep: FRAC_PI_2 };
                ClosedCurve {
                    segments: vec![
                        line(v(cx - hx + rc, cy - hy), v(cx + hx - rc, cy - hy)),
                        arc(v(cx + hx - rc, cy - hy + rc), -FRAC_PI_2),
                        line(v(cx + hx, cy - hy + rc), v(cx + hx, cy + hy - rc)),
                        arc(v(cx + hx - rc, cy + hy - rc), 0.0),
                        line(v(cx + hx - rc, cy + hy), v(cx - hx + rc, cy + hy)),
                        arc(v(cx - hx + rc, cy + hy - rc), FRAC_PI_2),
                        line(v(cx - hx, cy + hy - rc), v(cx - hx, cy - hy + rc)),
                        arc(v(cx - hx + rc, cy - hy + rc), PI),
                    ],
                }
            }
        }
    }

    /// Signed distance to the boundary, negative inside.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        match *self {
            ObstacleSpec::Disk { center, radius } => p.dist(Vec2::new(center[0], center[1])) - radius,
            ObstacleSpec::RoundedRect { center, half_widths, corner_radius } => {
                let qx = (p.x - center[0]).abs() - (half_widths[0] - corner_radius);
                let qy = (p.y - center[1]).abs() - (half_widths[1] - corner_radius);
                let outside = qx.max(0.0).hypot(qy.max(0.0));
                outside + qx.max(qy).min(0.0) - corner_radius
            }
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.signed_distance(p) < 0.0
    }

    fn max_radius(&self) -> f64 {
        match *self {
            ObstacleSpec::Disk { center, radius } => Vec2::new(center[0], center[1]).norm() + radius,
            ObstacleSpec::RoundedRect { center, half_widths, .. } => {
                let mut m: f64 = 0.0;
                for sx in [-1.0, 1.0] {
                    for sy in [-1.0, 1.0] {
                        m = m.max(Vec2::new(center[0] + sx * half_widths[0], center[1] + sy * half_widths[1]).norm());
                    }
                }
                m
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub spec: ObstacleSpec,
    pub curve: ClosedCurve,
}

impl From<ObstacleSpec> for Obstacle {
    fn from(spec: ObstacleSpec) -> Self {
        Obstacle { curve: spec.curve(), spec }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    K,
    V,
    I,
    P,
}

impl RegionTag {
    pub const ALL: [RegionTag; 4] = [RegionTag::K, RegionTag::V, RegionTag::I, RegionTag::P];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            RegionTag::K => "K",
            RegionTag::V => "V",
            RegionTag::I => "I",
            RegionTag::P => "P",
        }
    }
}

impl fmt::Display for RegionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bit set of region tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TagSet(pub u8);

impl TagSet {
    pub fn insert(&mut self, t: RegionTag) {
        self.0 |= 1 << t.index();
    }

    pub fn contains(self, t: RegionTag) -> bool {
        self.0 & (1 << t.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = RegionTag> {
        RegionTag::ALL.into_iter().filter(move |t| self.contains(*t))
    }
}

impl FromIterator<RegionTag> for TagSet {
    fn from_iter<I: IntoIterator<Item = RegionTag>>(iter: I) -> Self {
        let mut s = TagSet::default();
        for t in iter {
            s.insert(t);
        }
        s
    }
}

/// Membership predicate of one cover region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    Rect { xmin: f64, xmax: f64, ymin: f64, ymax: f64 },
    /// `{y > hi or y < lo} ∩ {r < r_max}`
    OutsideBandY { lo: f64, hi: f64, r_max: f64 },
    /// `{x > hi or x < lo} ∩ {r < r_max}`
    OutsideBandX { lo: f64, hi: f64, r_max: f64 },
    Annulus { r_min: f64, r_max: f64 },
    /// Union of open disks of a common radius.
    Cloud { points: Vec<[f64; 2]>, radius: f64 },
}

const OUTLINE_ARC_POINTS: usize = 512;

fn arc_points(r: f64, from: f64, to: f64, n: usize) -> Vec<Vec2> {
    (0..=n).map(|i| r * Vec2::from_angle(from + (to - from) * i as f64 / n as f64)).collect()
}

impl Region {
    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Region::Rect { xmin, xmax, ymin, ymax } => p.x > *xmin && p.x < *xmax && p.y > *ymin && p.y < *ymax,
            Region::OutsideBandY { lo, hi, r_max } => (p.y > *hi || p.y < *lo) && p.norm() < *r_max,
            Region::OutsideBandX { lo, hi, r_max } => (p.x > *hi || p.x < *lo) && p.norm() < *r_max,
            Region::Annulus { r_min, r_max } => {
                let r = p.norm();
                r > *r_min && r < *r_max
            }
            Region::Cloud { points, radius } => {
                points.iter().any(|q| Vec2::new(q[0], q[1]).dist(p) < *radius)
            }
        }
    }

    /// A 1-Lipschitz lower bound on the distance to the region, zero inside.
    pub fn distance(&self, p: Vec2) -> f64 {
        match self {
            Region::Rect { xmin, xmax, ymin, ymax } => {
                let dx = (xmin - p.x).max(p.x - xmax).max(0.0);
                let dy = (ymin - p.y).max(p.y - ymax).max(0.0);
                dx.hypot(dy)
            }
            Region::OutsideBandY { lo, hi, r_max } => {
                let band = (hi - p.y).max(0.0).min((p.y - lo).max(0.0));
                band.max((p.norm() - r_max).max(0.0))
            }
            Region::OutsideBandX { lo, hi, r_max } => {
                let band = (hi - p.x).max(0.0).min((p.x - lo).max(0.0));
                band.max((p.norm() - r_max).max(0.0))
            }
            Region::Annulus { r_min, r_max } => {
                let r = p.norm();
                (r_min - r).max(r - r_max).max(0.0)
            }
            Region::Cloud { points, radius } => points
                .iter()
                .map(|q| (Vec2::new(q[0], q[1]).dist(p) - radius).max(0.0))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Polygonal outline as rings (counter-clockwise outer, clockwise holes),
    /// or `None` when the region has no closed-form outline.
    pub fn outline(&self) -> Option<Vec<Vec<Vec2>>> {
        let n = OUTLINE_ARC_POINTS;
        match *self {
            Region::Rect { xmin, xmax, ymin, ymax } => Some(vec![vec![
                Vec2::new(xmin, ymin),
                Vec2::new(xmax, ymin),
                Vec2::new(xmax, ymax),
                Vec2::new(xmin, ymax),
            ]]),
            Region::OutsideBandY { lo, hi, r_max } => {
                let mut rings = Vec::new();
                if hi.abs() < r_max {
                    let a = (hi / r_max).asin();
                    rings.push(arc_points(r_max, a, PI - a, n));
                }
                if lo.abs() < r_max {
                    let a = (lo / r_max).asin();
                    rings.push(arc_points(r_max, PI - a, TAU + a, n));
                }
                Some(rings)
            }
            Region::OutsideBandX { lo, hi, r_max } => {
                let mut rings = Vec::new();
                if hi.abs() < r_max {
                    let a = (hi / r_max).acos();
                    rings.push(arc_points(r_max, -a, a, n));
                }
                if lo.abs() < r_max {
                    let a = (lo / r_max).acos();
                    rings.push(arc_points(r_max, a, TAU - a, n));
                }
                Some(rings)
            }
            Region::Annulus { r_min, r_max } => {
                let mut rings = vec![arc_points(r_max, 0.0, TAU, n)[..n].to_vec()];
                if r_min > 0.0 {
                    rings.push(arc_points(r_min, TAU, 0.0, n)[..n].to_vec());
                }
                Some(rings)
            }
            Region::Cloud { .. } => None,
        }
    }

    /// Region area: exact polygon area of the outline when available,
    /// otherwise midpoint sampling on a grid over the bounding box.
    pub fn area(&self) -> f64 {
        if let Some(rings) = self.outline() {
            return rings.iter().map(|r| polygon_signed_area(r)).sum::<f64>().abs();
        }
        let (lo, hi) = self.bounding_box();
        let m = 800;
        let dx = (hi.x - lo.x) / m as f64;
        let dy = (hi.y - lo.y) / m as f64;
        let mut count = 0usize;
        for i in 0..m {
            for j in 0..m {
                let p = Vec2::new(lo.x + (i as f64 + 0.5) * dx, lo.y + (j as f64 + 0.5) * dy);
                if self.contains(p) {
                    count += 1;
                }
            }
        }
        count as f64 * dx * dy
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        match self {
            Region::Rect { xmin, xmax, ymin, ymax } => (Vec2::new(*xmin, *ymin), Vec2::new(*xmax, *ymax)),
            Region::OutsideBandY { r_max, .. } | Region::OutsideBandX { r_max, .. } | Region::Annulus { r_max, .. } => {
                (Vec2::new(-r_max, -r_max), Vec2::new(*r_max, *r_max))
            }
            Region::Cloud { points, radius } => {
                let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for q in points {
                    lo = Vec2::new(lo.x.min(q[0]), lo.y.min(q[1]));
                    hi = Vec2::new(hi.x.max(q[0]), hi.y.max(q[1]));
                }
                (Vec2::new(lo.x - radius, lo.y - radius), Vec2::new(hi.x + radius, hi.y + radius))
            }
        }
    }
}

pub fn polygon_signed_area(ring: &[Vec2]) -> f64 {
    let n = ring.len();
    (0..n).map(|i| ring[i].cross(ring[(i + 1) % n])).sum::<f64>() * 0.5
}

/// Even-odd membership over a set of rings.
pub fn point_in_rings(p: Vec2, rings: &[Vec<Vec2>]) -> bool {
    let mut inside = false;
    for ring in rings {
        let n = ring.len();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (ring[i], ring[j]);
            if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
                inside = !inside;
            }
            j = i;
        }
    }
    inside
}

/// Convex hull (Andrew's monotone chain), counter-clockwise, no collinear points.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                if (b - a).cross(p - a) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Strict interior test for a counter-clockwise convex polygon.
pub fn in_convex_polygon(p: Vec2, hull: &[Vec2]) -> bool {
    let n = hull.len();
    n >= 3 && (0..n).all(|i| (hull[(i + 1) % n] - hull[i]).cross(p - hull[i]) > 0.0)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionCover {
    pub regions: BTreeMap<RegionTag, Region>,
}

impl RegionCover {
    pub fn classify(&self, p: Vec2) -> TagSet {
        self.regions.iter().filter(|(_, r)| r.contains(p)).map(|(t, _)| *t).collect()
    }

    pub fn get(&self, t: RegionTag) -> Option<&Region> {
        self.regions.get(&t)
    }
}

/// Serialized form of a [`Scene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub obstacles: Vec<ObstacleSpec>,
    pub r_pml_minus: f64,
    pub r_tr: f64,
    pub cover: RegionCover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneConfig", into = "SceneConfig")]
pub struct Scene {
    pub obstacles: Vec<Obstacle>,
    pub r_pml_minus: f64,
    pub r_tr: f64,
    pub cover: RegionCover,
}

impl From<Scene> for SceneConfig {
    fn from(s: Scene) -> Self {
        SceneConfig {
            obstacles: s.obstacles.iter().map(|o| o.spec).collect(),
            r_pml_minus: s.r_pml_minus,
            r_tr: s.r_tr,
            cover: s.cover,
        }
    }
}

impl TryFrom<SceneConfig> for Scene {
    type Error = Error;
    fn try_from(c: SceneConfig) -> Result<Self> {
        Scene::new(c.obstacles, c.r_pml_minus, c.r_tr, c.cover)
    }
}

/// Parameters of the two-rectangle benchmark scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoWallParams {
    pub l1: f64,
    pub l2: f64,
    pub x1: f64,
    pub corner_radius: f64,
    pub r_pml_minus: f64,
    pub r_tr: f64,
    pub delta: f64,
    /// Upward translation of the right rectangle.
    pub shift: f64,
}

impl Default for TwoWallParams {
    fn default() -> Self {
        let l1 = 0.7 * SQRT_2;
        TwoWallParams {
            l1,
            l2: 1.3 * SQRT_2,
            x1: 1.5 * SQRT_2,
            corner_radius: 0.05 * l1,
            r_pml_minus: 2.2,
            r_tr: 2.7,
            delta: SQRT_2 / 8.0,
            shift: 0.0,
        }
    }
}

impl TwoWallParams {
    pub fn shifted() -> Self {
        let p = Self::default();
        TwoWallParams { shift: 0.3 * p.l2, ..p }
    }

    pub fn l_gap(&self) -> f64 {
        self.x1 - self.l1
    }

    pub fn build(&self) -> Result<Scene> {
        let lg = self.l_gap();
        let (hx, hy) = (self.l1 / 2.0, self.l2 / 2.0);
        let rect = |cx: f64, cy: f64| ObstacleSpec::RoundedRect {
            center: [cx, cy],
            half_widths: [hx, hy],
            corner_radius: self.corner_radius,
        };
        let obstacles = vec![rect(-self.x1 / 2.0, 0.0), rect(self.x1 / 2.0, self.shift)];
        let lo = (-hy).max(-hy + self.shift);
        let hi = hy.min(hy + self.shift);
        let r_inner = 1.05 * self.r_pml_minus + 0.1;
        let half = lg / 2.0 + self.delta;
        let mut regions = BTreeMap::new();
        regions.insert(RegionTag::K, Region::Rect { xmin: -half, xmax: half, ymin: lo, ymax: hi });
        regions.insert(
            RegionTag::V,
            Region::OutsideBandY { lo: lo + self.delta, hi: hi - self.delta, r_max: r_inner },
        );
        regions.insert(RegionTag::I, Region::OutsideBandX { lo: -half, hi: half, r_max: r_inner });
        regions.insert(RegionTag::P, Region::Annulus { r_min: 1.05 * self.r_pml_minus, r_max: self.r_tr });
        Scene::new(obstacles, self.r_pml_minus, self.r_tr, RegionCover { regions })
    }
}

/// The benchmark scene: two rounded rectangles facing each other across a gap.
pub fn build_two_wall_scene(shifted: bool) -> Scene {
    let params = if shifted { TwoWallParams::shifted() } else { TwoWallParams::default() };
    params.build().expect("default two-wall parameters are valid")
}

/// Boolean query on the cover: every region containing `x`.
pub fn classify_point(scene: &Scene, x: Vec2) -> Result<TagSet> {
    if scene.in_obstacle(x) {
        return Err(Error::InsideObstacle(x.x, x.y));
    }
    if x.norm() >= scene.r_tr {
        return Err(Error::OutsideDomain(x.x, x.y));
    }
    Ok(scene.cover.classify(x))
}

pub fn boundary_hit(curve: &ClosedCurve, origin: Vec2, direction: Vec2, eps: f64) -> Option<(f64, Vec2)> {
    curve.boundary_hit(origin, direction, eps)
}

impl Scene {
    pub fn new(obstacles: Vec<ObstacleSpec>, r_pml_minus: f64, r_tr: f64, cover: RegionCover) -> Result<Self> {
        if !(r_pml_minus > 0.0 && r_pml_minus < r_tr && r_tr.is_finite()) {
            return Err(invalid(format!("need 0 < R_pml_minus < R_tr, got {r_pml_minus}, {r_tr}")));
        }
        for o in &obstacles {
            if o.max_radius() >= r_pml_minus {
                return Err(invalid("obstacle does not lie inside the PML onset disk"));
            }
        }
        Ok(Scene { obstacles: obstacles.into_iter().map(Obstacle::from).collect(), r_pml_minus, r_tr, cover })
    }

    /// Sound-soft disk of radius `radius` at the origin; no trapping, so the
    /// whole interior is covered by the I region.
    pub fn disk(radius: f64, r_pml_minus: f64, r_tr: f64) -> Result<Self> {
        let mut regions = BTreeMap::new();
        let r_inner = (1.05 * r_pml_minus + 0.1).min(0.5 * (r_pml_minus + r_tr));
        regions.insert(RegionTag::I, Region::Annulus { r_min: 0.0, r_max: r_inner });
        regions.insert(RegionTag::P, Region::Annulus { r_min: 1.05 * r_pml_minus, r_max: r_tr });
        Scene::new(
            vec![ObstacleSpec::Disk { center: [0.0, 0.0], radius }],
            r_pml_minus,
            r_tr,
            RegionCover { regions },
        )
    }

    /// Scene without obstacles, same radii and cover shape as [`Scene::disk`].
    pub fn empty(r_pml_minus: f64, r_tr: f64) -> Result<Self> {
        let mut s = Scene::disk(0.1, r_pml_minus, r_tr)?;
        s.obstacles.clear();
        Ok(s)
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.r_tr
    }

    pub fn in_obstacle(&self, p: Vec2) -> bool {
        self.obstacles.iter().any(|o| o.spec.contains(p))
    }

    pub fn in_domain(&self, p: Vec2) -> bool {
        p.norm() < self.r_tr && !self.in_obstacle(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_width() {
        let p = TwoWallParams::default();
        assert!((p.l_gap() - 0.8 * SQRT_2).abs() < 1e-12);
        assert!((p.l_gap() - 1.131_37).abs() < 1e-5);
    }

    #[test]
    fn classification_examples() {
        let s = build_two_wall_scene(false);
        let p = TwoWallParams::default();
        assert!(classify_point(&s, Vec2::new(0.0, 0.0)).unwrap().contains(RegionTag::K));
        assert_eq!(classify_point(&s, Vec2::new(2.5, 0.0)).unwrap(), TagSet::from_iter([RegionTag::P]));
        assert!(classify_point(&s, Vec2::new(0.0, 0.9 * p.l2 / 2.0)).unwrap().contains(RegionTag::V));
        assert!(classify_point(&s, Vec2::new(0.0, 0.5 * p.l2 / 2.0)).unwrap() == TagSet::from_iter([RegionTag::K]));
        let lg = p.l_gap();
        // (0.9 L_gap, 0) sits inside the right rectangle's footprint only if the rectangle reaches it
        let q = Vec2::new(0.9 * lg, 0.0);
        match classify_point(&s, q) {
            Ok(t) => assert!(t.contains(RegionTag::I)),
            Err(Error::InsideObstacle(..)) => assert!(s.in_obstacle(q)),
            Err(e) => panic!("{e}"),
        }
        assert_eq!(classify_point(&s, Vec2::new(1.8, 0.0)).unwrap(), TagSet::from_iter([RegionTag::I]));
        assert!(matches!(classify_point(&s, Vec2::new(-p.x1 / 2.0, 0.0)), Err(Error::InsideObstacle(..))));
        assert!(matches!(classify_point(&s, Vec2::new(2.8, 0.0)), Err(Error::OutsideDomain(..))));
    }

    #[test]
    fn boundary_hit_faces() {
        let s = build_two_wall_scene(false);
        let lg = TwoWallParams::default().l_gap();
        let (t, n) = boundary_hit(&s.obstacles[1].curve, Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), 1e-9).unwrap();
        assert!((t - lg / 2.0).abs() < 1e-12);
        assert!((n.x + 1.0).abs() < 1e-12 && n.y.abs() < 1e-12);
        assert!(boundary_hit(&s.obstacles[1].curve, Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), 1e-9).is_none());
        for o in &s.obstacles {
            assert!(o.curve.boundary_hit(Vec2::new(0.0, 1.5), Vec2::new(0.0, 1.0), 1e-9).is_none());
        }
    }

    #[test]
    fn corner_arc_hit_normal_is_radial() {
        let s = build_two_wall_scene(false);
        let p = TwoWallParams::default();
        let c = Vec2::new(p.l_gap() / 2.0 + p.corner_radius, p.l2 / 2.0 - p.corner_radius);
        let dir = Vec2::new(1.0, -1.0).normalized();
        let target = c + p.corner_radius * Vec2::from_angle(0.75 * PI);
        let origin = target - 0.3 * dir;
        let (t, n) = s.obstacles[1].curve.boundary_hit(origin, dir, 1e-9).unwrap();
        assert!((t - 0.3).abs() < 1e-9);
        assert!((n - Vec2::from_angle(0.75 * PI)).norm() < 1e-9);
    }

    #[test]
    fn curve_and_sdf_agree() {
        let s = build_two_wall_scene(true);
        for i in 0..60 {
            for j in 0..60 {
                let p = Vec2::new(-2.0 + 4.0 * i as f64 / 59.0 + 1e-3, -2.0 + 4.0 * j as f64 / 59.0 + 2e-3);
                for o in &s.obstacles {
                    assert_eq!(o.curve.encloses(p), o.spec.contains(p), "{p}");
                }
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let s = build_two_wall_scene(true);
        let js = s.to_json().unwrap();
        let back = Scene::from_json(&js).unwrap();
        assert_eq!(s, back);
        assert!(serde_json::from_str::<Scene>(r#"{"obstacles":[],"r_pml_minus":3,"r_tr":2,"cover":{}}"#).is_err());
    }

    #[test]
    fn hull_square() {
        let pts = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.5, 0.5), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!((polygon_signed_area(&h) - 1.0).abs() < 1e-12);
        assert!(in_convex_polygon(Vec2::new(0.5, 0.5), &h));
        assert!(!in_convex_polygon(Vec2::new(1.5, 0.5), &h));
    }
}
