//! Constrained Delaunay triangulation with Ruppert-style refinement driven
//! by a mesh-size field.
//!
//! Boundary polylines are inserted first, missing boundary segments are
//! recovered by midpoint splits, and the triangulation is then refined
//! until every interior triangle meets the radius-edge bound and the size
//! field. Segments are never crossed by a cavity, so they stay edges.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use robust::{incircle, orient2d, Coord};

use super::mesh::{BoundaryEdge, BoundaryTag, Mesh};
use crate::error::{Error, Result};
use crate::geometry::{Scene, Vec2};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [u32; 3],
    /// `n[i]` is the neighbor across the edge opposite `v[i]`.
    n: [u32; 3],
    alive: bool,
    inside: bool,
}

type Key = (u32, u32);

fn key(a: u32, b: u32) -> Key {
    (a.min(b), a.max(b))
}

fn c(p: Vec2) -> Coord<f64> {
    Coord { x: p.x, y: p.y }
}

enum Walk {
    Found(u32),
    Blocked(Key),
    Lost,
}

/// Parameters of the refinement.
#[derive(Debug, Clone, Copy)]
pub struct RefineParams {
    /// Upper bound on circumradius / shortest edge (1.45 keeps angles above 20 degrees).
    pub radius_edge: f64,
    /// Hard cap on the number of triangles.
    pub max_triangles: usize,
    /// Segments shorter than this are never split.
    pub min_segment: f64,
}

pub(crate) struct Cdt<'a> {
    pts: Vec<Vec2>,
    tris: Vec<Tri>,
    free: Vec<u32>,
    segs: HashMap<Key, BoundaryTag>,
    frozen: std::collections::HashSet<Key>,
    mark: Vec<u32>,
    stamp: u32,
    rng: u64,
    size: &'a dyn Fn(Vec2) -> f64,
}

struct Cavity {
    tris: Vec<u32>,
    /// Boundary edges `(a, b, outer neighbor, inside flag)` oriented as in the cavity triangle.
    edges: Vec<(u32, u32, u32, bool)>,
}

impl<'a> Cdt<'a> {
    fn new(extent: f64, size: &'a dyn Fn(Vec2) -> f64) -> Self {
        let s = 50.0 * extent;
        let pts = vec![Vec2::new(-s, -s), Vec2::new(s, -s), Vec2::new(0.0, s)];
        let tris = vec![Tri { v: [0, 1, 2], n: [NONE; 3], alive: true, inside: false }];
        Cdt {
            pts,
            tris,
            free: Vec::new(),
            segs: HashMap::new(),
            frozen: Default::default(),
            mark: vec![0],
            stamp: 0,
            rng: 0x9e37_79b9_7f4a_7c15,
            size,
        }
    }

    fn orient(&self, a: u32, b: u32, p: Vec2) -> f64 {
        orient2d(c(self.pts[a as usize]), c(self.pts[b as usize]), c(p))
    }

    fn in_circle(&self, t: u32, p: Vec2) -> bool {
        let v = self.tris[t as usize].v.map(|i| c(self.pts[i as usize]));
        incircle(v[0], v[1], v[2], c(p)) > 0.0
    }

    fn next_rand(&mut self) -> usize {
        self.rng ^= self.rng << 13;
        self.rng ^= self.rng >> 7;
        self.rng ^= self.rng << 17;
        (self.rng % 3) as usize
    }

    fn edge(&self, t: u32, i: usize) -> (u32, u32) {
        let v = self.tris[t as usize].v;
        (v[(i + 1) % 3], v[(i + 2) % 3])
    }

    fn is_seg(&self, a: u32, b: u32) -> bool {
        self.segs.contains_key(&key(a, b))
    }

    /// Stochastic visibility walk; returns a triangle containing `p` in its closure.
    fn locate(&mut self, p: Vec2, start: u32) -> Option<u32> {
        let mut t = start;
        for _ in 0..50_000_000usize {
            let off = self.next_rand();
            let mut moved = false;
            for k in 0..3 {
                let i = (k + off) % 3;
                let (a, b) = self.edge(t, i);
                if self.orient(a, b, p) < 0.0 {
                    let nb = self.tris[t as usize].n[i];
                    if nb == NONE {
                        return None;
                    }
                    t = nb;
                    moved = true;
                    break;
                }
            }
            if !moved {
                return Some(t);
            }
        }
        None
    }

    /// Straight walk from the centroid of `t` to `p`, stopping at segments.
    fn walk_to(&self, t: u32, p: Vec2) -> Walk {
        let v = self.tris[t as usize].v.map(|i| self.pts[i as usize]);
        let q = (1.0 / 3.0) * (v[0] + v[1] + v[2]);
        let mut t = t;
        let mut prev = NONE;
        for _ in 0..10_000_000usize {
            let mut exit = None;
            for i in 0..3 {
                let (a, b) = self.edge(t, i);
                if self.tris[t as usize].n[i] == prev && prev != NONE {
                    continue;
                }
                if self.orient(a, b, p) < 0.0 {
                    let (pa, pb) = (self.pts[a as usize], self.pts[b as usize]);
                    let sa = orient2d(c(q), c(p), c(pa));
                    let sb = orient2d(c(q), c(p), c(pb));
                    if sa * sb <= 0.0 {
                        exit = Some(i);
                        break;
                    }
                    exit.get_or_insert(i);
                }
            }
            let Some(i) = exit else { return Walk::Found(t) };
            let (a, b) = self.edge(t, i);
            if self.is_seg(a, b) {
                return Walk::Blocked(key(a, b));
            }
            let nb = self.tris[t as usize].n[i];
            if nb == NONE {
                return Walk::Lost;
            }
            prev = t;
            t = nb;
        }
        Walk::Lost
    }

    fn cavity(&mut self, p: Vec2, t0: u32, split: Option<Key>) -> Cavity {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.stamp = 1;
        }
        let stamp = self.stamp;
        let mut tris = vec![t0];
        self.mark[t0 as usize] = stamp;
        let mut i = 0;
        while i < tris.len() {
            let t = tris[i];
            for e in 0..3 {
                let nb = self.tris[t as usize].n[e];
                if nb == NONE || self.mark[nb as usize] == stamp {
                    continue;
                }
                let (a, b) = self.edge(t, e);
                let k = key(a, b);
                if self.segs.contains_key(&k) && Some(k) != split {
                    continue;
                }
                if self.in_circle(nb, p) {
                    self.mark[nb as usize] = stamp;
                    tris.push(nb);
                }
            }
            i += 1;
        }
        let mut edges = Vec::new();
        for &t in &tris {
            for e in 0..3 {
                let nb = self.tris[t as usize].n[e];
                if nb != NONE && self.mark[nb as usize] == stamp {
                    continue;
                }
                let (a, b) = self.edge(t, e);
                edges.push((a, b, nb, self.tris[t as usize].inside));
            }
        }
        Cavity { tris, edges }
    }

    fn alloc(&mut self, reuse: &mut Vec<u32>) -> u32 {
        if let Some(t) = reuse.pop() {
            return t;
        }
        if let Some(t) = self.free.pop() {
            return t;
        }
        self.tris.push(Tri { v: [0; 3], n: [NONE; 3], alive: false, inside: false });
        self.mark.push(0);
        (self.tris.len() - 1) as u32
    }

    /// Retriangulates the cavity as a star around the new vertex `p`.
    /// Returns the new triangles, or `None` if the star would be inverted.
    fn commit(&mut self, p: Vec2, cav: Cavity, split: Option<Key>) -> Option<(u32, Vec<u32>)> {
        if cav.edges.iter().any(|&(a, b, _, _)| self.orient(a, b, p) <= 0.0) {
            return None;
        }
        let pi = self.pts.len() as u32;
        self.pts.push(p);
        for &t in &cav.tris {
            self.tris[t as usize].alive = false;
        }
        let mut reuse = cav.tris.clone();
        reuse.reverse();
        let mut new = Vec::with_capacity(cav.edges.len());
        for &(a, b, outer, inside) in &cav.edges {
            let t = self.alloc(&mut reuse);
            self.tris[t as usize] = Tri { v: [a, b, pi], n: [NONE, NONE, outer], alive: true, inside };
            if outer != NONE {
                let o = &mut self.tris[outer as usize];
                for j in 0..3 {
                    if o.v[(j + 1) % 3] == b && o.v[(j + 2) % 3] == a {
                        o.n[j] = t;
                    }
                }
            }
            new.push(t);
        }
        self.free.extend(reuse);
        let by_start: HashMap<u32, u32> = new.iter().map(|&t| (self.tris[t as usize].v[0], t)).collect();
        let by_end: HashMap<u32, u32> = new.iter().map(|&t| (self.tris[t as usize].v[1], t)).collect();
        for &t in &new {
            let [a, b, _] = self.tris[t as usize].v;
            self.tris[t as usize].n[0] = by_start.get(&b).copied().unwrap_or(NONE);
            self.tris[t as usize].n[1] = by_end.get(&a).copied().unwrap_or(NONE);
        }
        if let Some(k) = split {
            let tag = self.segs.remove(&k).expect("split segment exists");
            self.segs.insert(key(k.0, pi), tag);
            self.segs.insert(key(pi, k.1), tag);
        }
        Some((pi, new))
    }

    fn insert_free(&mut self, p: Vec2, hint: u32) -> Option<(u32, Vec<u32>)> {
        let t = self.locate(p, hint)?;
        let cav = self.cavity(p, t, None);
        self.commit(p, cav, None)
    }

    /// Triangle having `(a, b)` as an edge in either orientation.
    fn find_edge(&self, a: u32, b: u32, hint: &[u32]) -> Option<u32> {
        let has = |t: u32| {
            let tr = &self.tris[t as usize];
            tr.alive && tr.v.contains(&a) && tr.v.contains(&b)
        };
        if let Some(&t) = hint.iter().find(|&&t| has(t)) {
            return Some(t);
        }
        (0..self.tris.len() as u32).find(|&t| has(t))
    }

    fn split_segment(&mut self, k: Key, hint: &[u32]) -> Option<(u32, Vec<u32>)> {
        let (a, b) = k;
        let (pa, pb) = (self.pts[a as usize], self.pts[b as usize]);
        if pa.dist(pb) < 2.0 * self.min_seg() || self.frozen.contains(&k) {
            return None;
        }
        let t = self.find_edge(a, b, hint)?;
        let m = 0.5 * (pa + pb);
        let cav = self.cavity(m, t, Some(k));
        let r = self.commit(m, cav, Some(k));
        if r.is_none() {
            self.frozen.insert(k);
        }
        r
    }

    fn min_seg(&self) -> f64 {
        self.pts[1].dist(self.pts[0]) * 1e-9
    }

    /// Segment `(a, b)` has a vertex of an adjacent interior triangle inside its diametral circle.
    fn encroached_by_apex(&self, t: u32, i: usize) -> Option<Key> {
        let tr = &self.tris[t as usize];
        if !tr.inside {
            return None;
        }
        let (a, b) = self.edge(t, i);
        if !self.is_seg(a, b) {
            return None;
        }
        let apex = self.pts[tr.v[i] as usize];
        let (pa, pb) = (self.pts[a as usize], self.pts[b as usize]);
        ((pa - apex).dot(pb - apex) < 0.0).then(|| key(a, b))
    }

    fn geometry(&self, t: u32) -> (f64, f64, f64, Vec2) {
        let v = self.tris[t as usize].v.map(|i| self.pts[i as usize]);
        let l = [v[1].dist(v[2]), v[2].dist(v[0]), v[0].dist(v[1])];
        let area = 0.5 * (v[1] - v[0]).cross(v[2] - v[0]);
        let r = l[0] * l[1] * l[2] / (4.0 * area);
        let lmin = l[0].min(l[1]).min(l[2]);
        let lmax = l[0].max(l[1]).max(l[2]);
        (r / lmin, lmax, area, (1.0 / 3.0) * (v[0] + v[1] + v[2]))
    }

    fn circumcenter(&self, t: u32) -> Vec2 {
        let v = self.tris[t as usize].v.map(|i| self.pts[i as usize]);
        let (b, cc) = (v[1] - v[0], v[2] - v[0]);
        let d = 2.0 * b.cross(cc);
        let ux = (cc.y * b.norm2() - b.y * cc.norm2()) / d;
        let uy = (b.x * cc.norm2() - cc.x * b.norm2()) / d;
        v[0] + Vec2::new(ux, uy)
    }

    fn alive_count(&self) -> usize {
        self.tris.len() - self.free.len()
    }
}

/// Closed polylines to be meshed; the domain is the region enclosed by an
/// odd number of loops.
pub struct Pslg {
    pub loops: Vec<(Vec<Vec2>, BoundaryTag)>,
}

/// Meshes the region bounded by the loops.
pub fn triangulate(pslg: &Pslg, size: &dyn Fn(Vec2) -> f64, params: RefineParams) -> Result<Mesh> {
    let extent = pslg
        .loops
        .iter()
        .flat_map(|(l, _)| l.iter())
        .map(|p| p.x.abs().max(p.y.abs()))
        .fold(0.0, f64::max);
    if !(extent > 0.0) {
        return Err(Error::Mesh("empty boundary".into()));
    }
    let mut cdt = Cdt::new(extent, size);

    let mut hint = 0u32;
    let mut loop_ids: Vec<(Vec<u32>, BoundaryTag)> = Vec::new();
    for (pts, tag) in &pslg.loops {
        let mut ids = Vec::with_capacity(pts.len());
        for &p in pts {
            let (id, new) = cdt
                .insert_free(p, hint)
                .ok_or_else(|| Error::Mesh(format!("could not insert boundary vertex {p}")))?;
            hint = new[0];
            ids.push(id);
        }
        loop_ids.push((ids, *tag));
    }
    for (ids, tag) in &loop_ids {
        for i in 0..ids.len() {
            cdt.segs.insert(key(ids[i], ids[(i + 1) % ids.len()]), *tag);
        }
    }

    recover_segments(&mut cdt)?;
    flood_inside(&mut cdt);
    refine(&mut cdt, params)?;
    extract(&cdt)
}

/// Splits segments that are not edges of the triangulation until all are.
fn recover_segments(cdt: &mut Cdt) -> Result<()> {
    let mut present: std::collections::HashSet<Key> = std::collections::HashSet::new();
    for t in 0..cdt.tris.len() as u32 {
        if cdt.tris[t as usize].alive {
            for i in 0..3 {
                let (a, b) = cdt.edge(t, i);
                present.insert(key(a, b));
            }
        }
    }
    let mut missing: VecDeque<Key> = cdt.segs.keys().filter(|k| !present.contains(k)).copied().collect();
    let mut guard = 0usize;
    while let Some(k) = missing.pop_front() {
        guard += 1;
        if guard > 10_000_000 {
            return Err(Error::Mesh("segment recovery did not terminate".into()));
        }
        if !cdt.segs.contains_key(&k) {
            continue;
        }
        if cdt.find_edge(k.0, k.1, &[]).is_some() {
            continue;
        }
        let tag = cdt.segs.remove(&k).expect("present");
        let (pa, pb) = (cdt.pts[k.0 as usize], cdt.pts[k.1 as usize]);
        let m = 0.5 * (pa + pb);
        let (mi, _) = cdt
            .insert_free(m, 0)
            .ok_or_else(|| Error::Mesh(format!("segment recovery failed near {m}")))?;
        for h in [key(k.0, mi), key(mi, k.1)] {
            cdt.segs.insert(h, tag);
            missing.push_back(h);
        }
    }
    Ok(())
}

/// Marks triangles inside the domain by parity of segment crossings from the hull.
fn flood_inside(cdt: &mut Cdt) {
    let n = cdt.tris.len();
    let mut seen = vec![false; n];
    let start = (0..n as u32).find(|&t| cdt.tris[t as usize].alive && cdt.tris[t as usize].v.contains(&0)).unwrap();
    let mut queue = VecDeque::from([(start, false)]);
    seen[start as usize] = true;
    while let Some((t, inside)) = queue.pop_front() {
        cdt.tris[t as usize].inside = inside;
        for i in 0..3 {
            let nb = cdt.tris[t as usize].n[i];
            if nb == NONE || seen[nb as usize] {
                continue;
            }
            seen[nb as usize] = true;
            let (a, b) = cdt.edge(t, i);
            queue.push_back((nb, inside ^ cdt.is_seg(a, b)));
        }
    }
}

fn refine(cdt: &mut Cdt, params: RefineParams) -> Result<()> {
    let mut seg_queue: VecDeque<Key> = VecDeque::new();
    let mut tri_queue: VecDeque<(u32, [u32; 3])> = VecDeque::new();
    for t in 0..cdt.tris.len() as u32 {
        let tr = cdt.tris[t as usize];
        if tr.alive && tr.inside {
            tri_queue.push_back((t, tr.v));
            for i in 0..3 {
                if let Some(k) = cdt.encroached_by_apex(t, i) {
                    seg_queue.push_back(k);
                }
            }
        }
    }
    let mut hopeless: std::collections::HashSet<[u32; 3]> = Default::default();

    let after_insert = |cdt: &Cdt, new: &[u32], segq: &mut VecDeque<Key>, triq: &mut VecDeque<(u32, [u32; 3])>| {
        for &t in new {
            let tr = cdt.tris[t as usize];
            if !tr.inside {
                continue;
            }
            triq.push_back((t, tr.v));
            for i in 0..3 {
                if let Some(k) = cdt.encroached_by_apex(t, i) {
                    segq.push_back(k);
                }
            }
        }
    };

    loop {
        if cdt.alive_count() > params.max_triangles {
            return Err(Error::Mesh(format!("more than {} triangles", params.max_triangles)));
        }
        if let Some(k) = seg_queue.pop_front() {
            if !cdt.segs.contains_key(&k) {
                continue;
            }
            let Some(t) = cdt.find_edge(k.0, k.1, &[]) else { continue };
            let encroached = (0..3).any(|i| cdt.encroached_by_apex(t, i) == Some(k))
                || cdt.tris[t as usize].n.iter().any(|&nb| {
                    nb != NONE && (0..3).any(|i| cdt.encroached_by_apex(nb, i) == Some(k))
                });
            if !encroached || (cdt.pts[k.0 as usize].dist(cdt.pts[k.1 as usize]) < 2.0 * params.min_segment) {
                continue;
            }
            if let Some((_, new)) = cdt.split_segment(k, &[t]) {
                after_insert(cdt, &new, &mut seg_queue, &mut tri_queue);
            }
            continue;
        }
        let Some((t, verts)) = tri_queue.pop_front() else { break };
        let tr = cdt.tris[t as usize];
        if !tr.alive || tr.v != verts || !tr.inside || hopeless.contains(&verts) {
            continue;
        }
        let (ratio, lmax, area, centroid) = cdt.geometry(t);
        let h = (cdt.size)(centroid);
        let bad_shape = ratio > params.radius_edge;
        let too_big = lmax > h;
        if !(bad_shape || too_big) || area <= 0.0 {
            continue;
        }
        let cc = cdt.circumcenter(t);
        match cdt.walk_to(t, cc) {
            Walk::Blocked(k) => {
                if let Some((_, new)) = cdt.split_segment(k, &[t]) {
                    after_insert(cdt, &new, &mut seg_queue, &mut tri_queue);
                    tri_queue.push_back((t, verts));
                } else {
                    hopeless.insert(verts);
                }
            }
            Walk::Lost => {
                hopeless.insert(verts);
            }
            Walk::Found(tc) => {
                let cav = cdt.cavity(cc, tc, None);
                let enc: Vec<Key> = cav
                    .edges
                    .iter()
                    .filter(|&&(a, b, _, _)| {
                        cdt.is_seg(a, b) && {
                            let (pa, pb) = (cdt.pts[a as usize], cdt.pts[b as usize]);
                            (pa - cc).dot(pb - cc) < 0.0
                        }
                    })
                    .map(|&(a, b, _, _)| key(a, b))
                    .collect();
                if enc.is_empty() {
                    match cdt.commit(cc, cav, None) {
                        Some((_, new)) => after_insert(cdt, &new, &mut seg_queue, &mut tri_queue),
                        None => {
                            hopeless.insert(verts);
                        }
                    }
                } else {
                    let mut any = false;
                    for k in enc {
                        if cdt.segs.contains_key(&k) {
                            if let Some((_, new)) = cdt.split_segment(k, &cav.tris) {
                                after_insert(cdt, &new, &mut seg_queue, &mut tri_queue);
                                any = true;
                            }
                        }
                    }
                    if any {
                        tri_queue.push_back((t, verts));
                    } else {
                        hopeless.insert(verts);
                    }
                }
            }
        }
    }
    if !hopeless.is_empty() {
        log::debug!("{} triangles could not be refined further", hopeless.len());
    }
    Ok(())
}

fn extract(cdt: &Cdt) -> Result<Mesh> {
    let mut map = vec![usize::MAX; cdt.pts.len()];
    let mut nodes = Vec::new();
    let mut triangles = Vec::new();
    for tr in cdt.tris.iter().filter(|t| t.alive && t.inside) {
        let mut tri = [0usize; 3];
        for (j, &v) in tr.v.iter().enumerate() {
            if v < 3 {
                return Err(Error::Mesh("domain touches the bounding triangle".into()));
            }
            if map[v as usize] == usize::MAX {
                map[v as usize] = nodes.len();
                nodes.push(cdt.pts[v as usize]);
            }
            tri[j] = map[v as usize];
        }
        triangles.push(tri);
    }
    let mut boundary: Vec<BoundaryEdge> = cdt
        .segs
        .iter()
        .filter(|(k, _)| map[k.0 as usize] != usize::MAX && map[k.1 as usize] != usize::MAX)
        .map(|(k, &tag)| BoundaryEdge { a: map[k.0 as usize], b: map[k.1 as usize], tag })
        .collect();
    boundary.sort_by_key(|e| (e.a, e.b));
    Ok(Mesh { nodes, triangles, boundary, tags: Vec::new() })
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams { radius_edge: 1.45, max_triangles: 4_000_000, min_segment: 0.0 }
    }
}

/// Meshes the computational domain of `scene` (inside the truncation circle,
/// outside all obstacles) with edge lengths bounded by `size`, and tags
/// every triangle with the cover regions containing its barycenter.
pub fn generate_mesh(scene: &Scene, size: &dyn Fn(Vec2) -> f64) -> Result<Mesh> {
    let diam = scene.diameter();
    let floor = 1e-5 * diam;
    let chord = |p: Vec2| {
        let h = size(p);
        if !(h >= floor) {
            return f64::NAN;
        }
        0.7 * h
    };
    let n_out = 256;
    let h_out = (0..n_out)
        .map(|i| chord(scene.r_tr * Vec2::from_angle(2.0 * PI * i as f64 / n_out as f64)))
        .fold(f64::INFINITY, |a: f64, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.min(b) });
    if h_out.is_nan() {
        return Err(Error::Mesh(format!("size field below {floor:e} or undefined")));
    }
    let n = ((2.0 * PI * scene.r_tr / h_out).ceil() as usize).max(16);
    let outer: Vec<Vec2> = (0..n).map(|i| scene.r_tr * Vec2::from_angle(2.0 * PI * i as f64 / n as f64)).collect();
    let mut loops = vec![(outer, BoundaryTag::Truncation)];
    for (i, ob) in scene.obstacles.iter().enumerate() {
        let pts = ob.curve.discretize(&chord);
        if pts.iter().any(|p| p.x.is_nan()) || pts.len() < 3 {
            return Err(Error::Mesh(format!("cannot discretize obstacle {i}")));
        }
        loops.push((pts, BoundaryTag::Obstacle(i)));
    }
    let params = RefineParams { min_segment: 1e-7 * diam, ..RefineParams::default() };
    let sz = |p: Vec2| size(p).max(floor);
    let mut mesh = triangulate(&Pslg { loops }, &sz, params)?;
    mesh.tag_regions(&scene.cover);
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(n: usize, r: f64) -> Vec<Vec2> {
        (0..n).map(|i| r * Vec2::from_angle(2.0 * std::f64::consts::PI * i as f64 / n as f64)).collect()
    }

    fn params() -> RefineParams {
        RefineParams { radius_edge: 1.45, max_triangles: 5_000_000, min_segment: 1e-9 }
    }

    #[test]
    fn square_with_hole() {
        let sq = vec![Vec2::new(-1.0, -1.0), Vec2::new(1.0, -1.0), Vec2::new(1.0, 1.0), Vec2::new(-1.0, 1.0)];
        let hole = circle(24, 0.3);
        let pslg = Pslg { loops: vec![(sq, BoundaryTag::Truncation), (hole, BoundaryTag::Obstacle(0))] };
        let m = triangulate(&pslg, &|_| 0.1, params()).unwrap();
        m.validate().unwrap();
        let q = m.quality();
        assert!(q.min_angle_deg >= 20.0, "{q:?}");
        assert!(q.h_max <= 0.1 + 1e-12);
        let hole_area = 0.5 * 24.0 * 0.09 * (2.0 * std::f64::consts::PI / 24.0).sin();
        assert!((m.area() - (4.0 - hole_area)).abs() < 1e-10);
    }

    #[test]
    fn graded_disk() {
        let pslg = Pslg { loops: vec![(circle(64, 1.0), BoundaryTag::Truncation)] };
        let m = triangulate(&pslg, &|p: Vec2| 0.02 + 0.3 * p.norm(), params()).unwrap();
        m.validate().unwrap();
        assert!(m.quality().min_angle_deg >= 20.0);
        for t in 0..m.triangles.len() {
            let b = m.barycenter(t);
            assert!(m.diameter(t) <= 1.5 * (0.02 + 0.3 * b.norm()));
        }
    }
}

#[cfg(test)]
mod scene_tests {
    use super::*;
    use crate::geometry::build_two_wall_scene;

    #[test]
    fn two_wall_scene_meshes() {
        let scene = build_two_wall_scene(false);
        let t = std::time::Instant::now();
        let m = generate_mesh(&scene, &|p: Vec2| 0.03 + 0.05 * p.norm()).unwrap();
        eprintln!("{:?} in {:?}", m.quality(), t.elapsed());
        m.validate().unwrap();
        assert!(m.quality().min_angle_deg > 19.0);
        let hole: f64 = 2.0 * 0.99 * 1.838;
        let expect = PI * 2.7f64.powi(2) - hole;
        assert!((m.area() - expect).abs() < 0.02, "{} vs {}", m.area(), expect);
        assert!(m.tags.iter().all(|t| !t.is_empty()));
    }
}
