use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RegionCover, TagSet, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Boundary of obstacle number `i`.
    Obstacle(usize),
    /// The outer truncation circle.
    Truncation,
    /// Symmetry line of a half-domain (natural boundary condition).
    Symmetry,
}

impl BoundaryTag {
    pub fn is_dirichlet(self) -> bool {
        !matches!(self, BoundaryTag::Symmetry)
    }

    fn encode(self) -> String {
        match self {
            BoundaryTag::Obstacle(i) => format!("obstacle:{i}"),
            BoundaryTag::Truncation => "truncation".into(),
            BoundaryTag::Symmetry => "symmetry".into(),
        }
    }

    fn decode(s: &str) -> Result<Self> {
        match s {
            "truncation" => Ok(BoundaryTag::Truncation),
            "symmetry" => Ok(BoundaryTag::Symmetry),
            _ => s
                .strip_prefix("obstacle:")
                .and_then(|i| i.parse().ok())
                .map(BoundaryTag::Obstacle)
                .ok_or_else(|| Error::Mesh(format!("unknown boundary tag {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
}

/// Straight-sided triangle mesh with counter-clockwise elements.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub nodes: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    /// Cover regions containing each element's barycenter.
    pub tags: Vec<TagSet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshQuality {
    pub n_nodes: usize,
    pub n_triangles: usize,
    pub min_angle_deg: f64,
    pub min_area: f64,
    pub h_max: f64,
    pub h_min: f64,
}

impl Mesh {
    pub fn vertices(&self, t: usize) -> [Vec2; 3] {
        self.triangles[t].map(|i| self.nodes[i])
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        0.5 * (b - a).cross(c - a)
    }

    pub fn barycenter(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.vertices(t);
        (1.0 / 3.0) * (a + b + c)
    }

    /// Longest edge.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        a.dist(b).max(b.dist(c)).max(c.dist(a))
    }

    pub fn min_angle(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        let ang = |p: Vec2, q: Vec2, r: Vec2| {
            let (u, v) = (q - p, r - p);
            u.cross(v).abs().atan2(u.dot(v))
        };
        ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn quality(&self) -> MeshQuality {
        let n = self.triangles.len();
        let fold = |f: &dyn Fn(usize) -> f64, init: f64, op: fn(f64, f64) -> f64| (0..n).map(f).fold(init, op);
        MeshQuality {
            n_nodes: self.nodes.len(),
            n_triangles: n,
            min_angle_deg: fold(&|t| self.min_angle(t), f64::INFINITY, f64::min).to_degrees(),
            min_area: fold(&|t| self.signed_area(t), f64::INFINITY, f64::min),
            h_max: fold(&|t| self.diameter(t), 0.0, f64::max),
            h_min: fold(&|t| self.diameter(t), f64::INFINITY, f64::min),
        }
    }

    pub fn tag_regions(&mut self, cover: &RegionCover) {
        self.tags = (0..self.triangles.len()).map(|t| cover.classify(self.barycenter(t))).collect();
    }

    /// Edge -> adjacent triangles, keyed by sorted vertex pair.
    pub fn edge_map(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut m: HashMap<(usize, usize), Vec<usize>> = HashMap::with_capacity(self.triangles.len() * 2);
        for (t, tri) in self.triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                m.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        m
    }

    /// Checks orientation, conformity and that the tagged boundary equals the
    /// set of edges with a single adjacent triangle.
    pub fn validate(&self) -> Result<()> {
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= self.nodes.len()) {
                return Err(Error::Mesh(format!("triangle {t} has an out-of-range vertex")));
            }
            if self.signed_area(t) <= 0.0 {
                return Err(Error::Mesh(format!("triangle {t} is not counter-clockwise")));
            }
        }
        let edges = self.edge_map();
        let mut open: Vec<(usize, usize)> = Vec::new();
        for (e, ts) in &edges {
            match ts.len() {
                1 => open.push(*e),
                2 => {}
                n => return Err(Error::Mesh(format!("edge {e:?} shared by {n} triangles"))),
            }
        }
        let mut tagged: Vec<(usize, usize)> = self.boundary.iter().map(|e| (e.a.min(e.b), e.a.max(e.b))).collect();
        open.sort_unstable();
        tagged.sort_unstable();
        if open != tagged {
            return Err(Error::Mesh(format!("{} open edges but {} tagged boundary edges", open.len(), tagged.len())));
        }
        if !self.tags.is_empty() && self.tags.len() != self.triangles.len() {
            return Err(Error::Mesh("region tags do not match triangles".into()));
        }
        Ok(())
    }

    /// Uniform refinement: every triangle is split into four through its edge midpoints.
    pub fn red_refine(&self) -> Mesh {
        let mut nodes = self.nodes.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::with_capacity(self.triangles.len() * 2);
        let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<Vec2>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                nodes.push(0.5 * (nodes[a] + nodes[b]));
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut tags = Vec::with_capacity(4 * self.tags.len());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let ab = midpoint(a, b, &mut nodes);
            let bc = midpoint(b, c, &mut nodes);
            let ca = midpoint(c, a, &mut nodes);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
            if let Some(&tag) = self.tags.get(t) {
                tags.extend([tag; 4]);
            }
        }
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for e in &self.boundary {
            let m = midpoint(e.a, e.b, &mut nodes);
            boundary.push(BoundaryEdge { a: e.a, b: m, tag: e.tag });
            boundary.push(BoundaryEdge { a: m, b: e.b, tag: e.tag });
        }
        Mesh { nodes, triangles, boundary, tags }
    }

    /// Line-based text format:
    /// `nodes N`, N lines `x y`, `triangles M`, M lines `i j k region-bitmask`,
    /// `boundary B`, B lines `i j tag`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(64 * (self.nodes.len() + self.triangles.len()));
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:e} {:e}", p.x, p.y);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let mask = self.tags.get(t).map_or(0, |m| m.0);
            let _ = writeln!(s, "{} {} {} {}", tri[0], tri[1], tri[2], mask);
        }
        let _ = writeln!(s, "boundary {}", self.boundary.len());
        for e in &self.boundary {
            let _ = writeln!(s, "{} {} {}", e.a, e.b, e.tag.encode());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let bad = |msg: &str| Error::Mesh(msg.to_string());
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let num = |s: Option<&str>| -> Result<f64> { s.and_then(|x| x.parse().ok()).ok_or_else(|| bad("bad number")) };
        let idx = |s: Option<&str>| -> Result<usize> { s.and_then(|x| x.parse().ok()).ok_or_else(|| bad("bad index")) };
        let count = |l: Option<&str>, name: &str| -> Result<usize> {
            let l = l.ok_or_else(|| bad("unexpected end of file"))?;
            let mut it = l.split_whitespace();
            if it.next() != Some(name) {
                return Err(Error::Mesh(format!("expected '{name} <count>', got {l:?}")));
            }
            idx(it.next())
        };
        let n = count(lines.next(), "nodes")?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let mut it = lines.next().ok_or_else(|| bad("missing node line"))?.split_whitespace();
            nodes.push(Vec2::new(num(it.next())?, num(it.next())?));
        }
        let m = count(lines.next(), "triangles")?;
        let mut triangles = Vec::with_capacity(m);
        let mut tags = Vec::with_capacity(m);
        for _ in 0..m {
            let mut it = lines.next().ok_or_else(|| bad("missing triangle line"))?.split_whitespace();
            triangles.push([idx(it.next())?, idx(it.next())?, idx(it.next())?]);
            tags.push(TagSet(idx(it.next())? as u8));
        }
        let nb = count(lines.next(), "boundary")?;
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let mut it = lines.next().ok_or_else(|| bad("missing boundary line"))?.split_whitespace();
            let (a, b) = (idx(it.next())?, idx(it.next())?);
            let tag = BoundaryTag::decode(it.next().ok_or_else(|| bad("missing boundary tag"))?)?;
            boundary.push(BoundaryEdge { a, b, tag });
        }
        let mesh = Mesh { nodes, triangles, boundary, tags };
        mesh.validate()?;
        Ok(mesh)
    }
}
