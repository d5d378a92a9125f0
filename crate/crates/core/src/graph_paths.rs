//! Paths, loops and Neumann-series bounds on weighted digraphs.
//!
//! A path is a chain of edges `(i, j)`; the empty path is allowed. Splice
//! indices are 1-based and half-open, so `splice(p, l, m)` keeps edges
//! `l..m-1` and `splice(p, l, l)` is empty.
//!
//! Simple loops are counted as paths: the rotations `(1,2)(2,1)` and
//! `(2,1)(1,2)` are two different simple loops. Cycle libraries usually count
//! them once; the loop sum `c` here counts every base point.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Exhaustive enumeration is refused above this node count.
pub const N_ENUM: usize = 12;

/// Absolute tolerance of the componentwise bound checks.
pub const TOL_ABS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    n: usize,
    w: Vec<f64>,
}

impl WeightedDigraph {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut w = Vec::with_capacity(n * n);
        for r in &rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch(format!("row of length {} in {n}x{n} matrix", r.len())));
            }
            for &x in r {
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(invalid(format!("weights must be finite and non-negative, got {x}")));
                }
                w.push(x);
            }
        }
        Ok(WeightedDigraph { n, w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.w.chunks(self.n.max(1)).map(|r| r.to_vec()).take(self.n).collect()
    }

    pub fn scaled(&self, s: f64) -> WeightedDigraph {
        WeightedDigraph { n: self.n, w: self.w.iter().map(|x| x * s).collect() }
    }

    /// Product of edge weights (1 for the empty path).
    pub fn path_weight(&self, p: &Path) -> f64 {
        p.edges.iter().map(|&(i, j)| self.weight(i, j)).product()
    }

    fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.weight(i, j) > 0.0)
    }

    fn check_size(&self) -> Result<()> {
        if self.n > N_ENUM {
            return Err(Error::GraphTooLarge { n: self.n, limit: N_ENUM });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Path {
    pub edges: Vec<(usize, usize)>,
}

impl Path {
    pub fn empty() -> Self {
        Path::default()
    }

    pub fn from_edges(edges: Vec<(usize, usize)>) -> Result<Self> {
        if edges.windows(2).any(|w| w[0].1 != w[1].0) {
            return Err(invalid("consecutive edges do not chain"));
        }
        Ok(Path { edges })
    }

    /// Path visiting `nodes` in order (`nodes.len() - 1` edges).
    pub fn from_nodes(nodes: &[usize]) -> Self {
        Path { edges: nodes.windows(2).map(|w| (w[0], w[1])).collect() }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Visited nodes `p(1), ..., p(|p|+1)`; empty for the empty path.
    pub fn nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.edges.iter().map(|e| e.0).collect();
        if let Some(last) = self.edges.last() {
            v.push(last.1);
        }
        v
    }

    /// No node is visited twice.
    pub fn is_non_intersecting(&self) -> bool {
        let nodes = self.nodes();
        let mut seen = [false; 64];
        let mut seen_big = std::collections::HashSet::new();
        nodes.iter().all(|&x| {
            if x < 64 {
                !std::mem::replace(&mut seen[x], true)
            } else {
                seen_big.insert(x)
            }
        })
    }

    /// Loop that returns to its start with no other repeated node.
    pub fn is_simple_loop(&self) -> bool {
        let nodes = self.nodes();
        !self.is_empty()
            && nodes[0] == nodes[nodes.len() - 1]
            && Path::from_nodes(&nodes[..nodes.len() - 1]).is_non_intersecting()
    }

    pub fn concat(&self, other: &Path) -> Path {
        let mut edges = self.edges.clone();
        edges.extend_from_slice(&other.edges);
        Path { edges }
    }
}

pub fn splice(p: &Path, l: usize, m: usize) -> Result<Path> {
    if !(1 <= l && l <= m && m <= p.len() + 1) {
        return Err(Error::IndexOutOfRange(format!("splice [{l}, {m}) of a path of length {}", p.len())));
    }
    Ok(Path { edges: p.edges[l - 1..m - 1].to_vec() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstLoop {
    pub lp: Path,
    pub rest: Path,
    /// 1-based index of the earlier occurrence of the first repeated node.
    pub l0: Option<usize>,
    /// 1-based index of the first crossing.
    pub l_cross: Option<usize>,
}

/// Splits off the first loop: with `l_x` the first index whose node already
/// appeared (at `l0`), the loop is `p[l0, l_x)` and the remainder is
/// `p[1, l0) . p[l_x, |p|+1)`.
pub fn first_loop(p: &Path) -> FirstLoop {
    let nodes = p.nodes();
    for lx in 1..nodes.len() {
        if let Some(l0) = nodes[..lx].iter().position(|&x| x == nodes[lx]) {
            let (l0, lx) = (l0 + 1, lx + 1);
            let lp = Path { edges: p.edges[l0 - 1..lx - 1].to_vec() };
            let mut rest = p.edges[..l0 - 1].to_vec();
            rest.extend_from_slice(&p.edges[lx - 1..]);
            return FirstLoop { lp, rest: Path { edges: rest }, l0: Some(l0), l_cross: Some(lx) };
        }
    }
    FirstLoop { lp: Path::empty(), rest: p.clone(), l0: None, l_cross: None }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LoopDecomposition {
    pub spine: Path,
    pub loops: Vec<Path>,
}

/// Repeated first-loop extraction until the remainder is non-intersecting.
pub fn loop_decompose(p: &Path) -> LoopDecomposition {
    let mut spine = p.clone();
    let mut loops = Vec::new();
    loop {
        let fl = first_loop(&spine);
        if fl.l0.is_none() {
            return LoopDecomposition { spine, loops };
        }
        loops.push(fl.lp);
        spine = fl.rest;
    }
}

/// Every simple loop (each rotation separately) and their total weight `c`.
pub fn enumerate_simple_loops(g: &WeightedDigraph) -> Result<(Vec<Path>, f64)> {
    g.check_size()?;
    let mut loops = Vec::new();
    let mut c = 0.0;
    for s in 0..g.n {
        let mut visited = vec![false; g.n];
        visited[s] = true;
        let mut stack = vec![s];
        dfs_loops(g, s, &mut visited, &mut stack, 1.0, &mut |nodes, w| {
            loops.push(Path::from_nodes(nodes));
            c += w;
        });
    }
    Ok((loops, c))
}

/// Loop-weight sum only, without materializing the paths.
pub fn simple_loop_sum(g: &WeightedDigraph) -> Result<f64> {
    g.check_size()?;
    let mut c = 0.0;
    for s in 0..g.n {
        let mut visited = vec![false; g.n];
        visited[s] = true;
        let mut stack = vec![s];
        dfs_loops(g, s, &mut visited, &mut stack, 1.0, &mut |_, w| c += w);
    }
    Ok(c)
}

fn dfs_loops(
    g: &WeightedDigraph,
    start: usize,
    visited: &mut [bool],
    stack: &mut Vec<usize>,
    w: f64,
    emit: &mut dyn FnMut(&[usize], f64),
) {
    let cur = *stack.last().expect("non-empty stack");
    for j in g.successors(cur).collect::<Vec<_>>() {
        let wj = w * g.weight(cur, j);
        if j == start {
            stack.push(j);
            emit(stack, wj);
            stack.pop();
        } else if !visited[j] {
            visited[j] = true;
            stack.push(j);
            dfs_loops(g, start, visited, stack, wj, emit);
            stack.pop();
            visited[j] = false;
        }
    }
}

/// Row-major `n x n` matrix.
pub type Matrix = Vec<Vec<f64>>;

/// `T*_ij`: total weight of the non-intersecting paths from `i` to `j`;
/// the diagonal is 1 (only the empty path).
pub fn simple_path_matrix(g: &WeightedDigraph) -> Result<Matrix> {
    g.check_size()?;
    let n = g.n;
    let mut t = vec![vec![0.0; n]; n];
    for (i, row) in t.iter_mut().enumerate() {
        let mut visited = vec![false; n];
        visited[i] = true;
        dfs_paths(g, i, &mut visited, 1.0, row);
        row[i] = 1.0;
    }
    Ok(t)
}

fn dfs_paths(g: &WeightedDigraph, cur: usize, visited: &mut [bool], w: f64, row: &mut [f64]) {
    for j in g.successors(cur).collect::<Vec<_>>() {
        if !visited[j] {
            let wj = w * g.weight(cur, j);
            row[j] += wj;
            visited[j] = true;
            dfs_paths(g, j, visited, wj, row);
            visited[j] = false;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertStatus {
    /// `c < 1` and `T* <= S <= T*/(1-c)` holds componentwise.
    Certified,
    /// `c < 1` but a componentwise inequality failed.
    Violated,
    /// `c >= 1`: the loop condition does not hold, nothing is asserted.
    ConditionFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertResult {
    pub n: usize,
    pub c: f64,
    pub status: CertStatus,
    pub pass: bool,
    /// Largest amount by which either inequality is exceeded (0 if none).
    pub max_violation: f64,
    pub terms_used: usize,
    pub t_star: Matrix,
    pub neumann_sum: Matrix,
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..n {
                    c[i][j] += aik * b[k][j];
                }
            }
        }
    }
    c
}

/// Partial Neumann sum `sum_{m=0}^{n_terms} W^m`, stopping early once the
/// largest entry of the increment drops below 1e-14.
pub fn neumann_partial_sum(g: &WeightedDigraph, n_terms: usize) -> (Matrix, usize) {
    let n = g.n;
    let w = g.rows();
    let mut power: Matrix = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut sum = power.clone();
    let mut used = 0;
    for m in 1..=n_terms {
        power = matmul(&power, &w);
        let mut inc = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += power[i][j];
                inc = inc.max(power[i][j]);
            }
        }
        used = m;
        if inc < 1e-14 {
            break;
        }
    }
    (sum, used)
}

/// Checks `T* <= S <= T*/(1-c) + tol` with `S` the partial Neumann sum.
pub fn certify_bound(g: &WeightedDigraph, n_terms: usize) -> Result<CertResult> {
    let c = simple_loop_sum(g)?;
    let t_star = simple_path_matrix(g)?;
    let (s, used) = neumann_partial_sum(g, n_terms);
    if c >= 1.0 {
        return Ok(CertResult {
            n: g.n,
            c,
            status: CertStatus::ConditionFailed,
            pass: false,
            max_violation: 0.0,
            terms_used: used,
            t_star,
            neumann_sum: s,
        });
    }
    let mut viol = 0.0f64;
    for i in 0..g.n {
        for j in 0..g.n {
            let lower = t_star[i][j] - s[i][j];
            let upper = s[i][j] - t_star[i][j] / (1.0 - c);
            viol = viol.max(lower).max(upper);
        }
    }
    let pass = viol <= TOL_ABS;
    Ok(CertResult {
        n: g.n,
        c,
        status: if pass { CertStatus::Certified } else { CertStatus::Violated },
        pass,
        max_violation: viol.max(0.0),
        terms_used: used,
        t_star,
        neumann_sum: s,
    })
}

/// Scales `g` so that its simple-loop sum equals `target` (bisection on the
/// scale factor; the loop sum is increasing in it). Returns `None` for a
/// graph without loops.
pub fn scale_to_loop_sum(g: &WeightedDigraph, target: f64) -> Result<Option<WeightedDigraph>> {
    if simple_loop_sum(g)? == 0.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while simple_loop_sum(&g.scaled(hi))? < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if simple_loop_sum(&g.scaled(mid))? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(Some(g.scaled(0.5 * (lo + hi))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(nodes: &[usize]) -> Path {
        Path::from_nodes(nodes)
    }

    #[test]
    fn splice_examples() {
        let q = p(&[1, 2, 3, 4]);
        assert_eq!(splice(&q, 2, 4).unwrap(), p(&[2, 3, 4]));
        assert!(splice(&q, 2, 2).unwrap().is_empty());
        assert_eq!(splice(&q, 1, 4).unwrap(), q);
        assert!(splice(&q, 0, 2).is_err());
        assert!(splice(&q, 3, 2).is_err());
        assert!(splice(&q, 1, 5).is_err());
    }

    #[test]
    fn first_loop_examples() {
        let fl = first_loop(&p(&[1, 2, 3, 2, 4]));
        assert_eq!(fl.l_cross, Some(4));
        assert_eq!(fl.l0, Some(2));
        assert_eq!(fl.lp, p(&[2, 3, 2]));
        assert_eq!(fl.rest, Path::from_edges(vec![(1, 2), (2, 4)]).unwrap());

        let q = p(&[0, 1, 2]);
        let fl = first_loop(&q);
        assert_eq!((fl.lp, fl.rest, fl.l0), (Path::empty(), q, None));

        let fl = first_loop(&p(&[1, 2, 1]));
        assert_eq!(fl.lp, p(&[1, 2, 1]));
        assert!(fl.rest.is_empty());
    }

    #[test]
    fn decomposition_examples() {
        let d = loop_decompose(&p(&[1, 2, 3, 2, 4]));
        assert_eq!(d.spine, Path::from_edges(vec![(1, 2), (2, 4)]).unwrap());
        assert_eq!(d.loops, vec![p(&[2, 3, 2])]);
        let q = p(&[3, 1, 0]);
        assert_eq!(loop_decompose(&q), LoopDecomposition { spine: q, loops: vec![] });
        let d = loop_decompose(&p(&[1, 1]));
        assert!(d.spine.is_empty());
        assert_eq!(d.loops, vec![p(&[1, 1])]);
    }

    #[test]
    fn loops_examples() {
        let g = WeightedDigraph::new(vec![vec![0.5]]).unwrap();
        let (loops, c) = enumerate_simple_loops(&g).unwrap();
        assert_eq!(loops, vec![p(&[0, 0])]);
        assert_eq!(c, 0.5);

        let (b, cc) = (0.3, 0.7);
        let g = WeightedDigraph::new(vec![vec![0.0, b], vec![cc, 0.0]]).unwrap();
        let (loops, c) = enumerate_simple_loops(&g).unwrap();
        assert_eq!(loops, vec![p(&[0, 1, 0]), p(&[1, 0, 1])]);
        assert!((c - 2.0 * b * cc).abs() < 1e-15);

        let g = WeightedDigraph::new(vec![vec![0.0; 3]; 3]).unwrap();
        assert_eq!(enumerate_simple_loops(&g).unwrap().1, 0.0);

        let g = WeightedDigraph::new(vec![vec![1.0; 13]; 13]).unwrap();
        assert!(matches!(enumerate_simple_loops(&g), Err(Error::GraphTooLarge { .. })));
    }

    #[test]
    fn simple_path_examples() {
        let g = WeightedDigraph::new(vec![vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        assert_eq!(simple_path_matrix(&g).unwrap(), vec![vec![1.0, 0.2], vec![0.3, 1.0]]);
        let g = WeightedDigraph::new(vec![vec![0.0; 3]; 3]).unwrap();
        let t = simple_path_matrix(&g).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        // 0 -> 1 -> 2 and 0 -> 2
        let g = WeightedDigraph::new(vec![vec![0.0, 0.5, 0.25], vec![0.0, 0.0, 0.5], vec![0.0; 3]]).unwrap();
        assert_eq!(simple_path_matrix(&g).unwrap()[0][2], 0.5);
    }

    #[test]
    fn certify_examples() {
        let g = WeightedDigraph::new(vec![vec![0.5]]).unwrap();
        let r = certify_bound(&g, 200).unwrap();
        assert!(r.pass);
        assert!((r.neumann_sum[0][0] - 2.0).abs() < 1e-12);

        let g = WeightedDigraph::new(vec![vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let r = certify_bound(&g, 200).unwrap();
        assert_eq!(r.c, 0.5);
        assert!(r.pass);
        let inv = [[4.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 4.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.neumann_sum[i][j] - inv[i][j]).abs() < 1e-12);
            }
        }

        let g = WeightedDigraph::new(vec![vec![1.5]]).unwrap();
        let r = certify_bound(&g, 200).unwrap();
        assert_eq!(r.status, CertStatus::ConditionFailed);
        assert!(!r.pass);
    }

    #[test]
    fn rejects_negative_weights() {
        assert!(WeightedDigraph::new(vec![vec![-0.1]]).is_err());
        assert!(WeightedDigraph::new(vec![vec![0.1, 0.2]]).is_err());
    }

    #[test]
    fn scaling_hits_target() {
        let g = WeightedDigraph::new(vec![vec![0.3, 1.0, 0.0], vec![0.2, 0.0, 2.0], vec![1.0, 0.5, 0.1]]).unwrap();
        let s = scale_to_loop_sum(&g, 0.8).unwrap().unwrap();
        assert!((simple_loop_sum(&s).unwrap() - 0.8).abs() < 1e-12);
    }
}
