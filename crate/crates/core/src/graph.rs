//! Bipartite observation graphs between location vertices `V_l` and
//! structure vertices `V_s`.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Edge `(i, j)` with `i` a location index and `j` a structure index.
pub type Edge = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct BipartiteGraph {
    n_l: usize,
    n_s: usize,
    edges: Vec<Edge>,
    adj_l: Vec<Vec<usize>>,
    adj_s: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n_l: usize,
    n_s: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<RawGraph> for BipartiteGraph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        BipartiteGraph::new(raw.n_l, raw.n_s, raw.edges.into_iter().map(|[i, j]| (i, j)).collect())
    }
}

impl From<BipartiteGraph> for RawGraph {
    fn from(g: BipartiteGraph) -> Self {
        RawGraph {
            n_l: g.n_l,
            n_s: g.n_s,
            edges: g.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

impl BipartiteGraph {
    /// Builds a graph, sorting the edge list into canonical lexicographic
    /// order. Out-of-range or repeated edges are rejected.
    pub fn new(n_l: usize, n_s: usize, mut edges: Vec<Edge>) -> Result<Self> {
        if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| i >= n_l || j >= n_s) {
            return Err(Error::InvalidGraph(format!(
                "edge ({i}, {j}) out of range for n_l={n_l}, n_s={n_s}"
            )));
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("duplicate edge {:?}", w[0])));
        }
        let mut adj_l = vec![Vec::new(); n_l];
        let mut adj_s = vec![Vec::new(); n_s];
        for &(i, j) in &edges {
            adj_l[i].push(j);
            adj_s[j].push(i);
        }
        Ok(Self { n_l, n_s, edges, adj_l, adj_s })
    }

    pub fn complete(n_l: usize, n_s: usize) -> Self {
        let edges = (0..n_l).flat_map(|i| (0..n_s).map(move |j| (i, j))).collect();
        Self::new(n_l, n_s, edges).expect("complete graph is valid")
    }

    pub fn n_l(&self) -> usize {
        self.n_l
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Structure neighbors of location `i`, ascending.
    pub fn neighbors_l(&self, i: usize) -> &[usize] {
        &self.adj_l[i]
    }

    /// Location neighbors of structure point `j`, ascending.
    pub fn neighbors_s(&self, j: usize) -> &[usize] {
        &self.adj_s[j]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n_l && self.adj_l[i].binary_search(&j).is_ok()
    }

    /// Position of `(i, j)` in the canonical edge list.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.edges.binary_search(&(i, j)).ok()
    }

    pub fn max_degree(&self) -> usize {
        let l = self.adj_l.iter().map(Vec::len).max().unwrap_or(0);
        let s = self.adj_s.iter().map(Vec::len).max().unwrap_or(0);
        l.max(s)
    }

    /// Connectivity over all `n_l + n_s` vertices by breadth-first search.
    /// Isolated vertices make the graph disconnected.
    pub fn is_connected(&self) -> bool {
        let total = self.n_l + self.n_s;
        if total == 0 {
            return true;
        }
        // vertex ids: locations 0..n_l, structure n_l..
        let mut seen = vec![false; total];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            let nbrs: Box<dyn Iterator<Item = usize>> = if u < self.n_l {
                Box::new(self.adj_l[u].iter().map(|&j| self.n_l + j))
            } else {
                Box::new(self.adj_s[u - self.n_l].iter().copied())
            };
            for w in nbrs {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == total
    }
}

/// Bipartite Erdős–Rényi graph: each of the `n_l * n_s` edges independently
/// with probability `p`, drawn in canonical order from one seeded stream.
pub fn sample_er(n_l: usize, n_s: usize, p: f64, seed: u64) -> Result<BipartiteGraph> {
    if n_l == 0 || n_s == 0 {
        return Err(Error::InvalidParameter("n_l and n_s must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = rng::stream(seed, tag::GRAPH, 0);
    let mut edges = Vec::new();
    for i in 0..n_l {
        for j in 0..n_s {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    BipartiteGraph::new(n_l, n_s, edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalityReport {
    pub connected: bool,
    pub degree_bounds_ok: bool,
    pub codegree_bounds_ok: bool,
    pub min_deg_l: usize,
    pub max_deg_l: usize,
    pub min_deg_s: usize,
    pub max_deg_s: usize,
    /// `None` when the side has fewer than two vertices.
    pub min_codeg_l: Option<usize>,
    pub max_codeg_l: Option<usize>,
    pub min_codeg_s: Option<usize>,
    pub max_codeg_s: Option<usize>,
    pub p: f64,
}

impl TypicalityReport {
    pub fn is_typical(&self) -> bool {
        self.connected && self.degree_bounds_ok && self.codegree_bounds_ok
    }
}

fn within(x: usize, lo: f64, hi: f64) -> bool {
    let x = x as f64;
    lo <= x && x <= hi
}

/// Min and max codegree over all unordered pairs on one side, where `adj`
/// lists each vertex's sorted neighbors.
fn codegree_range(adj: &[Vec<usize>], other_side: usize) -> Option<(usize, usize)> {
    if adj.len() < 2 {
        return None;
    }
    let mut rows = vec![vec![false; other_side]; adj.len()];
    for (u, nbrs) in adj.iter().enumerate() {
        for &w in nbrs {
            rows[u][w] = true;
        }
    }
    let mut range = (usize::MAX, 0);
    for (a, nbrs) in adj.iter().enumerate() {
        for row in &rows[a + 1..] {
            let c = nbrs.iter().filter(|&&w| row[w]).count();
            range = (range.0.min(c), range.1.max(c));
        }
    }
    Some(range)
}

/// Evaluates bipartite-`p`-typicality: connectivity, degrees within
/// `[n p / 2, 2 n p]` and same-side pair codegrees within
/// `[n p^2 / 2, 2 n p^2]`, where `n` is the size of the opposite side. All
/// bounds are inclusive.
pub fn check_typicality(g: &BipartiteGraph, p: f64) -> Result<TypicalityReport> {
    if p.is_nan() || p <= 0.0 {
        return Err(Error::InvalidParameter(format!("typicality requires p > 0, got {p}")));
    }
    let (nl, ns) = (g.n_l as f64, g.n_s as f64);
    let deg_l: Vec<usize> = g.adj_l.iter().map(Vec::len).collect();
    let deg_s: Vec<usize> = g.adj_s.iter().map(Vec::len).collect();
    let degree_bounds_ok = deg_l.iter().all(|&d| within(d, 0.5 * ns * p, 2.0 * ns * p))
        && deg_s.iter().all(|&d| within(d, 0.5 * nl * p, 2.0 * nl * p));

    let cod_l = codegree_range(&g.adj_l, g.n_s);
    let cod_s = codegree_range(&g.adj_s, g.n_l);
    let p2 = p * p;
    let side_ok = |r: Option<(usize, usize)>, n: f64| {
        r.is_none_or(|(lo, hi)| within(lo, 0.5 * n * p2, 2.0 * n * p2) && within(hi, 0.5 * n * p2, 2.0 * n * p2))
    };
    let codegree_bounds_ok = side_ok(cod_l, ns) && side_ok(cod_s, nl);

    Ok(TypicalityReport {
        connected: g.is_connected(),
        degree_bounds_ok,
        codegree_bounds_ok,
        min_deg_l: deg_l.iter().copied().min().unwrap_or(0),
        max_deg_l: deg_l.iter().copied().max().unwrap_or(0),
        min_deg_s: deg_s.iter().copied().min().unwrap_or(0),
        max_deg_s: deg_s.iter().copied().max().unwrap_or(0),
        min_codeg_l: cod_l.map(|r| r.0),
        max_codeg_l: cod_l.map(|r| r.1),
        min_codeg_s: cod_s.map(|r| r.0),
        max_codeg_s: cod_s.map(|r| r.1),
        p,
    })
}

/// Partitions the edges into at most `Δ` matchings by proper edge coloring.
///
/// Each edge `uv` takes a color `a` free at `u`; if `a` is taken at `v`, the
/// `a/b` alternating path from `v` (with `b` free at `v`) is flipped first.
/// In a bipartite graph that path never reaches `u`, so `Δ` colors suffice.
pub fn matching_decomposition(g: &BipartiteGraph) -> Vec<Vec<Edge>> {
    let delta = g.max_degree();
    if delta == 0 {
        return Vec::new();
    }
    let nv = g.n_l + g.n_s;
    // at[vertex][color] = opposite endpoint of the edge with that color
    let mut at: Vec<Vec<Option<usize>>> = vec![vec![None; delta]; nv];
    let free = |at: &Vec<Vec<Option<usize>>>, u: usize| at[u].iter().position(Option::is_none);

    for &(i, j) in &g.edges {
        let u = i;
        let v = g.n_l + j;
        let a = free(&at, u).expect("degree bound guarantees a free color");
        if at[v][a].is_some() {
            let b = free(&at, v).expect("degree bound guarantees a free color");
            // collect the path v -a- w1 -b- w2 -a- ...
            let mut path = Vec::new();
            let (mut x, mut c) = (v, a);
            while let Some(y) = at[x][c] {
                path.push((x, y, c));
                x = y;
                c = if c == a { b } else { a };
            }
            for &(x, y, c) in &path {
                at[x][c] = None;
                at[y][c] = None;
            }
            for &(x, y, c) in &path {
                let flipped = if c == a { b } else { a };
                at[x][flipped] = Some(y);
                at[y][flipped] = Some(x);
            }
        }
        at[u][a] = Some(v);
        at[v][a] = Some(u);
    }

    let mut classes = vec![Vec::new(); delta];
    for (i, slots) in at.iter().enumerate().take(g.n_l) {
        for (c, slot) in slots.iter().enumerate() {
            if let Some(v) = slot {
                classes[c].push((i, v - g.n_l));
            }
        }
    }
    classes.retain(|c| !c.is_empty());
    for c in &mut classes {
        c.sort_unstable();
    }
    classes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_valid_decomposition(g: &BipartiteGraph, classes: &[Vec<Edge>]) {
        assert!(classes.len() <= g.max_degree());
        let mut all: Vec<Edge> = classes.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, g.edges());
        for class in classes {
            let mut ls: Vec<usize> = class.iter().map(|e| e.0).collect();
            let mut ss: Vec<usize> = class.iter().map(|e| e.1).collect();
            ls.sort_unstable();
            ss.sort_unstable();
            ls.dedup();
            ss.dedup();
            assert_eq!(ls.len(), class.len());
            assert_eq!(ss.len(), class.len());
        }
    }

    #[test]
    fn er_extremes() {
        assert_eq!(sample_er(3, 2, 1.0, 99).unwrap().num_edges(), 6);
        assert_eq!(sample_er(3, 2, 0.0, 99).unwrap().num_edges(), 0);
    }

    #[test]
    fn er_mean_edge_count() {
        // Binomial(900, 1/2): mean 450, sd 15; the 200-seed mean has sd ~1.06.
        let total: usize = (1..=200).map(|s| sample_er(30, 30, 0.5, s).unwrap().num_edges()).sum();
        let mean = total as f64 / 200.0;
        assert!((430.0..=470.0).contains(&mean), "mean {mean}");
    }

    #[test]
    fn er_rejects_bad_inputs() {
        assert!(sample_er(0, 2, 0.5, 1).is_err());
        assert!(sample_er(2, 2, 1.5, 1).is_err());
    }

    #[test]
    fn er_is_deterministic_after_serialization() {
        let a = serde_json::to_string(&sample_er(12, 9, 0.4, 31).unwrap()).unwrap();
        let b = serde_json::to_string(&sample_er(12, 9, 0.4, 31).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn new_canonicalizes_and_validates() {
        let g = BipartiteGraph::new(2, 2, vec![(1, 0), (0, 1), (0, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 0), (0, 1), (1, 0)]);
        assert!(BipartiteGraph::new(2, 2, vec![(0, 0), (0, 0)]).is_err());
        assert!(BipartiteGraph::new(2, 2, vec![(2, 0)]).is_err());
    }

    #[test]
    fn json_shape() {
        let g = BipartiteGraph::new(2, 3, vec![(1, 2), (0, 0)]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"n_l":2,"n_s":3,"edges":[[0,0],[1,2]]}"#);
        let back: BipartiteGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<BipartiteGraph>(r#"{"n_l":1,"n_s":1,"edges":[[0,3]]}"#).is_err());
    }

    #[test]
    fn typical_complete_graph() {
        let r = check_typicality(&BipartiteGraph::complete(4, 4), 1.0).unwrap();
        assert!(r.is_typical());
        assert_eq!((r.min_deg_l, r.max_deg_s), (4, 4));
        assert_eq!(r.min_codeg_l, Some(4));
        for n in 2..7 {
            assert!(check_typicality(&BipartiteGraph::complete(n, n), 1.0).unwrap().is_typical());
        }
    }

    #[test]
    fn disjoint_edges_not_typical() {
        let g = BipartiteGraph::new(2, 2, vec![(0, 0), (1, 1)]).unwrap();
        let r = check_typicality(&g, 1.0).unwrap();
        assert!(!r.connected);
        assert!(!r.is_typical());
    }

    #[test]
    fn typicality_rejects_nonpositive_p() {
        assert!(check_typicality(&BipartiteGraph::complete(2, 2), 0.0).is_err());
    }

    fn brute_codegree_range(g: &BipartiteGraph, left: bool) -> Option<(usize, usize)> {
        let (a, b) = if left { (g.n_l, g.n_s) } else { (g.n_s, g.n_l) };
        let mut r: Option<(usize, usize)> = None;
        for u in 0..a {
            for w in (u + 1)..a {
                let c = (0..b)
                    .filter(|&x| if left { g.has_edge(u, x) && g.has_edge(w, x) } else { g.has_edge(x, u) && g.has_edge(x, w) })
                    .count();
                r = Some(r.map_or((c, c), |(lo, hi)| (lo.min(c), hi.max(c))));
            }
        }
        r
    }

    #[test]
    fn codegrees_match_brute_force() {
        for s in 0..5 {
            let g = sample_er(20, 15, 0.4, s).unwrap();
            let r = check_typicality(&g, 0.4).unwrap();
            let l = brute_codegree_range(&g, true);
            let sd = brute_codegree_range(&g, false);
            assert_eq!((r.min_codeg_l, r.max_codeg_l), (l.map(|x| x.0), l.map(|x| x.1)));
            assert_eq!((r.min_codeg_s, r.max_codeg_s), (sd.map(|x| x.0), sd.map(|x| x.1)));
        }
    }

    #[test]
    fn large_dense_er_is_usually_typical() {
        let hits = (0..20)
            .filter(|&s| check_typicality(&sample_er(200, 200, 0.6, s).unwrap(), 0.6).unwrap().is_typical())
            .count();
        assert!(hits >= 16, "typical in {hits}/20");
    }

    #[test]
    fn matching_examples() {
        let m = BipartiteGraph::new(3, 3, vec![(0, 0), (1, 1), (2, 2)]).unwrap();
        let c = matching_decomposition(&m);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 3);

        let star = BipartiteGraph::new(1, 3, vec![(0, 0), (0, 1), (0, 2)]).unwrap();
        let c = matching_decomposition(&star);
        assert_eq!(c.len(), 3);
        assert!(c.iter().all(|k| k.len() == 1));

        assert!(matching_decomposition(&BipartiteGraph::new(2, 2, vec![]).unwrap()).is_empty());
    }

    #[test]
    fn matching_on_random_graph() {
        let g = sample_er(20, 20, 0.5, 7).unwrap();
        let classes = matching_decomposition(&g);
        assert_valid_decomposition(&g, &classes);
        assert_eq!(classes.len(), g.max_degree());
    }

    #[test]
    fn connectivity() {
        assert!(BipartiteGraph::complete(3, 1).is_connected());
        assert!(!BipartiteGraph::new(2, 2, vec![(0, 0), (0, 1)]).unwrap().is_connected());
    }
}
