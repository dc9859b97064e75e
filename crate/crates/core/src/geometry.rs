//! Point sets and the geometric constants of the recovery conditions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::linalg::{self, dot, norm, orthonormal_basis, reject_norm, sub};
use crate::rng::{self, tag};

/// Distances at or below this are treated as coincident points.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Relative rank tolerance for orthonormalization.
pub const RANK_TOL: f64 = 1e-10;

/// Camera locations `t` and structure points `p` in `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLocationSet")]
pub struct LocationSet {
    pub dim: usize,
    pub t: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawLocationSet {
    dim: usize,
    t: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
}

impl TryFrom<RawLocationSet> for LocationSet {
    type Error = Error;

    fn try_from(raw: RawLocationSet) -> Result<Self> {
        LocationSet::new(raw.dim, raw.t, raw.p)
    }
}

impl LocationSet {
    pub fn new(dim: usize, t: Vec<Vec<f64>>, p: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(bad) = t.iter().chain(&p).find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        Ok(Self { dim, t, p })
    }

    /// I.i.d. standard Gaussian points, translated so that the centroid of
    /// all `n_l + n_s` points is the origin.
    pub fn gaussian(n_l: usize, n_s: usize, dim: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, tag::POINTS, 0);
        let mut t: Vec<Vec<f64>> = (0..n_l).map(|_| rng::gaussian_vec(&mut rng, dim)).collect();
        let mut p: Vec<Vec<f64>> = (0..n_s).map(|_| rng::gaussian_vec(&mut rng, dim)).collect();
        let mut mean = vec![0.0; dim];
        for v in t.iter().chain(&p) {
            linalg::axpy(1.0, v, &mut mean);
        }
        let n = (n_l + n_s).max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        for v in t.iter_mut().chain(p.iter_mut()) {
            linalg::axpy(-1.0, &mean, v);
        }
        Self { dim, t, p }
    }

    pub fn n_l(&self) -> usize {
        self.t.len()
    }

    pub fn n_s(&self) -> usize {
        self.p.len()
    }

    /// `t_ij = t_i - p_j`.
    pub fn diff(&self, i: usize, j: usize) -> Vec<f64> {
        sub(&self.t[i], &self.p[j])
    }

    /// Column-stacked coordinates: all `t` then all `p`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.t.iter().chain(&self.p).flatten().copied().collect()
    }

    pub fn from_flat(dim: usize, n_l: usize, n_s: usize, x: &[f64]) -> Result<Self> {
        if x.len() != dim * (n_l + n_s) {
            return Err(Error::DimensionMismatch { expected: dim * (n_l + n_s), got: x.len() });
        }
        let mut chunks = x.chunks(dim).map(<[f64]>::to_vec);
        let t = chunks.by_ref().take(n_l).collect();
        let p = chunks.collect();
        Ok(Self { dim, t, p })
    }

    /// Mean of all points.
    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for v in self.t.iter().chain(&self.p) {
            linalg::axpy(1.0, v, &mut c);
        }
        let n = (self.n_l() + self.n_s()).max(1) as f64;
        c.iter_mut().for_each(|x| *x /= n);
        c
    }

    /// Whether all `n_l + n_s` points are pairwise distinct.
    pub fn all_distinct(&self) -> bool {
        let pts: Vec<&Vec<f64>> = self.t.iter().chain(&self.p).collect();
        (0..pts.len()).all(|a| (a + 1..pts.len()).all(|b| norm(&sub(pts[a], pts[b])) > DEGENERACY_TOL))
    }

    /// `max |t_i - p_j|` over location–structure pairs.
    pub fn mu_inf(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n_l() {
            for j in 0..self.n_s() {
                m = m.max(norm(&self.diff(i, j)));
            }
        }
        m
    }

    pub fn scaled(&self, s: f64) -> Self {
        let f = |v: &Vec<f64>| linalg::scale(v, s);
        Self { dim: self.dim, t: self.t.iter().map(f).collect(), p: self.p.iter().map(f).collect() }
    }
}

/// Unit vector `(a - b) / |a - b|`.
pub fn direction(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let d = sub(a, b);
    let n = norm(&d);
    if n <= DEGENERACY_TOL {
        return Err(Error::DegeneratePair(n));
    }
    Ok(d.into_iter().map(|x| x / n).collect())
}

/// Projection of `h` onto the orthogonal complement of `span(basis)`. The
/// basis may contain dependent or zero vectors.
pub fn project_orthogonal(h: &[f64], basis: &[&[f64]]) -> Vec<f64> {
    let q = orthonormal_basis(basis, RANK_TOL);
    linalg::reject_basis(h, &q)
}

/// `t_ij = (1 + delta) t0_ij + eta s` with `s ⊥ t0_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationDecomposition {
    pub delta: f64,
    pub eta: f64,
    /// Zero when `eta` is (numerically) zero; check [`Self::s_defined`].
    pub s: Vec<f64>,
    pub s_defined: bool,
}

impl DeformationDecomposition {
    pub fn reconstruct(&self, t0: &[f64]) -> Vec<f64> {
        t0.iter()
            .zip(&self.s)
            .map(|(r, s)| (1.0 + self.delta) * r + self.eta * s)
            .collect()
    }
}

pub fn decompose_deformation(t_ij: &[f64], t0_ij: &[f64]) -> Result<DeformationDecomposition> {
    if t_ij.len() != t0_ij.len() {
        return Err(Error::DimensionMismatch { expected: t0_ij.len(), got: t_ij.len() });
    }
    let r2 = linalg::norm_sq(t0_ij);
    if r2.sqrt() <= DEGENERACY_TOL {
        return Err(Error::ZeroReference);
    }
    let c = dot(t_ij, t0_ij) / r2;
    let resid: Vec<f64> = t_ij.iter().zip(t0_ij).map(|(t, r)| t - c * r).collect();
    let eta = norm(&resid);
    let s_defined = eta > DEGENERACY_TOL;
    let s = if s_defined { linalg::scale(&resid, 1.0 / eta) } else { vec![0.0; t_ij.len()] };
    Ok(DeformationDecomposition { delta: c - 1.0, eta, s, s_defined })
}

/// Largest `c0` with `c0 |t_kl| <= |t_ij|` for all location–structure pairs:
/// the minimum cross distance over the maximum.
pub fn pairwise_ratio_c0(ls: &LocationSet) -> Result<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..ls.n_l() {
        for j in 0..ls.n_s() {
            let n = norm(&ls.diff(i, j));
            if n <= DEGENERACY_TOL {
                return Err(Error::DegeneratePair(n));
            }
            lo = lo.min(n);
            hi = hi.max(n);
        }
    }
    if hi == 0.0 {
        return Err(Error::InvalidParameter("c0 needs at least one cross pair".into()));
    }
    Ok(lo / hi)
}

/// Smaller of the two quadruple ratios for `(i, k, j, l)`.
pub fn beta_quadruple(ls: &LocationSet, i: usize, k: usize, j: usize, l: usize) -> Result<f64> {
    let tij = ls.diff(i, j);
    let nij = norm(&tij);
    if nij <= DEGENERACY_TOL {
        return Err(Error::DegeneratePair(nij));
    }
    let tkj = ls.diff(k, j);
    let til = ls.diff(i, l);
    let tkl = ls.diff(k, l);
    for v in [&tkj, &til, &tkl] {
        let n = norm(v);
        if n <= DEGENERACY_TOL {
            return Err(Error::DegeneratePair(n));
        }
    }
    let a = reject_norm(&tij, &orthonormal_basis(&[&tkj, &til], RANK_TOL));
    let b = reject_norm(&tij, &orthonormal_basis(&[&tkl, &til], RANK_TOL));
    Ok(a.min(b) / nij)
}

/// Smallest [`beta_quadruple`] value, by exhaustive iteration over all
/// quadruples `i != k`, `j != l`.
pub fn beta_constant(ls: &LocationSet) -> Result<f64> {
    let mut best: f64 = 1.0;
    for i in 0..ls.n_l() {
        for k in (0..ls.n_l()).filter(|&k| k != i) {
            for j in 0..ls.n_s() {
                for l in (0..ls.n_s()).filter(|&l| l != j) {
                    best = best.min(beta_quadruple(ls, i, k, j, l)?);
                }
            }
        }
    }
    Ok(best)
}

/// Condition-4 minimum over `samples` uniformly drawn quadruples. This is an
/// upper bound on [`beta_constant`], for sizes where the exhaustive loop is
/// too slow.
pub fn beta_constant_sampled(ls: &LocationSet, samples: usize, seed: u64) -> Result<f64> {
    let (nl, ns) = (ls.n_l(), ls.n_s());
    if nl < 2 || ns < 2 {
        return Ok(1.0);
    }
    let mut rng = rng::stream(seed, tag::SAMPLE, 0);
    let mut best: f64 = 1.0;
    for _ in 0..samples {
        let i = rng.random_range(0..nl);
        let k = (i + rng.random_range(1..nl)) % nl;
        let j = rng.random_range(0..ns);
        let l = (j + rng.random_range(1..ns)) % ns;
        best = best.min(beta_quadruple(ls, i, k, j, l)?);
    }
    Ok(best)
}

/// `S_{i0 j0} = {(t_k, p_l) : i0 l, k l, k j0 in E, k != i0, l != j0}` as
/// index pairs `(k, l)`.
pub fn wd_index_set(g: &BipartiteGraph, i0: usize, j0: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for &k in g.neighbors_s(j0).iter().filter(|&&k| k != i0) {
        for &l in g.neighbors_l(i0).iter().filter(|&&l| l != j0) {
            if g.has_edge(k, l) {
                out.push((k, l));
            }
        }
    }
    out
}

/// Estimated well-distributedness constant of the set `S_{i0 j0}` with
/// respect to `(t_{i0}, p_{j0})`. See [`well_distributed_estimate`].
pub fn well_distributed_constant(
    ls: &LocationSet,
    g: &BipartiteGraph,
    i0: usize,
    j0: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let idx = wd_index_set(g, i0, j0);
    if idx.is_empty() {
        return Err(Error::EmptySet(i0, j0));
    }
    let pairs: Vec<(&[f64], &[f64])> =
        idx.iter().map(|&(k, l)| (ls.t[k].as_slice(), ls.p[l].as_slice())).collect();
    well_distributed_estimate(&ls.t[i0], &ls.p[j0], &pairs, trials, seed)
}

/// Upper estimate of the best `c` such that
/// `sum_{(t,p) in S} |P_{span{p-x, t-p, y-t}^⊥} h| >= c |S| |P_{(x-y)^⊥} h|`
/// for all `h`.
///
/// Since `x - y` lies in every span, it suffices to minimize
/// `f(h) = mean_S |P_{W^⊥} h|` over unit `h ⊥ (x - y)`. Restart `r` draws 10
/// uniform candidates from its own stream, keeps the best, and refines it by
/// 200 steps of projected subgradient descent with step `1/k`. The result is
/// the smallest `f` seen across all restarts, so adding restarts never
/// increases it.
pub fn well_distributed_estimate(
    x: &[f64],
    y: &[f64],
    pairs: &[(&[f64], &[f64])],
    trials: usize,
    seed: u64,
) -> Result<f64> {
    const CANDIDATES: usize = 10;
    const STEPS: usize = 200;

    if pairs.is_empty() {
        return Err(Error::InvalidParameter("well-distributedness of an empty set".into()));
    }
    let dim = x.len();
    let u = direction(x, y)?;
    let spans: Vec<Vec<Vec<f64>>> = pairs
        .iter()
        .map(|(t, p)| {
            let a = sub(p, x);
            let b = sub(t, p);
            let c = sub(y, t);
            orthonormal_basis(&[&a, &b, &c], RANK_TOL)
        })
        .collect();
    let m = spans.len() as f64;
    let objective = |h: &[f64]| spans.iter().map(|q| reject_norm(h, q)).sum::<f64>() / m;

    let admissible = |h: &mut Vec<f64>| -> bool {
        let c = dot(h, &u);
        linalg::axpy(-c, &u, h);
        let n = norm(h);
        if n <= 1e-12 {
            return false;
        }
        h.iter_mut().for_each(|v| *v /= n);
        true
    };

    let mut best = 1.0f64;
    for r in 0..trials.max(1) {
        let mut rng = rng::stream(seed, tag::ESTIMATOR, r as u64);
        let mut start: Option<(f64, Vec<f64>)> = None;
        let mut drawn = 0;
        while drawn < CANDIDATES {
            let mut h = rng::unit_sphere(&mut rng, dim);
            if !admissible(&mut h) {
                continue;
            }
            drawn += 1;
            let f = objective(&h);
            if start.as_ref().is_none_or(|(bf, _)| f < *bf) {
                start = Some((f, h));
            }
        }
        let (mut fbest, mut h) = start.expect("at least one candidate");
        for k in 1..=STEPS {
            let mut g = vec![0.0; dim];
            for q in &spans {
                let r = linalg::reject_basis(&h, q);
                let n = norm(&r);
                if n > 1e-15 {
                    linalg::axpy(1.0 / (m * n), &r, &mut g);
                }
            }
            // tangent to the sphere inside u^⊥
            let gh = dot(&g, &h);
            linalg::axpy(-gh, &h, &mut g);
            if norm(&g) <= 1e-15 {
                break;
            }
            linalg::axpy(-1.0 / k as f64, &g, &mut h);
            if !admissible(&mut h) {
                break;
            }
            fbest = fbest.min(objective(&h));
        }
        best = best.min(fbest);
    }
    Ok(best.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ls(t: Vec<Vec<f64>>, p: Vec<Vec<f64>>) -> LocationSet {
        let dim = t[0].len();
        LocationSet::new(dim, t, p).unwrap()
    }

    #[test]
    fn direction_examples() {
        assert_eq!(direction(&[1.0, 0.0, 0.0], &[0.0; 3]).unwrap(), vec![1.0, 0.0, 0.0]);
        let d = direction(&[1.0, 1.0, 0.0], &[0.0; 3]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(d[0], r, epsilon = 1e-15);
        assert_abs_diff_eq!(d[1], r, epsilon = 1e-15);
        assert!(matches!(direction(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Err(Error::DegeneratePair(_))));
    }

    #[test]
    fn projection_examples() {
        let r = project_orthogonal(&[1.0, 1.0, 0.0], &[&[1.0, 0.0, 0.0]]);
        assert_abs_diff_eq!(r.as_slice(), [0.0, 1.0, 0.0].as_slice(), epsilon = 1e-15);

        let h = [0.3, -2.0, 5.0];
        let r = project_orthogonal(&h, &[&h]);
        assert!(norm(&r) < 1e-14);

        // Gram-Schmidt by hand: span{e1, e1 + e2} = span{e1, e2}
        let r = project_orthogonal(&[1.0, 2.0, 3.0, 4.0], &[&[1.0, 0.0, 0.0, 0.0], &[1.0, 1.0, 0.0, 0.0]]);
        assert_abs_diff_eq!(r.as_slice(), [0.0, 0.0, 3.0, 4.0].as_slice(), epsilon = 1e-14);

        let r = project_orthogonal(&[1.0, 2.0], &[&[0.0, 0.0]]);
        assert_eq!(r, vec![1.0, 2.0]);
    }

    #[test]
    fn deformation_examples() {
        let t0 = [0.5, -1.0, 2.0];
        let d = decompose_deformation(&[1.0, -2.0, 4.0], &t0).unwrap();
        assert_abs_diff_eq!(d.delta, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.eta, 0.0, epsilon = 1e-15);
        assert!(!d.s_defined);

        let d = decompose_deformation(&t0, &t0).unwrap();
        assert_abs_diff_eq!(d.delta, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.eta, 0.0, epsilon = 1e-15);

        let d = decompose_deformation(&[1.0, 1.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!((d.delta, d.eta), (0.0, 1.0));
        assert_eq!(d.s, vec![0.0, 1.0, 0.0]);
        assert!(d.s_defined);

        assert!(matches!(decompose_deformation(&[1.0, 0.0, 0.0], &[0.0; 3]), Err(Error::ZeroReference)));
    }

    #[test]
    fn c0_examples() {
        // every cross distance 1
        let s = ls(vec![vec![0.0, 0.0, 0.0]], vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        assert_eq!(pairwise_ratio_c0(&s).unwrap(), 1.0);
        // cross distances {1, 2, 4}
        let s = ls(vec![vec![0.0, 0.0, 0.0]], vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 4.0]]);
        assert_eq!(pairwise_ratio_c0(&s).unwrap(), 0.25);
        let s = ls(vec![vec![1.0, 0.0, 0.0]], vec![vec![1.0, 0.0, 0.0]]);
        assert!(matches!(pairwise_ratio_c0(&s), Err(Error::DegeneratePair(_))));
    }

    #[test]
    fn beta_quadruple_extremes() {
        // t_i - p_j = e3, t_k - p_j = e1, t_i - p_l = e2; t_k - p_l = e1 - e2 + e3... pick points:
        // p_j = 0, t_i = e3, t_k = e1, p_l = e3 - e2
        let s = ls(
            vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
            vec![vec![0.0, 0.0, 0.0], vec![0.0, -1.0, 1.0]],
        );
        let first = {
            let tij = s.diff(0, 0);
            reject_norm(&tij, &orthonormal_basis(&[&s.diff(1, 0), &s.diff(0, 1)], RANK_TOL)) / norm(&tij)
        };
        assert_abs_diff_eq!(first, 1.0, epsilon = 1e-15);

        // coplanar configuration annihilates the projection
        let s = ls(
            vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
            vec![vec![0.0, 1.0, 0.0], vec![2.0, 3.0, 0.0]],
        );
        assert_abs_diff_eq!(beta_constant(&s).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn beta_sampled_bounds_exact_from_above() {
        let s = LocationSet::gaussian(5, 5, 4, 3);
        let exact = beta_constant(&s).unwrap();
        let sampled = beta_constant_sampled(&s, 200, 1).unwrap();
        assert!(sampled >= exact);
    }

    #[test]
    fn wd_hand_construction_is_annihilated() {
        // x - y = e1, span{p - x, t - p, y - t} = span{e1, e2, e3}; h = e2 is admissible.
        let x = [0.0, 0.0, 0.0, 0.0];
        let y = [-1.0, 0.0, 0.0, 0.0];
        let t = [0.0, 0.0, 1.0, 0.0];
        let p = [0.0, 1.0, 0.0, 0.0];
        let c = well_distributed_estimate(&x, &y, &[(&t, &p)], 5, 11).unwrap();
        assert!(c < 1e-2, "estimate {c}");
    }

    #[test]
    fn wd_duplicates_match_single_pair() {
        let s = LocationSet::gaussian(2, 2, 6, 5);
        let single = well_distributed_estimate(&s.t[0], &s.p[0], &[(&s.t[1], &s.p[1])], 3, 2).unwrap();
        let pairs = vec![(s.t[1].as_slice(), s.p[1].as_slice()); 4];
        let dup = well_distributed_estimate(&s.t[0], &s.p[0], &pairs, 3, 2).unwrap();
        assert_abs_diff_eq!(single, dup, epsilon = 1e-9);
    }

    #[test]
    fn wd_empty_set_errors() {
        let s = LocationSet::gaussian(2, 2, 4, 1);
        let g = BipartiteGraph::new(2, 2, vec![(0, 0)]).unwrap();
        assert!(matches!(well_distributed_constant(&s, &g, 0, 0, 2, 0), Err(Error::EmptySet(0, 0))));
    }

    #[test]
    fn wd_index_set_on_complete_graph() {
        let g = BipartiteGraph::complete(3, 4);
        let set = wd_index_set(&g, 0, 0);
        assert_eq!(set.len(), 2 * 3);
        assert!(set.iter().all(|&(k, l)| k != 0 && l != 0));
    }

    #[test]
    fn wd_more_trials_never_increase() {
        let s = LocationSet::gaussian(6, 6, 5, 9);
        let g = BipartiteGraph::complete(6, 6);
        let mut prev = f64::INFINITY;
        for trials in 1..6 {
            let c = well_distributed_constant(&s, &g, 0, 0, trials, 4).unwrap();
            assert!((0.0..=1.0).contains(&c));
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn gaussian_set_is_centered() {
        let s = LocationSet::gaussian(7, 4, 3, 1);
        assert!(norm(&s.centroid()) < 1e-14);
        assert!(s.all_distinct());
    }

    #[test]
    fn flat_roundtrip_and_json() {
        let s = LocationSet::gaussian(2, 3, 3, 8);
        let back = LocationSet::from_flat(3, 2, 3, &s.to_flat()).unwrap();
        assert_eq!(back, s);
        let json = serde_json::to_string(&s).unwrap();
        let parsed: LocationSet = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, s);
        assert!(serde_json::from_str::<LocationSet>(r#"{"dim":3,"t":[[1,2]],"p":[]}"#).is_err());
    }
}
