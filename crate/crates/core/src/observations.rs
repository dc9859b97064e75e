//! Direction observations on the edges of a bipartite graph, with the hidden
//! set of corrupted edges kept for evaluation.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{direction, LocationSet};
use crate::graph::{BipartiteGraph, Edge};
use crate::linalg::{self, norm};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationModel {
    /// Each edge independently corrupted with probability `q`.
    RandomQ,
    /// Bad edges chosen under per-vertex caps `gamma * n`.
    AdversarialGamma,
    /// Observations loaded from a file with no known generating model.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialStrategy {
    /// Bad edges get uniform random directions.
    Random,
    /// All bad edges at location `i` point from a phantom location `w_i`.
    Consistent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub graph: BipartiteGraph,
    /// Unit vectors aligned with `graph.edges()`.
    pub v: Vec<Vec<f64>>,
    /// Corrupted edges in canonical order. Evaluation only.
    pub bad_edges: Vec<Edge>,
    pub sigma: f64,
    pub q: Option<f64>,
    pub gamma: Option<f64>,
    pub model: ObservationModel,
    pub seed: Option<u64>,
}

impl ObservationSet {
    pub fn dim(&self) -> usize {
        self.v.first().map_or(0, Vec::len)
    }

    /// Observation for edge `(i, j)`, if present.
    pub fn get(&self, i: usize, j: usize) -> Option<&[f64]> {
        self.graph.edge_index(i, j).map(|e| self.v[e].as_slice())
    }

    pub fn is_bad(&self, i: usize, j: usize) -> bool {
        self.bad_edges.binary_search(&(i, j)).is_ok()
    }

    /// Number of bad edges at each location and each structure point.
    pub fn bad_degrees(&self) -> (Vec<usize>, Vec<usize>) {
        let mut l = vec![0; self.graph.n_l()];
        let mut s = vec![0; self.graph.n_s()];
        for &(i, j) in &self.bad_edges {
            l[i] += 1;
            s[j] += 1;
        }
        (l, s)
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Random corruption model: per edge, with probability `q` the observation
/// is a uniform direction; otherwise it is the true direction plus `sigma`
/// times a uniform unit vector, renormalized.
///
/// Each edge draws from its own stream, keyed by its canonical index.
pub fn observe_random(
    ls: &LocationSet,
    g: &BipartiteGraph,
    q: f64,
    sigma: f64,
    seed: u64,
) -> Result<ObservationSet> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("corruption probability {q} outside [0, 1]")));
    }
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::InvalidParameter(format!("noise level {sigma} must be non-negative")));
    }
    check_shapes(ls, g)?;
    let mut v = Vec::with_capacity(g.num_edges());
    let mut bad_edges = Vec::new();
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        let truth = direction(&ls.t[i], &ls.p[j])?;
        let mut rng = rng::stream(seed, tag::OBSERVE, e as u64);
        let corrupt = rng.random::<f64>() < q;
        let z = rng::unit_sphere(&mut rng, ls.dim);
        if corrupt {
            bad_edges.push((i, j));
            v.push(z);
        } else if sigma == 0.0 {
            v.push(truth);
        } else {
            let mut noisy = truth;
            linalg::axpy(sigma, &z, &mut noisy);
            v.push(normalize(noisy));
        }
    }
    Ok(ObservationSet {
        graph: g.clone(),
        v,
        bad_edges,
        sigma,
        q: Some(q),
        gamma: None,
        model: ObservationModel::RandomQ,
        seed: Some(seed),
    })
}

/// Adversarial model: a maximal bad-edge set with at most `floor(gamma n_s)`
/// bad edges per location and `floor(gamma n_l)` per structure point, chosen
/// greedily over a shuffled edge order, then corrupted per `strategy`.
pub fn observe_adversarial(
    ls: &LocationSet,
    g: &BipartiteGraph,
    gamma: f64,
    strategy: AdversarialStrategy,
    seed: u64,
) -> Result<ObservationSet> {
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::InvalidGamma(gamma));
    }
    check_shapes(ls, g)?;
    let cap_l = (gamma * g.n_s() as f64).floor() as usize;
    let cap_s = (gamma * g.n_l() as f64).floor() as usize;

    let mut order: Vec<usize> = (0..g.num_edges()).collect();
    order.shuffle(&mut rng::stream(seed, tag::ADVERSARY, 0));
    let (mut deg_l, mut deg_s) = (vec![0usize; g.n_l()], vec![0usize; g.n_s()]);
    let mut is_bad = vec![false; g.num_edges()];
    for e in order {
        let (i, j) = g.edges()[e];
        if deg_l[i] < cap_l && deg_s[j] < cap_s {
            deg_l[i] += 1;
            deg_s[j] += 1;
            is_bad[e] = true;
        }
    }

    let phantoms: Vec<Option<Vec<f64>>> = match strategy {
        AdversarialStrategy::Random => vec![None; g.n_l()],
        AdversarialStrategy::Consistent => {
            let mut dists: Vec<f64> = g.edges().iter().map(|&(i, j)| norm(&ls.diff(i, j))).collect();
            dists.sort_by(f64::total_cmp);
            let radius = dists.get(dists.len() / 2).copied().unwrap_or(1.0);
            (0..g.n_l())
                .map(|i| {
                    (deg_l[i] > 0).then(|| {
                        let mut rng = rng::stream(seed, tag::ADVERSARY, 1 + i as u64);
                        let u = rng::unit_sphere(&mut rng, ls.dim);
                        linalg::add(&ls.t[i], &linalg::scale(&u, radius))
                    })
                })
                .collect()
        }
    };

    let mut v = Vec::with_capacity(g.num_edges());
    let mut bad_edges = Vec::new();
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        if !is_bad[e] {
            v.push(direction(&ls.t[i], &ls.p[j])?);
            continue;
        }
        bad_edges.push((i, j));
        match &phantoms[i] {
            Some(w) => v.push(direction(w, &ls.p[j])?),
            None => {
                let mut rng = rng::stream(seed, tag::OBSERVE, e as u64);
                v.push(rng::unit_sphere(&mut rng, ls.dim));
            }
        }
    }
    Ok(ObservationSet {
        graph: g.clone(),
        v,
        bad_edges,
        sigma: 0.0,
        q: None,
        gamma: Some(gamma),
        model: ObservationModel::AdversarialGamma,
        seed: Some(seed),
    })
}

fn check_shapes(ls: &LocationSet, g: &BipartiteGraph) -> Result<()> {
    if ls.n_l() != g.n_l() || ls.n_s() != g.n_s() {
        return Err(Error::InvalidParameter(format!(
            "graph is {}x{} but location set is {}x{}",
            g.n_l(),
            g.n_s(),
            ls.n_l(),
            ls.n_s()
        )));
    }
    Ok(())
}

/// A problem instance as stored on disk. The ground truth is optional so
/// that externally produced observations can be solved.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub location_set: Option<LocationSet>,
    pub observations: ObservationSet,
}

#[derive(Serialize, Deserialize)]
struct RawMeta {
    #[serde(default)]
    q: Option<f64>,
    #[serde(default)]
    sigma: Option<f64>,
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    model: Option<ObservationModel>,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    location_set: Option<LocationSet>,
    graph: BipartiteGraph,
    observations: Vec<(usize, usize, Vec<f64>)>,
    #[serde(default)]
    bad_edges: Vec<[usize; 2]>,
    #[serde(default)]
    meta: Option<RawMeta>,
}

impl Instance {
    pub fn to_json(&self) -> Result<String> {
        let o = &self.observations;
        let raw = RawInstance {
            location_set: self.location_set.clone(),
            graph: o.graph.clone(),
            observations: o.graph.edges().iter().zip(&o.v).map(|(&(i, j), v)| (i, j, v.clone())).collect(),
            bad_edges: o.bad_edges.iter().map(|&(i, j)| [i, j]).collect(),
            meta: Some(RawMeta {
                q: o.q,
                sigma: Some(o.sigma),
                gamma: o.gamma,
                seed: o.seed,
                model: Some(o.model),
            }),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    /// Parses an instance. Observations may be listed in any order but must
    /// cover every graph edge exactly once and be unit vectors.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawInstance = serde_json::from_str(s)?;
        let g = raw.graph;
        let mut v: Vec<Option<Vec<f64>>> = vec![None; g.num_edges()];
        let mut dim = None;
        for (i, j, vec) in raw.observations {
            let e = g
                .edge_index(i, j)
                .ok_or_else(|| Error::InvalidGraph(format!("observation on non-edge ({i}, {j})")))?;
            let d = *dim.get_or_insert(vec.len());
            if vec.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: vec.len() });
            }
            if (norm(&vec) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("observation ({i}, {j}) is not a unit vector")));
            }
            if v[e].replace(vec).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate observation for ({i}, {j})")));
            }
        }
        let v: Vec<Vec<f64>> = v
            .into_iter()
            .enumerate()
            .map(|(e, o)| o.ok_or_else(|| Error::InvalidGraph(format!("edge {:?} has no observation", g.edges()[e]))))
            .collect::<Result<_>>()?;
        if let Some(ls) = &raw.location_set {
            check_shapes(ls, &g)?;
            if dim.is_some_and(|d| d != ls.dim) {
                return Err(Error::DimensionMismatch { expected: ls.dim, got: dim.unwrap_or(0) });
            }
        }
        let mut bad_edges: Vec<Edge> = raw.bad_edges.into_iter().map(|[i, j]| (i, j)).collect();
        bad_edges.sort_unstable();
        if let Some(&(i, j)) = bad_edges.iter().find(|&&(i, j)| !g.has_edge(i, j)) {
            return Err(Error::InvalidGraph(format!("bad edge ({i}, {j}) is not a graph edge")));
        }
        let meta = raw.meta.unwrap_or(RawMeta { q: None, sigma: None, gamma: None, seed: None, model: None });
        Ok(Self {
            location_set: raw.location_set,
            observations: ObservationSet {
                graph: g,
                v,
                bad_edges,
                sigma: meta.sigma.unwrap_or(0.0),
                q: meta.q,
                gamma: meta.gamma,
                model: meta.model.unwrap_or(ObservationModel::External),
                seed: meta.seed,
            },
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
