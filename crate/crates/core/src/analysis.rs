//! Deterministic recovery conditions, the corruption bound they imply,
//! numerical checkers for the rigidity and C4 inequalities, and the
//! recovery error metric.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    self, beta_constant, beta_constant_sampled, decompose_deformation, pairwise_ratio_c0,
    project_orthogonal, LocationSet,
};
use crate::graph::{check_typicality, BipartiteGraph, TypicalityReport};
use crate::linalg::{dot, norm, sub};
use crate::observations::ObservationSet;
use crate::rng::{self, tag};

/// Additive slack for every inequality check.
pub const SLACK: f64 = 1e-9;

/// `384 * 204 * 64`.
pub const EPSILON_DENOMINATOR: f64 = 5_013_504.0;

fn unit_interval(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {x} outside (0, 1]")))
    }
}

/// Largest bad-edge fraction for which the recovery conditions guarantee
/// exact recovery: `beta c0 c1^2 p^4 / (384 * 204 * 64)`.
pub fn epsilon_bound(p: f64, c0: f64, beta: f64, c1: f64) -> Result<f64> {
    unit_interval("p", p)?;
    unit_interval("c0", c0)?;
    unit_interval("beta", beta)?;
    unit_interval("c1", c1)?;
    Ok(beta * c0 * c1 * c1 * p.powi(4) / EPSILON_DENOMINATOR)
}

/// Minimum number of vertices per side: `max(64, 8 / p^2)`, strict.
pub fn size_requirement(p: f64) -> f64 {
    64f64.max(8.0 / (p * p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionOptions {
    /// Restarts per well-distributedness estimate.
    pub wd_trials: usize,
    /// Number of random `(i, j)` pairs for the well-distributedness check; `None` sweeps all.
    pub wd_pairs: Option<usize>,
    /// Number of sampled quadruples for `beta`; `None` is exhaustive.
    pub beta_samples: Option<usize>,
    pub seed: u64,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self { wd_trials: 5, wd_pairs: Some(25), beta_samples: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    PassesExhaustive,
    PassesSampled,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub cond1_typical: TypicalityReport,
    pub cond2_distinct: bool,
    pub cond3_c0: f64,
    pub cond4_beta: f64,
    pub cond4_exhaustive: bool,
    /// Minimum estimate over the evaluated pairs; 0 when some `S_ij` is empty.
    pub cond5_c1: f64,
    pub cond5_pairs: Vec<(usize, usize)>,
    pub cond5_exhaustive: bool,
    pub cond6_max_bad_frac_l: f64,
    pub cond6_max_bad_frac_s: f64,
    /// 0 when a constant is not strictly positive.
    pub epsilon_bound: f64,
    pub size_ok: bool,
    pub p: f64,
    pub passes: bool,
    pub verdict: Verdict,
}

impl ConditionReport {
    pub fn max_bad_fraction(&self) -> f64 {
        self.cond6_max_bad_frac_l.max(self.cond6_max_bad_frac_s)
    }

    /// Plain-text table of the report.
    pub fn to_table(&self) -> String {
        let yes = |b: bool| if b { "ok" } else { "FAIL" };
        let t = &self.cond1_typical;
        let mut s = String::new();
        s.push_str(&format!("{:<34} {:>14}  {}\n", "condition", "value", "status"));
        s.push_str(&format!(
            "{:<34} {:>14}  {}\n",
            "1 typical (connected)",
            t.connected,
            yes(t.connected)
        ));
        s.push_str(&format!(
            "{:<34} {:>14}  {}\n",
            "1 typical (degrees)",
            format!("[{},{}]/[{},{}]", t.min_deg_l, t.max_deg_l, t.min_deg_s, t.max_deg_s),
            yes(t.degree_bounds_ok)
        ));
        s.push_str(&format!("{:<34} {:>14}  {}\n", "1 typical (codegrees)", "", yes(t.codegree_bounds_ok)));
        s.push_str(&format!("{:<34} {:>14}  {}\n", "2 distinct points", self.cond2_distinct, yes(self.cond2_distinct)));
        s.push_str(&format!("{:<34} {:>14.6}  {}\n", "3 c0", self.cond3_c0, yes(self.cond3_c0 > 0.0)));
        let beta_label = if self.cond4_exhaustive { "4 beta (exhaustive)" } else { "4 beta (sampled)" };
        s.push_str(&format!("{:<34} {:>14.6}  {}\n", beta_label, self.cond4_beta, yes(self.cond4_beta > 0.0)));
        let c1_label = if self.cond5_exhaustive { "5 c1 (exhaustive)" } else { "5 c1 (sampled)" };
        s.push_str(&format!("{:<34} {:>14.6}  {}\n", c1_label, self.cond5_c1, yes(self.cond5_c1 > 0.0)));
        s.push_str(&format!(
            "{:<34} {:>14.3e}  {}\n",
            "6 max bad fraction",
            self.max_bad_fraction(),
            yes(self.max_bad_fraction() <= self.epsilon_bound)
        ));
        s.push_str(&format!("{:<34} {:>14.3e}\n", "epsilon bound", self.epsilon_bound));
        s.push_str(&format!(
            "{:<34} {:>14}  {}\n",
            "size n > max(64, 8/p^2)",
            format!("{:.1}", size_requirement(self.p)),
            yes(self.size_ok)
        ));
        let verdict = match self.verdict {
            Verdict::PassesExhaustive => "passes (exhaustive)",
            Verdict::PassesSampled => "passes (sampled)",
            Verdict::Fails => "fails",
        };
        s.push_str(&format!("verdict: {verdict}\n"));
        s
    }
}

/// Evaluates every recovery condition on one instance.
pub fn check_conditions(
    ls: &LocationSet,
    g: &BipartiteGraph,
    obs: &ObservationSet,
    p: f64,
    opts: &ConditionOptions,
) -> Result<ConditionReport> {
    if ls.n_l() != g.n_l() || ls.n_s() != g.n_s() || obs.graph != *g {
        return Err(Error::InvalidParameter("location set, graph and observations disagree".into()));
    }
    let cond1 = check_typicality(g, p)?;
    let cond2 = ls.all_distinct();
    let c0 = if cond2 { pairwise_ratio_c0(ls)? } else { 0.0 };
    let (beta, cond4_exhaustive) = match (cond2, opts.beta_samples) {
        (false, _) => (0.0, true),
        (true, None) => (beta_constant(ls)?, true),
        (true, Some(k)) => (beta_constant_sampled(ls, k, opts.seed)?, false),
    };

    let total = g.n_l() * g.n_s();
    let (pairs, cond5_exhaustive): (Vec<(usize, usize)>, bool) = match opts.wd_pairs {
        Some(k) if k < total => {
            let mut rng = rng::stream(opts.seed, tag::SAMPLE, 5);
            let mut idx = sample(&mut rng, total, k).into_vec();
            idx.sort_unstable();
            (idx.into_iter().map(|a| (a / g.n_s(), a % g.n_s())).collect(), false)
        }
        _ => ((0..g.n_l()).flat_map(|i| (0..g.n_s()).map(move |j| (i, j))).collect(), true),
    };
    let mut c1: f64 = 1.0;
    if cond2 {
        for (n, &(i, j)) in pairs.iter().enumerate() {
            match geometry::well_distributed_constant(ls, g, i, j, opts.wd_trials, rng::derive_seed(&[opts.seed, n as u64])) {
                Ok(c) => c1 = c1.min(c),
                Err(Error::EmptySet(..)) => c1 = 0.0,
                Err(e) => return Err(e),
            }
        }
    } else {
        c1 = 0.0;
    }

    let (bad_l, bad_s) = obs.bad_degrees();
    let frac_l = bad_l.iter().map(|&d| d as f64 / g.n_s() as f64).fold(0.0, f64::max);
    let frac_s = bad_s.iter().map(|&d| d as f64 / g.n_l() as f64).fold(0.0, f64::max);

    let constants_positive = c0 > 0.0 && beta > 0.0 && c1 > 0.0;
    let eps = if constants_positive { epsilon_bound(p.min(1.0), c0, beta, c1)? } else { 0.0 };
    let need = size_requirement(p);
    let size_ok = g.n_l() as f64 > need && g.n_s() as f64 > need;

    let passes = cond1.is_typical()
        && cond2
        && constants_positive
        && frac_l.max(frac_s) <= eps
        && size_ok;
    let verdict = match (passes, cond4_exhaustive && cond5_exhaustive) {
        (false, _) => Verdict::Fails,
        (true, true) => Verdict::PassesExhaustive,
        (true, false) => Verdict::PassesSampled,
    };
    Ok(ConditionReport {
        cond1_typical: cond1,
        cond2_distinct: cond2,
        cond3_c0: c0,
        cond4_beta: beta,
        cond4_exhaustive,
        cond5_c1: c1,
        cond5_pairs: pairs,
        cond5_exhaustive,
        cond6_max_bad_frac_l: frac_l,
        cond6_max_bad_frac_s: frac_s,
        epsilon_bound: eps,
        size_ok,
        p,
        passes,
        verdict,
    })
}

/// Sufficient condition for `L(T0, P0) > 0`: with `c0 |E_g| > |E_b|`, good
/// edges contribute at least `c0 mu |E_g|` and bad ones at most `mu |E_b|`.
pub fn feasibility_sufficient(c0: f64, obs: &ObservationSet) -> bool {
    let bad = obs.bad_edges.len() as f64;
    let good = obs.graph.num_edges() as f64 - bad;
    c0 * good > bad
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidityCheck {
    pub lhs: f64,
    pub rhs_i: f64,
    pub rhs_ii: f64,
    pub holds: bool,
}

/// Rigidity inequality on the 4-cycle `t1 t2 t3 t4` under motion `v`.
///
/// With `t_ab = t_a - t_b` and `d_ab` defined by
/// `<v_a - v_b - alpha t_ab, t_ab/|t_ab|> = d_ab |t_ab|` (indices mod 4),
/// checks `sum |P_{t_ab^⊥}(v_a - v_b)|` against
/// `|P_{span(t23, t41)^⊥} t12| |d12 - d34|` and
/// `|P_{span(t34, t41)^⊥} t12| |d12 - d23|`.
pub fn check_rigidity_lemma(t: [&[f64]; 4], v: [&[f64]; 4], alpha: f64) -> Result<RigidityCheck> {
    let dim = t[0].len();
    if t.iter().chain(v.iter()).any(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: t.iter().chain(v.iter()).map(|x| x.len()).find(|&l| l != dim).unwrap_or(dim) });
    }
    let mut diffs = Vec::with_capacity(4);
    let mut deltas = [0.0; 4];
    let mut lhs = 0.0;
    for a in 0..4 {
        let b = (a + 1) % 4;
        let tab = sub(t[a], t[b]);
        let n = norm(&tab);
        if n <= geometry::DEGENERACY_TOL {
            return Err(Error::DegeneratePair(n));
        }
        let vab = sub(v[a], v[b]);
        deltas[a] = (dot(&vab, &tab) / n - alpha * n) / n;
        lhs += norm(&project_orthogonal(&vab, &[&tab]));
        diffs.push(tab);
    }
    let (t12, t23, t34, t41) = (&diffs[0], &diffs[1], &diffs[2], &diffs[3]);
    let rhs_i = norm(&project_orthogonal(t12, &[t23, t41])) * (deltas[0] - deltas[2]).abs();
    let rhs_ii = norm(&project_orthogonal(t12, &[t34, t41])) * (deltas[0] - deltas[1]).abs();
    Ok(RigidityCheck { lhs, rhs_i, rhs_ii, holds: lhs >= rhs_i.max(rhs_ii) - SLACK })
}

/// Motion vectors for [`check_c4_inequality`].
#[derive(Debug, Clone, PartialEq)]
pub struct C4Motion {
    pub hx: Vec<f64>,
    pub hy: Vec<f64>,
    pub ht: Vec<Vec<f64>>,
    pub hp: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C4Check {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// C4 inequality for `S = {(t_i, p_i)}` assumed `c`-well-distributed with
/// respect to `(x, y)`:
///
/// ```text
/// sum_{i not in X} |P_{(x-p_i)^⊥}(h_x - h_{p_i})| + |P_{(p_i-t_i)^⊥}(h_{p_i} - h_{t_i})|
///                 + |P_{(t_i-y)^⊥}(h_{t_i} - h_y)|
///   >= (c k - |X|) |P_{(x-y)^⊥}(h_x - h_y)|
/// ```
pub fn check_c4_inequality(
    x: &[f64],
    y: &[f64],
    pairs: &[(&[f64], &[f64])],
    c: f64,
    h: &C4Motion,
    excluded: &[usize],
) -> Result<C4Check> {
    let k = pairs.len();
    let d = x.len();
    if h.ht.len() != k || h.hp.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: h.ht.len().min(h.hp.len()) });
    }
    let all = [y, &h.hx, &h.hy]
        .into_iter()
        .chain(pairs.iter().flat_map(|(t, p)| [*t, *p]))
        .chain(h.ht.iter().chain(&h.hp).map(Vec::as_slice));
    if let Some(bad) = all.map(<[f64]>::len).find(|&l| l != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad });
    }
    let mut skip = vec![false; k];
    for &i in excluded {
        if i >= k {
            return Err(Error::InvalidParameter(format!("excluded index {i} >= {k}")));
        }
        skip[i] = true;
    }
    let xsize = skip.iter().filter(|&&s| s).count() as f64;
    let perp = |w: &[f64], a: &[f64]| norm(&project_orthogonal(w, &[a]));
    let mut lhs = 0.0;
    for (i, (t, p)) in pairs.iter().enumerate() {
        if skip[i] {
            continue;
        }
        lhs += perp(&sub(&h.hx, &h.hp[i]), &sub(x, p));
        lhs += perp(&sub(&h.hp[i], &h.ht[i]), &sub(p, t));
        lhs += perp(&sub(&h.ht[i], &h.hy), &sub(t, y));
    }
    let rhs = (c * k as f64 - xsize) * perp(&sub(&h.hx, &h.hy), &sub(x, y));
    Ok(C4Check { lhs, rhs, holds: lhs >= rhs - SLACK })
}

/// Rotation magnitudes `eta_ij` of a candidate `(T, P)` relative to the
/// ground truth, summed over good edges, bad edges and all of
/// `V_l x V_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSums {
    pub good: f64,
    pub bad: f64,
    pub complete: f64,
}

pub fn rotation_sums(candidate: &LocationSet, truth: &LocationSet, obs: &ObservationSet) -> Result<RotationSums> {
    if candidate.n_l() != truth.n_l() || candidate.n_s() != truth.n_s() || candidate.dim != truth.dim {
        return Err(Error::InvalidParameter("candidate and truth shapes differ".into()));
    }
    let mut sums = RotationSums { good: 0.0, bad: 0.0, complete: 0.0 };
    for i in 0..truth.n_l() {
        for j in 0..truth.n_s() {
            let eta = decompose_deformation(&candidate.diff(i, j), &truth.diff(i, j))?.eta;
            sums.complete += eta;
            if obs.graph.has_edge(i, j) {
                if obs.is_bad(i, j) {
                    sums.bad += eta;
                } else {
                    sums.good += eta;
                }
            }
        }
    }
    Ok(sums)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferenceCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Whether the corruption-level hypothesis `eps <= c1 p^3 / 48` holds;
    /// the inequality is only guaranteed when it does.
    pub hypothesis: bool,
    pub holds: bool,
}

/// Bad-to-good transference: `sum_good eta >= c1 p^3 / (48 eps) sum_bad eta`.
pub fn check_bad_to_good(sums: &RotationSums, eps: f64, c1: f64, p: f64) -> TransferenceCheck {
    let hypothesis = eps <= c1 * p.powi(3) / 48.0;
    let rhs = if sums.bad == 0.0 { 0.0 } else { c1 * p.powi(3) / (48.0 * eps) * sums.bad };
    TransferenceCheck { lhs: sums.good, rhs, hypothesis, holds: sums.good >= rhs - SLACK }
}

/// Good-to-complete transference: `sum_good eta >= c1 p / 192 sum_all eta`.
pub fn check_good_to_complete(sums: &RotationSums, eps: f64, c1: f64, p: f64) -> TransferenceCheck {
    let hypothesis = eps <= c1 * p.powi(3) / 48.0;
    let rhs = c1 * p / 192.0 * sums.complete;
    TransferenceCheck { lhs: sums.good, rhs, hypothesis, holds: sums.good >= rhs - SLACK }
}

/// `| S / |S|_F - S0 / |S0|_F |_F` over the stacked point matrices.
pub fn relative_error(sol: &LocationSet, truth: &LocationSet) -> Result<f64> {
    if sol.dim != truth.dim || sol.n_l() != truth.n_l() || sol.n_s() != truth.n_s() {
        return Err(Error::InvalidParameter("solution and truth shapes differ".into()));
    }
    let a = sol.to_flat();
    let b = truth.to_flat();
    let (na, nb) = (norm(&a), norm(&b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(a.iter().zip(&b).map(|(x, y)| (x / na - y / nb).powi(2)).sum::<f64>().sqrt())
}
