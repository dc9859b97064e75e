//! First-order solver for the ShapeFit program.
//!
//! The objective `sum_e |A_e x|` with `A_e x = P_{v_e^⊥}(t_i - p_j)` is
//! handled through its conjugate (projection of each dual block onto the unit
//! ball) and the two affine constraints through exact Euclidean projection,
//! which gives a primal–dual hybrid gradient iteration
//!
//! ```text
//! y+ = Proj_ball(y + sigma A x_bar)
//! x+ = Proj_C(x - tau A^T y+)
//! x_bar = 2 x+ - x
//! ```
//!
//! with `tau sigma |A|^2 < 1`.

mod affine;
mod operator;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LocationSet;
use crate::graph::BipartiteGraph;
use crate::linalg::{dot, norm};
use crate::observations::ObservationSet;

use affine::AffineProjector;

pub use affine::MAX_GRAM_CONDITION;
pub use operator::EdgeOperator;

/// Observation graph with one unit direction per edge. Corruption labels are
/// deliberately absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFitProblem {
    pub graph: BipartiteGraph,
    /// Edge directions, flattened in canonical edge order.
    v: Vec<f64>,
    pub dim: usize,
}

impl ShapeFitProblem {
    pub fn new(graph: BipartiteGraph, v: &[Vec<f64>], dim: usize) -> Result<Self> {
        if graph.num_edges() == 0 {
            return Err(Error::EmptyGraph);
        }
        if v.len() != graph.num_edges() {
            return Err(Error::InvalidParameter(format!(
                "{} observations for {} edges",
                v.len(),
                graph.num_edges()
            )));
        }
        let mut flat = Vec::with_capacity(dim * v.len());
        for vec in v {
            if vec.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: vec.len() });
            }
            if (norm(vec) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter("observations must be unit vectors".into()));
            }
            flat.extend_from_slice(vec);
        }
        Ok(Self { graph, v: flat, dim })
    }

    /// Builds the program from observations, ignoring `bad_edges`.
    pub fn from_observations(obs: &ObservationSet) -> Result<Self> {
        Self::new(obs.graph.clone(), &obs.v, obs.dim())
    }

    pub fn primal_len(&self) -> usize {
        self.dim * (self.graph.n_l() + self.graph.n_s())
    }

    pub fn direction(&self, e: usize) -> &[f64] {
        &self.v[e * self.dim..(e + 1) * self.dim]
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.primal_len() {
            return Err(Error::DimensionMismatch { expected: self.primal_len(), got: x.len() });
        }
        Ok(())
    }

    fn edge_diff<'x>(&self, x: &'x [f64], i: usize, j: usize) -> impl Iterator<Item = f64> + 'x {
        let d = self.dim;
        let off = d * self.graph.n_l();
        x[i * d..(i + 1) * d].iter().zip(&x[off + j * d..off + (j + 1) * d]).map(|(a, b)| a - b)
    }
}

/// `R(x) = sum_{ij in E} |P_{v_ij^⊥}(t_i - p_j)|`.
pub fn objective_r(x: &[f64], prob: &ShapeFitProblem) -> Result<f64> {
    prob.check_len(x)?;
    let mut total = 0.0;
    for (e, &(i, j)) in prob.graph.edges().iter().enumerate() {
        let w: Vec<f64> = prob.edge_diff(x, i, j).collect();
        total += norm(&crate::linalg::reject_unit(&w, prob.direction(e)));
    }
    Ok(total)
}

/// `L(x) = sum_{ij in E} <t_i - p_j, v_ij>`.
pub fn constraint_l(x: &[f64], prob: &ShapeFitProblem) -> Result<f64> {
    prob.check_len(x)?;
    Ok(prob
        .graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(i, j))| prob.edge_diff(x, i, j).zip(prob.direction(e)).map(|(a, b)| a * b).sum::<f64>())
        .sum())
}

/// Mean of all `n_l + n_s` points of a stacked vector.
pub fn centroid(x: &[f64], prob: &ShapeFitProblem) -> Result<Vec<f64>> {
    prob.check_len(x)?;
    let mut c = vec![0.0; prob.dim];
    for pt in x.chunks(prob.dim) {
        crate::linalg::axpy(1.0, pt, &mut c);
    }
    let n = (prob.graph.n_l() + prob.graph.n_s()) as f64;
    c.iter_mut().for_each(|v| *v /= n);
    Ok(c)
}

/// `max(|L(x) - 1|, |centroid(x)|)`.
pub fn constraint_violation(x: &[f64], prob: &ShapeFitProblem) -> Result<f64> {
    Ok((constraint_l(x, prob)? - 1.0).abs().max(norm(&centroid(x, prob)?)))
}

/// Closest point to `x` with `L = 1` and zero centroid.
pub fn project_affine(x: &[f64], prob: &ShapeFitProblem) -> Result<Vec<f64>> {
    prob.check_len(x)?;
    let proj = AffineProjector::new(prob, 1.0)?;
    let mut out = x.to_vec();
    proj.project_in_place(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub tol_feas: f64,
    pub tol_gap: f64,
    /// Seeds the power-iteration start vector.
    pub seed: u64,
    pub power_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iter: 50_000, tol_feas: 1e-9, tol_gap: 1e-7, seed: 0, power_iters: 100 }
    }
}


#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Stacked `t` then `p`, in the units of the `L = 1` program.
    pub x: Vec<f64>,
    /// Dual blocks, one `dim`-vector per edge, each in the unit ball.
    pub y: Vec<f64>,
    pub tau: f64,
    pub sigma_step: f64,
    pub op_norm: f64,
    pub iter: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub constraint_violation: f64,
    pub objective: f64,
    /// `R(x) - <y, A x>`, non-negative for any dual-feasible `y`.
    pub gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub locations: LocationSet,
    pub state: SolverState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub constraint_violation: f64,
    pub gap: f64,
}

/// On-disk form of a solve result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub t: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub objective: f64,
    pub iters: usize,
    pub converged: bool,
    pub residuals: Residuals,
}

impl From<&Solution> for SolutionReport {
    fn from(s: &Solution) -> Self {
        Self {
            t: s.locations.t.clone(),
            p: s.locations.p.clone(),
            objective: s.state.objective,
            iters: s.state.iter,
            converged: s.state.converged,
            residuals: Residuals {
                primal: s.state.primal_residual,
                dual: s.state.dual_residual,
                constraint_violation: s.state.constraint_violation,
                gap: s.state.gap,
            },
        }
    }
}

fn project_balls(y: &mut [f64], d: usize) {
    for block in y.chunks_mut(d) {
        let n = norm(block);
        if n > 1.0 {
            block.iter_mut().for_each(|v| *v /= n);
        }
    }
}

/// Solves the ShapeFit program.
///
/// Internally the scale constraint is `L = s` with
/// `s = |grad L| sqrt(|E|)`, which puts the primal iterate on the same scale
/// as the dual one (`|y| <= sqrt(|E|)`); the result is divided by `s` and
/// projected onto the `L = 1` constraint set before returning. Residuals are
/// reported per `sqrt(|E|)` in the internal scaling.
///
/// Refuses disconnected graphs, whose minimizer is not unique. Hitting
/// `max_iter` is not an error; check `state.converged`.
pub fn solve(prob: &ShapeFitProblem, opts: &SolveOptions) -> Result<Solution> {
    if !prob.graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let d = prob.dim;
    let n = prob.primal_len();
    let m = d * prob.graph.num_edges();
    let op = EdgeOperator::new(prob);

    let unit = AffineProjector::new(prob, 1.0)?;
    let grad_l = unit.l_normal_norm();
    let edges_sqrt = (prob.graph.num_edges() as f64).sqrt();
    let scale = grad_l * edges_sqrt;
    let proj = AffineProjector::new(prob, scale)?;

    let op_norm = op.norm_estimate(opts.power_iters, opts.seed);
    let tau = 0.95 / op_norm;
    let sigma = 0.95 / op_norm;

    let mut x = vec![0.0; n];
    proj.project_in_place(&mut x);
    let mut y = vec![0.0; m];
    let mut ax = vec![0.0; m];
    op.apply(&x, &mut ax);
    let mut ax_bar = ax.clone();

    let mut x_next = vec![0.0; n];
    let mut y_next = vec![0.0; m];
    let mut aty = vec![0.0; n];
    let mut ax_next = vec![0.0; m];

    let mut primal_residual = f64::INFINITY;
    let mut dual_residual = f64::INFINITY;
    let mut converged = false;
    let mut iter = 0;

    while iter < opts.max_iter {
        iter += 1;
        for k in 0..m {
            y_next[k] = y[k] + sigma * ax_bar[k];
        }
        project_balls(&mut y_next, d);
        op.adjoint(&y_next, &mut aty);
        for k in 0..n {
            x_next[k] = x[k] - tau * aty[k];
        }
        proj.project_in_place(&mut x_next);
        op.apply(&x_next, &mut ax_next);

        // x-step optimality: (x - x+)/tau ∈ A^T y+ + N_C(x+)
        let mut pr = 0.0;
        for k in 0..n {
            pr += (x[k] - x_next[k]).powi(2);
        }
        primal_residual = pr.sqrt() / tau / edges_sqrt;
        // y-step optimality: (y - y+)/sigma + A(x_bar - x+) ∈ ∂f*(y+) - A x+
        let mut dr = 0.0;
        for k in 0..m {
            dr += ((y[k] - y_next[k]) / sigma + ax_bar[k] - ax_next[k]).powi(2);
        }
        dual_residual = dr.sqrt() / edges_sqrt;

        for k in 0..m {
            ax_bar[k] = 2.0 * ax_next[k] - ax[k];
        }
        std::mem::swap(&mut x, &mut x_next);
        std::mem::swap(&mut y, &mut y_next);
        std::mem::swap(&mut ax, &mut ax_next);

        if primal_residual.max(dual_residual) <= opts.tol_gap {
            converged = true;
            break;
        }
    }

    let mut x_out: Vec<f64> = x.iter().map(|v| v / scale).collect();
    unit.project_in_place(&mut x_out);
    let objective = objective_r(&x_out, prob)?;
    let mut a_out = vec![0.0; m];
    op.apply(&x_out, &mut a_out);
    let gap = objective - dot(&y, &a_out);
    let violation = constraint_violation(&x_out, prob)?;
    converged &= violation <= opts.tol_feas;

    let locations = LocationSet::from_flat(d, prob.graph.n_l(), prob.graph.n_s(), &x_out)?;
    Ok(Solution {
        locations,
        state: SolverState {
            x: x_out,
            y,
            tau,
            sigma_step: sigma,
            op_norm,
            iter,
            primal_residual,
            dual_residual,
            constraint_violation: violation,
            objective,
            gap,
            converged,
        },
    })
}
