use crate::linalg::{dot, norm};
use crate::rng::{self, tag};

use super::ShapeFitProblem;

/// `A x = (P_{v_e^⊥}(t_i - p_j))_{e = ij}`, applied edge by edge.
pub struct EdgeOperator<'a> {
    prob: &'a ShapeFitProblem,
    p_offset: usize,
}

impl<'a> EdgeOperator<'a> {
    pub fn new(prob: &'a ShapeFitProblem) -> Self {
        Self { prob, p_offset: prob.dim * prob.graph.n_l() }
    }

    pub fn primal_len(&self) -> usize {
        self.prob.primal_len()
    }

    pub fn dual_len(&self) -> usize {
        self.prob.dim * self.prob.graph.num_edges()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let d = self.prob.dim;
        for (e, &(i, j)) in self.prob.graph.edges().iter().enumerate() {
            let v = &self.prob.v[e * d..(e + 1) * d];
            let ti = &x[i * d..(i + 1) * d];
            let pj = &x[self.p_offset + j * d..self.p_offset + (j + 1) * d];
            let mut c = 0.0;
            for k in 0..d {
                c += (ti[k] - pj[k]) * v[k];
            }
            let o = &mut out[e * d..(e + 1) * d];
            for k in 0..d {
                o[k] = ti[k] - pj[k] - c * v[k];
            }
        }
    }

    /// `A^T y`: each block's rejection from `v_e` is added to `t_i` and
    /// subtracted from `p_j`.
    pub fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        let d = self.prob.dim;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (e, &(i, j)) in self.prob.graph.edges().iter().enumerate() {
            let v = &self.prob.v[e * d..(e + 1) * d];
            let ye = &y[e * d..(e + 1) * d];
            let c = dot(ye, v);
            for k in 0..d {
                let z = ye[k] - c * v[k];
                out[i * d + k] += z;
                out[self.p_offset + j * d + k] -= z;
            }
        }
    }

    /// Estimate of `|A|` from `iters` power iterations on `A^T A`.
    pub fn norm_estimate(&self, iters: usize, seed: u64) -> f64 {
        let mut rng = rng::stream(seed, tag::SAMPLE, 0x0a);
        let mut x = rng::gaussian_vec(&mut rng, self.primal_len());
        let mut ax = vec![0.0; self.dual_len()];
        let mut atax = vec![0.0; self.primal_len()];
        let mut lambda = 0.0;
        for _ in 0..iters {
            let n = norm(&x);
            if n == 0.0 {
                return 0.0;
            }
            x.iter_mut().for_each(|v| *v /= n);
            self.apply(&x, &mut ax);
            self.adjoint(&ax, &mut atax);
            lambda = dot(&x, &atax);
            std::mem::swap(&mut x, &mut atax);
        }
        lambda.max(0.0).sqrt()
    }
}
