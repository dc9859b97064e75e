use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::ShapeFitProblem;

/// Largest admissible condition number of the constraint Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Euclidean projection onto `{x : L(x) = target, sum of all points = 0}`.
///
/// With constraint normals `N` (rows: the gradient of `L`, then one row per
/// coordinate of the point sum), the projection is
/// `x - N^T (N N^T)^{-1} (N x - b)`.
pub(crate) struct AffineProjector {
    normals: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    gram: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl AffineProjector {
    pub fn new(prob: &ShapeFitProblem, target: f64) -> Result<Self> {
        let d = prob.dim;
        let n = prob.primal_len();
        let n_pts = prob.graph.n_l() + prob.graph.n_s();
        let mut normals = vec![vec![0.0; n]; d + 1];
        let p_off = d * prob.graph.n_l();
        for (e, &(i, j)) in prob.graph.edges().iter().enumerate() {
            for k in 0..d {
                let v = prob.v[e * d + k];
                normals[0][i * d + k] += v;
                normals[0][p_off + j * d + k] -= v;
            }
        }
        for k in 0..d {
            for pt in 0..n_pts {
                normals[1 + k][pt * d + k] = 1.0;
            }
        }
        let m = d + 1;
        let gram = DMatrix::from_fn(m, m, |a, b| crate::linalg::dot(&normals[a], &normals[b]));
        let eig = gram.clone().symmetric_eigen();
        let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if cond > MAX_GRAM_CONDITION {
            return Err(Error::RankDeficient(cond));
        }
        let gram = gram.cholesky().ok_or(Error::RankDeficient(cond))?;
        let mut rhs = vec![0.0; m];
        rhs[0] = target;
        Ok(Self { normals, rhs, gram })
    }

    /// Norm of the gradient of `L`.
    pub fn l_normal_norm(&self) -> f64 {
        crate::linalg::norm(&self.normals[0])
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.normals
            .iter()
            .zip(&self.rhs)
            .map(|(nrm, b)| crate::linalg::dot(nrm, x) - b)
            .collect()
    }

    pub fn project_in_place(&self, x: &mut [f64]) {
        // two passes remove the rounding left by the first
        for _ in 0..2 {
            let r = DVector::from_vec(self.residual(x));
            let lambda = self.gram.solve(&r);
            for (nrm, l) in self.normals.iter().zip(lambda.iter()) {
                crate::linalg::axpy(-l, nrm, x);
            }
        }
    }
}
