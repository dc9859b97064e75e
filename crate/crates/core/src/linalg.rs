//! Small dense vector helpers on `&[f64]`.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `w - <w, v> v` for a unit vector `v`.
pub fn reject_unit(w: &[f64], v: &[f64]) -> Vec<f64> {
    let c = dot(w, v);
    w.iter().zip(v).map(|(wi, vi)| wi - c * vi).collect()
}

/// Orthonormal basis of `span(vectors)` by modified Gram-Schmidt with
/// reorthogonalization. A candidate is dropped when its residual norm falls
/// below `rel_tol` times the largest input norm.
pub fn orthonormal_basis(vectors: &[&[f64]], rel_tol: f64) -> Vec<Vec<f64>> {
    let max_norm = vectors.iter().map(|v| norm(v)).fold(0.0, f64::max);
    if max_norm == 0.0 {
        return Vec::new();
    }
    let tol = rel_tol * max_norm;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut r = v.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&r, q);
                axpy(-c, q, &mut r);
            }
        }
        let n = norm(&r);
        if n > tol {
            r.iter_mut().for_each(|x| *x /= n);
            basis.push(r);
        }
    }
    basis
}

/// Removes the components of `h` along an orthonormal `basis`.
pub fn reject_basis(h: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut r = h.to_vec();
    for q in basis {
        let c = dot(&r, q);
        axpy(-c, q, &mut r);
    }
    r
}

/// `|P_{span(basis)^⊥} h|` for an orthonormal basis, without allocating.
pub fn reject_norm(h: &[f64], basis: &[Vec<f64>]) -> f64 {
    let along: f64 = basis.iter().map(|q| dot(h, q).powi(2)).sum();
    (norm_sq(h) - along).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_drops_dependent_and_zero_vectors() {
        let a = [1.0, 0.0, 0.0];
        let b = [2.0, 0.0, 0.0];
        let z = [0.0, 0.0, 0.0];
        let c = [1.0, 1.0, 0.0];
        let q = orthonormal_basis(&[&a, &b, &z, &c], 1e-10);
        assert_eq!(q.len(), 2);
        assert!(dot(&q[0], &q[1]).abs() < 1e-15);
    }

    #[test]
    fn reject_norm_matches_explicit_projection() {
        let q = orthonormal_basis(&[&[1.0, 2.0, 0.0, 1.0], &[0.0, 1.0, 1.0, 0.0]], 1e-10);
        let h = [0.3, -1.0, 2.0, 0.5];
        let r = reject_basis(&h, &q);
        assert!((norm(&r) - reject_norm(&h, &q)).abs() < 1e-14);
    }
}
