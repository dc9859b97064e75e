//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use shapefit::{BipartiteGraph, ShapeFitProblem};

pub struct Flat<'a> {
    pub graph: &'a BipartiteGraph,
    pub v: Vec<Vec<f64>>,
    pub d: usize,
    grad_l: Vec<f64>,
}

impl<'a> Flat<'a> {
    pub fn from_problem(prob: &'a ShapeFitProblem) -> Self {
        let v = (0..prob.graph.num_edges()).map(|e| prob.direction(e).to_vec()).collect();
        let mut f = Self { graph: &prob.graph, v, d: prob.dim, grad_l: Vec::new() };
        f.grad_l = f.l_gradient();
        f
    }

    fn t<'b>(&self, x: &'b [f64], i: usize) -> &'b [f64] {
        &x[i * self.d..(i + 1) * self.d]
    }

    fn p<'b>(&self, x: &'b [f64], j: usize) -> &'b [f64] {
        let o = self.graph.n_l() * self.d;
        &x[o + j * self.d..o + (j + 1) * self.d]
    }

    /// Residual block `(I - v v^T)(t_i - p_j)` of edge `e`.
    fn residual(&self, x: &[f64], e: usize) -> Vec<f64> {
        let (i, j) = self.graph.edges()[e];
        let v = &self.v[e];
        let w: Vec<f64> = self.t(x, i).iter().zip(self.p(x, j)).map(|(a, b)| a - b).collect();
        let c: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
        w.iter().zip(v).map(|(a, b)| a - c * b).collect()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        (0..self.v.len()).map(|e| self.residual(x, e).iter().map(|r| r * r).sum::<f64>().sqrt()).sum()
    }

    pub fn l_value(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (e, &(i, j)) in self.graph.edges().iter().enumerate() {
            for k in 0..self.d {
                s += (self.t(x, i)[k] - self.p(x, j)[k]) * self.v[e][k];
            }
        }
        s
    }

    /// Gradient of the scale functional.
    pub fn l_gradient(&self) -> Vec<f64> {
        let nl = self.graph.n_l();
        let mut g = vec![0.0; (nl + self.graph.n_s()) * self.d];
        for (e, &(i, j)) in self.graph.edges().iter().enumerate() {
            for k in 0..self.d {
                g[i * self.d + k] += self.v[e][k];
                g[(nl + j) * self.d + k] -= self.v[e][k];
            }
        }
        g
    }

    /// Removes the common mean of all points.
    pub fn center(&self, x: &mut [f64]) {
        let n = x.len() / self.d;
        for k in 0..self.d {
            let m = (0..n).map(|a| x[a * self.d + k]).sum::<f64>() / n as f64;
            (0..n).for_each(|a| x[a * self.d + k] -= m);
        }
    }

    /// Projection onto `{L = 1, centroid = 0}` in two orthogonal steps: the
    /// gradient of `L` sums to zero over points, so centering and shifting
    /// along it commute.
    pub fn project(&self, x: &mut [f64]) {
        self.center(x);
        let g = &self.grad_l;
        let gg: f64 = g.iter().map(|a| a * a).sum();
        let c = (self.l_value(x) - 1.0) / gg;
        x.iter_mut().zip(g).for_each(|(a, b)| *a -= c * b);
    }

    /// Tangent-space projection of a direction.
    pub fn project_direction(&self, h: &mut [f64]) {
        self.center(h);
        let g = &self.grad_l;
        let gg: f64 = g.iter().map(|a| a * a).sum();
        let c = h.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / gg;
        h.iter_mut().zip(g).for_each(|(a, b)| *a -= c * b);
    }

    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let nl = self.graph.n_l();
        let mut g = vec![0.0; x.len()];
        for (e, &(i, j)) in self.graph.edges().iter().enumerate() {
            let r = self.residual(x, e);
            let n = r.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n > 0.0 {
                for k in 0..self.d {
                    g[i * self.d + k] += r[k] / n;
                    g[(nl + j) * self.d + k] -= r[k] / n;
                }
            }
        }
        g
    }
}

/// Projected subgradient from the feasible point nearest the origin, with
/// normalized steps decaying geometrically by twelve orders of magnitude.
/// Returns the best objective value seen and its point.
pub fn subgradient_oracle(f: &Flat, iters: usize) -> (f64, Vec<f64>) {
    let n = (f.graph.n_l() + f.graph.n_s()) * f.d;
    let mut x = vec![0.0; n];
    f.project(&mut x);
    let mut best = (f.objective(&x), x.clone());
    let scale = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let final_ratio: f64 = 1e-12;
    let rho = final_ratio.powf(1.0 / iters as f64);
    let mut step = 0.1 * scale;
    for _ in 0..iters {
        let mut g = f.subgradient(&x);
        f.project_direction(&mut g);
        let gn = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        if gn == 0.0 {
            break;
        }
        x.iter_mut().zip(&g).for_each(|(a, b)| *a -= step * b / gn);
        f.project(&mut x);
        let val = f.objective(&x);
        if val < best.0 {
            best = (val, x.clone());
        }
        step *= rho;
    }
    best
}

/// Checks that `classes` partitions the edges of `g` into at most `Δ`
/// matchings.
pub fn is_valid_matching_decomposition(g: &BipartiteGraph, classes: &[Vec<(usize, usize)>]) -> Result<(), String> {
    let mut seen: Vec<(usize, usize)> = classes.iter().flatten().copied().collect();
    seen.sort_unstable();
    if seen != g.edges() {
        return Err("classes do not partition the edge set".into());
    }
    if classes.len() > g.max_degree() {
        return Err(format!("{} classes for max degree {}", classes.len(), g.max_degree()));
    }
    for c in classes {
        let mut l: Vec<usize> = c.iter().map(|e| e.0).collect();
        let mut s: Vec<usize> = c.iter().map(|e| e.1).collect();
        l.sort_unstable();
        s.sort_unstable();
        if l.windows(2).any(|w| w[0] == w[1]) || s.windows(2).any(|w| w[0] == w[1]) {
            return Err("class shares a vertex".into());
        }
    }
    Ok(())
}

/// Every bipartite graph on `n_l x n_s` vertices, by edge subset.
pub fn all_graphs(n_l: usize, n_s: usize) -> impl Iterator<Item = BipartiteGraph> {
    let slots: Vec<(usize, usize)> = (0..n_l).flat_map(|i| (0..n_s).map(move |j| (i, j))).collect();
    (0u32..1 << slots.len()).map(move |mask| {
        let edges = slots.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, e)| *e).collect();
        BipartiteGraph::new(n_l, n_s, edges).unwrap()
    })
}

/// Prints one line per criterion and panics on failure.
pub fn report(name: &str, pass: bool, detail: String) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name} failed: {detail}");
}
