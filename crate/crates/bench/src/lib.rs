//! Fixtures shared by the criterion benchmarks.

use shapefit::{observe_random, LocationSet, ObservationSet, ShapeFitProblem};

/// A connected instance with `n` points per side, `p = 0.5`, in `R^3`.
pub fn fixture(n: usize, q: f64, seed: u64) -> (LocationSet, ObservationSet, ShapeFitProblem) {
    let ls = LocationSet::gaussian(n, n, 3, seed);
    let g = shapefit::harness::connected_er(n, n, 0.5, seed).expect("connected graph");
    let obs = observe_random(&ls, &g, q, 0.0, seed).expect("observations");
    let prob = ShapeFitProblem::from_observations(&obs).expect("problem");
    (ls, obs, prob)
}
