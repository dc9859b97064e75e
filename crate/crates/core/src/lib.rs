//! Bipartite ShapeFit.
//!
//! Recovers camera locations `T` and structure points `P` in `R^d`, up to a
//! global translation and positive scale, from pairwise direction
//! observations `v_ij ≈ (t_i - p_j) / |t_i - p_j|` on a bipartite graph, a
//! fraction of which may be arbitrarily corrupted. Recovery solves the convex
//! program
//!
//! ```text
//! minimize    sum_{ij in E} | P_{v_ij^⊥} (t_i - p_j) |
//! subject to  sum_{ij in E} <t_i - p_j, v_ij> = 1,   sum_i t_i + sum_j p_j = 0
//! ```
//!
//! The crate also ships instance generators, verifiers for the deterministic
//! recovery conditions (graph typicality and geometric constants), numerical
//! checkers for the rigidity and C4 inequalities, and an experiment harness
//! that sweeps corruption probability and noise.

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod observations;
pub mod rng;
pub mod solver;

pub use analysis::{
    check_c4_inequality, check_conditions, check_rigidity_lemma, epsilon_bound, relative_error,
    ConditionReport, RigidityCheck,
};
pub use error::{Error, Result};
pub use geometry::{
    beta_constant, decompose_deformation, direction, pairwise_ratio_c0, project_orthogonal,
    well_distributed_constant, DeformationDecomposition, LocationSet,
};
pub use graph::{check_typicality, matching_decomposition, sample_er, BipartiteGraph, TypicalityReport};
pub use observations::{
    observe_adversarial, observe_random, AdversarialStrategy, Instance, ObservationModel,
    ObservationSet,
};
pub use solver::{solve, ShapeFitProblem, SolveOptions, Solution, SolverState};
