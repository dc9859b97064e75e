//! Experiment orchestration: the corruption/size phase grid and the noise
//! sweep, with CSV and SVG output.
//!
//! Every trial derives its seed from `(base_seed, n_total, q, sigma, trial)`
//! so any cell can be re-run in isolation and thread scheduling never
//! affects results.

mod output;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::relative_error;
use crate::error::{Error, Result};
use crate::geometry::LocationSet;
use crate::graph::{sample_er, BipartiteGraph};
use crate::observations::observe_random;
use crate::rng::derive_seed;
use crate::solver::{solve, ShapeFitProblem, SolveOptions};

pub use output::{emit_heatmap, emit_noise_plot, gray_level, heatmap_svg, noise_plot_svg, write_csv, write_csv_to};

/// Error assigned to a trial whose pipeline failed. It is the largest value
/// the relative error can take.
pub const FAILED_TRIAL_ERROR: f64 = 2.0;

/// Graph draws attempted per trial before giving up on a connected sample.
pub const MAX_GRAPH_ATTEMPTS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    Median,
}

impl Aggregation {
    pub fn apply(self, values: &[f64]) -> f64 {
        if values.is_empty() {
            return FAILED_TRIAL_ERROR;
        }
        match self {
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Median => {
                let mut v = values.to_vec();
                v.sort_by(f64::total_cmp);
                let m = v.len() / 2;
                if v.len() % 2 == 1 {
                    v[m]
                } else {
                    0.5 * (v[m - 1] + v[m])
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Median => "median",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub p: f64,
    /// Total point counts; each cell uses `n_l = n_total / 2`,
    /// `n_s = n_total - n_l`.
    pub n_values: Vec<usize>,
    pub q_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub aggregation: Aggregation,
    pub solver: SolveOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::phase_grid()
    }
}

impl ExperimentConfig {
    /// Corruption/size grid: `n_total` 10..=70 step 10, `q` 0..=0.5 step
    /// 0.05, noiseless, mean over 10 trials.
    pub fn phase_grid() -> Self {
        Self {
            dim: 3,
            p: 0.5,
            n_values: (1..=7).map(|k| 10 * k).collect(),
            q_values: (0..=10).map(|k| k as f64 * 0.05).collect(),
            sigma_values: vec![0.0],
            trials: 10,
            base_seed: 0,
            aggregation: Aggregation::Mean,
            solver: SolveOptions::default(),
        }
    }

    /// Noise sweep: `n_l = n_s = 25`, `q = 0.1`, a noiseless control and
    /// `sigma` at half-decade steps over `[1e-6, 1]`, median over 10 trials.
    pub fn noise_sweep() -> Self {
        let mut sigma_values = vec![0.0];
        sigma_values.extend(log_grid(1e-6, 1.0, 2));
        Self {
            n_values: vec![50],
            q_values: vec![0.1],
            sigma_values,
            aggregation: Aggregation::Median,
            ..Self::phase_grid()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p = {} outside [0, 1]", self.p));
        }
        if let Some(q) = self.q_values.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return bad(format!("q = {q} outside [0, 1]"));
        }
        if let Some(s) = self.sigma_values.iter().find(|s| s.is_nan() || **s < 0.0) {
            return bad(format!("sigma = {s} must be non-negative"));
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n < 2) {
            return bad(format!("n_total = {n} must be at least 2"));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        Ok(())
    }
}

/// `per_decade + 1` points per decade, log-spaced from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let steps = ((b - a) * per_decade as f64).round() as usize;
    (0..=steps).map(|k| 10f64.powf(a + (b - a) * k as f64 / steps.max(1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Converged,
    NotConverged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    /// [`FAILED_TRIAL_ERROR`] when the pipeline failed.
    pub relative_error: f64,
    pub status: TrialStatus,
    pub iters: usize,
    pub message: Option<String>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n_total: usize,
    pub q: f64,
    pub sigma: f64,
    pub aggregation: Aggregation,
    pub aggregate: f64,
    pub trials: Vec<TrialResult>,
    pub wall_ms: f64,
}

impl CellResult {
    pub fn errors(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.relative_error).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.trials.iter().all(|t| t.status == TrialStatus::Converged)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub n_total: usize,
    pub q: f64,
    pub sigma: f64,
}

/// Seed of one trial, a pure function of the cell key.
pub fn trial_seed(base_seed: u64, key: CellKey, trial: usize) -> u64 {
    derive_seed(&[base_seed, key.n_total as u64, key.q.to_bits(), key.sigma.to_bits(), trial as u64])
}

/// One generated problem: centered Gaussian ground truth, a connected ER
/// graph (redrawn from derived seeds until connected) and random-corruption
/// observations.
pub fn generate_instance(
    dim: usize,
    n_total: usize,
    p: f64,
    q: f64,
    sigma: f64,
    seed: u64,
) -> Result<(LocationSet, crate::observations::ObservationSet)> {
    let n_l = n_total / 2;
    let n_s = n_total - n_l;
    let ls = LocationSet::gaussian(n_l, n_s, dim, seed);
    let g = connected_er(n_l, n_s, p, seed)?;
    let obs = observe_random(&ls, &g, q, sigma, seed)?;
    Ok((ls, obs))
}

pub fn connected_er(n_l: usize, n_s: usize, p: f64, seed: u64) -> Result<BipartiteGraph> {
    for attempt in 0..MAX_GRAPH_ATTEMPTS {
        let g = sample_er(n_l, n_s, p, derive_seed(&[seed, attempt]))?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::DisconnectedGraph)
}

/// Generates, solves and scores a single trial. Never fails: errors are
/// recorded in the result.
pub fn run_trial(cfg: &ExperimentConfig, key: CellKey, trial: usize) -> TrialResult {
    let seed = trial_seed(cfg.base_seed, key, trial);
    let start = Instant::now();
    let outcome = (|| {
        let (truth, obs) = generate_instance(cfg.dim, key.n_total, cfg.p, key.q, key.sigma, seed)?;
        let prob = ShapeFitProblem::from_observations(&obs)?;
        let sol = solve(&prob, &SolveOptions { seed, ..cfg.solver })?;
        let err = relative_error(&sol.locations, &truth)?;
        Ok::<_, Error>((err, sol.state.converged, sol.state.iter))
    })();
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok((err, converged, iters)) => TrialResult {
            trial,
            seed,
            relative_error: err,
            status: if converged { TrialStatus::Converged } else { TrialStatus::NotConverged },
            iters,
            message: None,
            wall_ms,
        },
        Err(e) => TrialResult {
            trial,
            seed,
            relative_error: FAILED_TRIAL_ERROR,
            status: TrialStatus::Failed,
            iters: 0,
            message: Some(e.to_string()),
            wall_ms,
        },
    }
}

/// Runs one cell: its trials in order, on the calling thread.
pub fn run_cell(cfg: &ExperimentConfig, key: CellKey) -> CellResult {
    let trials: Vec<TrialResult> = (0..cfg.trials).map(|t| run_trial(cfg, key, t)).collect();
    let errors: Vec<f64> = trials.iter().map(|t| t.relative_error).collect();
    CellResult {
        n_total: key.n_total,
        q: key.q,
        sigma: key.sigma,
        aggregation: cfg.aggregation,
        aggregate: cfg.aggregation.apply(&errors),
        wall_ms: trials.iter().map(|t| t.wall_ms).sum(),
        trials,
    }
}

/// Runs cells in parallel on the current rayon pool; results come back in
/// key order.
pub fn run_cells(cfg: &ExperimentConfig, keys: &[CellKey]) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    Ok(keys.par_iter().map(|&k| run_cell(cfg, k)).collect())
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Phase grid over `n_values x q_values` (and any extra `sigma_values`),
/// `n` outermost.
pub fn run_phase_grid(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    run_cells(cfg, &grid_keys(cfg, false))
}

/// Noise sweep over `sigma_values` (and any extra `n`/`q` values), `sigma`
/// outermost.
pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    run_cells(cfg, &grid_keys(cfg, true))
}

pub fn grid_keys(cfg: &ExperimentConfig, sigma_outer: bool) -> Vec<CellKey> {
    let mut keys = Vec::new();
    if sigma_outer {
        for &sigma in &cfg.sigma_values {
            for &n_total in &cfg.n_values {
                for &q in &cfg.q_values {
                    keys.push(CellKey { n_total, q, sigma });
                }
            }
        }
    } else {
        for &n_total in &cfg.n_values {
            for &q in &cfg.q_values {
                for &sigma in &cfg.sigma_values {
                    keys.push(CellKey { n_total, q, sigma });
                }
            }
        }
    }
    keys
}

/// Least-squares slope of `log10(err)` against `log10(sigma)` over cells
/// with `lo <= sigma <= hi`.
pub fn log_log_slope(cells: &[CellResult], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.sigma >= lo && c.sigma <= hi && c.aggregate > 0.0)
        .map(|c| (c.sigma.log10(), c.aggregate.log10()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
