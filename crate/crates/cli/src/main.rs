use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use shapefit::analysis::ConditionOptions;
use shapefit::harness::{
    self, emit_heatmap, emit_noise_plot, with_threads, write_csv, CellResult, ExperimentConfig, TrialStatus,
};
use shapefit::observations::{observe_adversarial, observe_random, AdversarialStrategy, Instance};
use shapefit::solver::{solve, ShapeFitProblem, SolutionReport};
use shapefit::{check_conditions, relative_error, LocationSet};

const THREADS_ENV: &str = "SHAPEFIT_THREADS";

#[derive(Parser)]
#[command(name = "shapefit", version, about = "Joint location recovery from corrupted bipartite direction observations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files. Without it, results go to stdout.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads. SHAPEFIT_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Random,
    Consistent,
}

#[derive(Subcommand)]
enum Command {
    /// Sample ground truth, graph and observations; write an instance file.
    Generate(GenerateArgs),
    /// Solve an instance file.
    Solve {
        instance: PathBuf,
    },
    /// Evaluate the recovery conditions on an instance with ground truth.
    Check(CheckArgs),
    /// Mean error over the (n_total, q) grid.
    PhaseGrid,
    /// Median error against the noise level.
    NoiseSweep,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 25)]
    n_l: usize,
    #[arg(long, default_value_t = 25)]
    n_s: usize,
    /// Defaults to the configuration's value.
    #[arg(long)]
    dim: Option<usize>,
    /// Edge probability; defaults to the configuration's value.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    q: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Use the adversarial model with this per-vertex bad fraction instead
    /// of random corruption.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum, default_value_t = Strategy::Random)]
    strategy: Strategy,
}

#[derive(Args)]
struct CheckArgs {
    instance: PathBuf,
    /// Edge probability used for the typicality bounds.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Estimate well-distributedness for every (i, j) pair.
    #[arg(long)]
    all_pairs: bool,
    #[arg(long, default_value_t = 5)]
    wd_trials: usize,
    /// Sample this many quadruples instead of the exhaustive beta sweep.
    #[arg(long)]
    beta_samples: Option<usize>,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let common = &cli.common;
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => match cli.command {
            Command::NoiseSweep => ExperimentConfig::noise_sweep(),
            _ => ExperimentConfig::phase_grid(),
        },
    };
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    let threads = thread_count(common.threads)?;
    if let Some(dir) = &common.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    match &cli.command {
        Command::Generate(args) => generate(common, &cfg, args),
        Command::Solve { instance } => solve_instance(common, &cfg, instance),
        Command::Check(args) => check(common, &cfg, args),
        Command::PhaseGrid => experiment(common, &cfg, threads, "phase_grid", false),
        Command::NoiseSweep => experiment(common, &cfg, threads, "noise_sweep", true),
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return v.trim().parse().with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"));
    }
    Ok(flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

fn emit(common: &Common, file: &str, contents: &str) -> Result<()> {
    match &common.out_dir {
        Some(dir) => {
            let path = dir.join(file);
            std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn generate(common: &Common, cfg: &ExperimentConfig, a: &GenerateArgs) -> Result<Outcome> {
    if let Some(f) = common.format.filter(|f| *f != Format::Json) {
        bail!("generate only writes json, not {}", format_name(f));
    }
    let seed = cfg.base_seed;
    let dim = a.dim.unwrap_or(cfg.dim);
    let p = a.p.unwrap_or(cfg.p);
    let ls = LocationSet::gaussian(a.n_l, a.n_s, dim, seed);
    let g = harness::connected_er(a.n_l, a.n_s, p, seed)?;
    let observations = match a.gamma {
        Some(gamma) => {
            let strategy = match a.strategy {
                Strategy::Random => AdversarialStrategy::Random,
                Strategy::Consistent => AdversarialStrategy::Consistent,
            };
            observe_adversarial(&ls, &g, gamma, strategy, seed)?
        }
        None => observe_random(&ls, &g, a.q, a.sigma, seed)?,
    };
    let inst = Instance { location_set: Some(ls), observations };
    emit(common, "instance.json", &(inst.to_json()? + "\n"))?;
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct SolveOutput {
    #[serde(flatten)]
    report: SolutionReport,
    relative_error: Option<f64>,
}

fn solve_instance(common: &Common, cfg: &ExperimentConfig, path: &Path) -> Result<Outcome> {
    let inst = Instance::read(path).with_context(|| format!("reading {}", path.display()))?;
    let prob = ShapeFitProblem::from_observations(&inst.observations)?;
    let sol = solve(&prob, &shapefit::SolveOptions { seed: cfg.base_seed, ..cfg.solver })?;
    let rel = inst.location_set.as_ref().map(|t| relative_error(&sol.locations, t)).transpose()?;
    let out = SolveOutput { report: SolutionReport::from(&sol), relative_error: rel };
    match common.format.unwrap_or(Format::Json) {
        Format::Json => emit(common, "solution.json", &(serde_json::to_string_pretty(&out)? + "\n"))?,
        Format::Csv => emit(common, "solution.csv", &locations_csv(&sol.locations))?,
        Format::Svg => bail!("solve writes json or csv"),
    }
    eprintln!(
        "objective {:.9e}, {} iterations, {}{}",
        out.report.objective,
        out.report.iters,
        if out.report.converged { "converged" } else { "NOT converged" },
        rel.map(|r| format!(", relative error {r:.3e}")).unwrap_or_default()
    );
    Ok(if sol.state.converged { Outcome::Ok } else { Outcome::NotConverged })
}

fn locations_csv(ls: &LocationSet) -> String {
    let mut s = String::from("side,index");
    for k in 0..ls.dim {
        s.push_str(&format!(",x{k}"));
    }
    s.push('\n');
    for (side, pts) in [("t", &ls.t), ("p", &ls.p)] {
        for (i, v) in pts.iter().enumerate() {
            s.push_str(&format!("{side},{i}"));
            for x in v {
                s.push_str(&format!(",{x}"));
            }
            s.push('\n');
        }
    }
    s
}

fn check(common: &Common, cfg: &ExperimentConfig, a: &CheckArgs) -> Result<Outcome> {
    let inst = Instance::read(&a.instance).with_context(|| format!("reading {}", a.instance.display()))?;
    let Some(truth) = &inst.location_set else {
        bail!("{} has no ground-truth location set", a.instance.display());
    };
    let opts = ConditionOptions {
        wd_trials: a.wd_trials,
        wd_pairs: if a.all_pairs { None } else { ConditionOptions::default().wd_pairs },
        beta_samples: a.beta_samples,
        seed: cfg.base_seed,
    };
    let report = check_conditions(truth, &inst.observations.graph, &inst.observations, a.p, &opts)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(dir) = &common.out_dir {
        std::fs::write(dir.join("conditions.json"), &json)?;
    }
    print!("{json}");
    println!();
    print!("{}", report.to_table());
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct ExperimentOutput<'a> {
    config: &'a ExperimentConfig,
    /// How the default grid spacing was chosen when no config was given.
    grid_note: &'static str,
    cells: &'a [CellResult],
}

const GRID_NOTE: &str = "default grids: n_total in steps of 10, q in steps of 0.05, sigma at half-decades";

fn experiment(common: &Common, cfg: &ExperimentConfig, threads: usize, name: &str, sweep: bool) -> Result<Outcome> {
    cfg.validate()?;
    let cells = with_threads(threads, || if sweep { harness::run_noise_sweep(cfg) } else { harness::run_phase_grid(cfg) })??;
    let format = common.format.unwrap_or(Format::Csv);
    let out = ExperimentOutput { config: cfg, grid_note: GRID_NOTE, cells: &cells };

    match (&common.out_dir, format) {
        (Some(dir), Format::Csv) => write_csv(&cells, &dir.join(format!("{name}.csv")))?,
        (Some(dir), Format::Svg) if sweep => emit_noise_plot(&cells, &dir.join(format!("{name}.svg")))?,
        (Some(dir), Format::Svg) => emit_heatmap(&cells, &dir.join(format!("{name}.svg")))?,
        (_, Format::Json) => emit(common, &format!("{name}.json"), &(serde_json::to_string_pretty(&out)? + "\n"))?,
        (None, Format::Csv) => harness::write_csv_to(&cells, std::io::stdout().lock())?,
        (None, Format::Svg) => bail!("svg output needs --out-dir"),
    }
    if let Some(dir) = &common.out_dir {
        let meta = serde_json::json!({ "config": cfg, "grid_note": GRID_NOTE, "threads": threads });
        std::fs::write(dir.join(format!("{name}.meta.json")), serde_json::to_string_pretty(&meta)? + "\n")?;
    }

    for c in &cells {
        let flags = c.trials.iter().filter(|t| t.status != TrialStatus::Converged).count();
        eprintln!(
            "n_total={:<3} q={:<5} sigma={:<8e} {}={:.3e}{}",
            c.n_total,
            c.q,
            c.sigma,
            c.aggregation.name(),
            c.aggregate,
            if flags > 0 { format!("  ({flags} flagged)") } else { String::new() }
        );
    }
    let not_converged = cells.iter().any(|c| !c.all_converged());
    Ok(if not_converged { Outcome::NotConverged } else { Outcome::Ok })
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
        Format::Svg => "svg",
    }
}
