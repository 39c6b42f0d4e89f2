//! Benchmark harness: for every dataset cell in a grid, run the requested
//! screening modes on identical data, solve under each resulting partition,
//! and report wall times, iteration counts, complexity estimates, and
//! hybrid-versus-other ratios. Failures are recorded per cell and the grid
//! keeps going.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use jgl::datagen::{gen_dataset, DatagenConfig, DatasetType};
use jgl::io;
use jgl::matrix::{empirical_covariance, CovarianceSet};
use jgl::screening::refines;
use jgl::solver::{admm_solve, PenaltyConfig, SolveOptions};

use crate::{ensure_dir, ScreenMode, TypeArg, EXIT_OK};

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![TypeArg::C])]
    types: Vec<TypeArg>,
    #[arg(long = "p-list", value_delimiter = ',', default_values_t = vec![100])]
    p_list: Vec<usize>,
    #[arg(long = "k-list", value_delimiter = ',', default_values_t = vec![2])]
    k_list: Vec<usize>,
    /// Penalty grid, comma-separated lambda1:lambda2 pairs.
    #[arg(long, value_delimiter = ',', default_value = "0.02:0.01")]
    lambdas: Vec<String>,
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = vec![ScreenMode::Hybrid, ScreenMode::Global, ScreenMode::Local])]
    modes: Vec<ScreenMode>,
    /// Timed repetitions per measurement; the median is reported.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the per-type default magnitude ratio.
    #[arg(long)]
    r: Option<f64>,
    /// Observations per class, default 5p.
    #[arg(long)]
    samples: Option<usize>,
    /// Fixed-iteration regime: run exactly this many iterations per solve
    /// instead of solving to tolerance.
    #[arg(long)]
    iter_cap: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    tol_primal: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_dual: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Run dataset cells concurrently. Timings then measure contention, not
    /// isolated performance.
    #[arg(long)]
    parallel_cells: bool,
    #[arg(long, default_value = "bench")]
    out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
struct Cell {
    dataset_type: String,
    p: usize,
    classes: usize,
    samples_per_class: usize,
    data_seed: u64,
    lambda1: f64,
    lambda2: f64,
    mode: String,
    screen_seconds: Option<f64>,
    solve_seconds: Option<f64>,
    iterations: Option<usize>,
    converged: Option<bool>,
    final_objective: Option<f64>,
    complexity_total: Option<u64>,
    components_per_class: Option<Vec<usize>>,
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct Comparison {
    dataset_type: String,
    p: usize,
    classes: usize,
    lambda1: f64,
    lambda2: f64,
    /// Hybrid quantity divided by the other mode's; below one means the
    /// hybrid screen won.
    time_ratio_vs_global: Option<f64>,
    time_ratio_vs_local: Option<f64>,
    complexity_ratio_vs_global: Option<f64>,
    complexity_ratio_vs_local: Option<f64>,
}

#[derive(Serialize)]
struct BenchDocument {
    seed: u64,
    reps: usize,
    iter_cap: Option<usize>,
    tol_primal: f64,
    tol_dual: f64,
    rho: f64,
    max_iter: usize,
    modes: Vec<String>,
    cells: Vec<Cell>,
    comparisons: Vec<Comparison>,
}

fn parse_lambda_pair(text: &str) -> jgl::Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 2 {
        return Err(jgl::Error::Config(format!(
            "penalty pair {text:?} is not of the form lambda1:lambda2"
        )));
    }
    let l1 = parts[0]
        .parse::<f64>()
        .map_err(|_| jgl::Error::Config(format!("bad lambda1 in {text:?}")))?;
    let l2 = parts[1]
        .parse::<f64>()
        .map_err(|_| jgl::Error::Config(format!("bad lambda2 in {text:?}")))?;
    Ok((l1, l2))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn default_r(ty: DatasetType) -> f64 {
    match ty {
        DatasetType::A => 0.005,
        DatasetType::B | DatasetType::C => 0.0066,
    }
}

struct ModeOutcome {
    cell: Cell,
    solve_seconds: Option<f64>,
    complexity: Option<u64>,
    family: Option<jgl::screening::PartitionFamily>,
}

fn run_mode(
    s: &CovarianceSet,
    mode: ScreenMode,
    lambda1: f64,
    lambda2: f64,
    args: &BenchArgs,
    base: &Cell,
) -> ModeOutcome {
    let mut cell = Cell {
        mode: mode.name().to_string(),
        lambda1,
        lambda2,
        ..base.clone()
    };
    let mut screen_times = Vec::with_capacity(args.reps);
    let mut family = None;
    for _ in 0..args.reps {
        let mark = Instant::now();
        match mode.partition(s, lambda1, lambda2) {
            Ok(f) => {
                screen_times.push(mark.elapsed().as_secs_f64());
                family = Some(f);
            }
            Err(e) => {
                cell.error = Some(format!("screen: {e}"));
                return ModeOutcome {
                    cell,
                    solve_seconds: None,
                    complexity: None,
                    family: None,
                };
            }
        }
    }
    let family = family.unwrap();
    cell.screen_seconds = Some(median(screen_times));
    cell.complexity_total = Some(family.complexity_estimate());
    cell.components_per_class = Some(
        family
            .classes()
            .iter()
            .map(|p| p.num_components())
            .collect(),
    );

    let complexity = cell.complexity_total;
    let penalty = match PenaltyConfig::new(lambda1, lambda2, args.rho) {
        Ok(p) => p,
        Err(e) => {
            cell.error = Some(format!("penalty: {e}"));
            return ModeOutcome {
                cell,
                solve_seconds: None,
                complexity,
                family: Some(family),
            };
        }
    };
    let mut opts = SolveOptions::new(family.clone());
    opts.tol_primal = args.tol_primal;
    opts.tol_dual = args.tol_dual;
    opts.max_iter = args.iter_cap.unwrap_or(args.max_iter);
    let mut solve_times = Vec::with_capacity(args.reps);
    let mut last = None;
    for _ in 0..args.reps {
        match admm_solve(s, &penalty, &opts) {
            Ok((_, report)) => {
                solve_times.push(report.wall_times.total);
                last = Some(report);
            }
            Err(e) => {
                cell.error = Some(format!("solve: {e}"));
                return ModeOutcome {
                    cell,
                    solve_seconds: None,
                    complexity,
                    family: Some(family),
                };
            }
        }
    }
    let report = last.unwrap();
    let seconds = median(solve_times);
    cell.solve_seconds = Some(seconds);
    cell.iterations = Some(report.iterations);
    cell.converged = Some(report.converged);
    cell.final_objective = Some(report.final_objective);
    ModeOutcome {
        cell,
        solve_seconds: Some(seconds),
        complexity,
        family: Some(family),
    }
}

fn run_dataset_cell(
    args: &BenchArgs,
    ty: DatasetType,
    p: usize,
    classes: usize,
    data_seed: u64,
    pairs: &[(f64, f64)],
) -> (Vec<Cell>, Vec<Comparison>) {
    let mut cfg = DatagenConfig::new(ty, p, classes, args.r.unwrap_or(default_r(ty)), data_seed);
    cfg.samples_per_class = args.samples;
    let base = Cell {
        dataset_type: ty.to_string(),
        p,
        classes,
        samples_per_class: args.samples.unwrap_or(5 * p),
        data_seed,
        lambda1: 0.0,
        lambda2: 0.0,
        mode: String::new(),
        screen_seconds: None,
        solve_seconds: None,
        iterations: None,
        converged: None,
        final_objective: None,
        complexity_total: None,
        components_per_class: None,
        error: None,
    };
    let s = match gen_dataset(&cfg).and_then(|(_, samples)| {
        CovarianceSet::new(
            samples
                .iter()
                .map(empirical_covariance)
                .collect::<jgl::Result<Vec<_>>>()?,
        )
    }) {
        Ok(s) => s,
        Err(e) => {
            // One error row per requested measurement keeps the grid shape.
            let cells = pairs
                .iter()
                .flat_map(|&(l1, l2)| {
                    args.modes.iter().map(move |m| (l1, l2, *m))
                })
                .map(|(l1, l2, m)| Cell {
                    lambda1: l1,
                    lambda2: l2,
                    mode: m.name().to_string(),
                    error: Some(format!("datagen: {e}")),
                    ..base.clone()
                })
                .collect();
            return (cells, Vec::new());
        }
    };
    let mut cells = Vec::new();
    let mut comparisons = Vec::new();
    for &(l1, l2) in pairs {
        let mut hybrid: Option<ModeOutcome> = None;
        let mut global: Option<ModeOutcome> = None;
        let mut local: Option<ModeOutcome> = None;
        for &mode in &args.modes {
            let outcome = run_mode(&s, mode, l1, l2, args, &base);
            println!(
                "type {} p={p} K={classes} lambda=({l1}, {l2}) {:<6} screen {} solve {} complexity {} {}",
                ty,
                outcome.cell.mode,
                outcome
                    .cell
                    .screen_seconds
                    .map_or("-".into(), |t| format!("{t:.4}s")),
                outcome
                    .cell
                    .solve_seconds
                    .map_or("-".into(), |t| format!("{t:.3}s")),
                outcome
                    .cell
                    .complexity_total
                    .map_or("-".into(), |c| c.to_string()),
                outcome.cell.error.as_deref().unwrap_or(""),
            );
            cells.push(outcome.cell.clone());
            match mode {
                ScreenMode::Hybrid => hybrid = Some(outcome),
                ScreenMode::Global => global = Some(outcome),
                ScreenMode::Local => local = Some(outcome),
                ScreenMode::None => {}
            }
        }
        if let Some(h) = &hybrid {
            let mut cmp = Comparison {
                dataset_type: ty.to_string(),
                p,
                classes,
                lambda1: l1,
                lambda2: l2,
                time_ratio_vs_global: None,
                time_ratio_vs_local: None,
                complexity_ratio_vs_global: None,
                complexity_ratio_vs_local: None,
            };
            for (other, time_slot, cx_slot) in [
                (&global, 0usize, 0usize),
                (&local, 1, 1),
            ] {
                let Some(o) = other else { continue };
                // The hybrid partition refines the others class by class;
                // a failure here is a library bug worth surfacing loudly.
                if let (Some(hf), Some(of)) = (&h.family, &o.family) {
                    for k in 0..hf.num_classes() {
                        let ok = refines(hf.class(k), of.class(k)).unwrap_or(false)
                            && hf.class(k).complexity_estimate()
                                <= of.class(k).complexity_estimate();
                        if !ok {
                            eprintln!(
                                "warning: refinement check failed against {} in class {k} \
                                 (type {ty}, p {p}, K {classes}, lambda ({l1}, {l2}))",
                                o.cell.mode
                            );
                        }
                    }
                }
                let time_ratio = match (h.solve_seconds, o.solve_seconds) {
                    (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                    _ => None,
                };
                let cx_ratio = match (h.complexity, o.complexity) {
                    (Some(a), Some(b)) if b > 0 => Some(a as f64 / b as f64),
                    _ => None,
                };
                if time_slot == 0 && cx_slot == 0 {
                    cmp.time_ratio_vs_global = time_ratio;
                    cmp.complexity_ratio_vs_global = cx_ratio;
                } else {
                    cmp.time_ratio_vs_local = time_ratio;
                    cmp.complexity_ratio_vs_local = cx_ratio;
                }
            }
            comparisons.push(cmp);
        }
    }
    (cells, comparisons)
}

pub fn cmd_bench(args: BenchArgs) -> jgl::Result<i32> {
    if args.reps == 0 {
        return Err(jgl::Error::Config("reps must be at least 1".into()));
    }
    if args.types.is_empty()
        || args.p_list.is_empty()
        || args.k_list.is_empty()
        || args.lambdas.is_empty()
        || args.modes.is_empty()
    {
        return Err(jgl::Error::Config("empty grid axis".into()));
    }
    let pairs = args
        .lambdas
        .iter()
        .map(|t| parse_lambda_pair(t))
        .collect::<jgl::Result<Vec<_>>>()?;
    let grid: Vec<(DatasetType, usize, usize, u64)> = {
        let mut g = Vec::new();
        for &ty in &args.types {
            for &p in &args.p_list {
                for &classes in &args.k_list {
                    let idx = g.len() as u64;
                    g.push((ty.into(), p, classes, args.seed.wrapping_add(idx)));
                }
            }
        }
        g
    };
    if args.parallel_cells {
        eprintln!("warning: cells run concurrently; timings include contention");
    }
    let run = |&(ty, p, classes, data_seed): &(DatasetType, usize, usize, u64)| {
        run_dataset_cell(&args, ty, p, classes, data_seed, &pairs)
    };
    let results: Vec<(Vec<Cell>, Vec<Comparison>)> = if args.parallel_cells {
        grid.par_iter().map(run).collect()
    } else {
        grid.iter().map(run).collect()
    };
    let mut cells = Vec::new();
    let mut comparisons = Vec::new();
    for (c, m) in results {
        cells.extend(c);
        comparisons.extend(m);
    }
    let failures = cells.iter().filter(|c| c.error.is_some()).count();
    let doc = BenchDocument {
        seed: args.seed,
        reps: args.reps,
        iter_cap: args.iter_cap,
        tol_primal: args.tol_primal,
        tol_dual: args.tol_dual,
        rho: args.rho,
        max_iter: args.max_iter,
        modes: args.modes.iter().map(|m| m.name().to_string()).collect(),
        cells,
        comparisons,
    };
    ensure_dir(&args.out)?;
    let path = args.out.join("bench.json");
    io::write_json(&path, &doc)?;
    println!(
        "wrote {} ({} measurements, {failures} failed)",
        path.display(),
        doc.cells.len()
    );
    Ok(EXIT_OK)
}
