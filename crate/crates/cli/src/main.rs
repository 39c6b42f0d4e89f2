//! Command line driver: generate data, compute covariances, screen, solve,
//! validate, benchmark.
//!
//! Exit codes: 0 success (for `solve`, converged; for `validate`, conditions
//! satisfied), 1 validation found violations, 2 solver hit its iteration
//! limit, 3 input or configuration error, 4 numeric failure.

mod bench;

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use jgl::datagen::{gen_dataset, DatagenConfig, DatasetType};
use jgl::io;
use jgl::matrix::{CovarianceSet, SymMatrix};
use jgl::screening::{global_screen, hybrid_screen, local_screen, PartitionFamily};
use jgl::solver::{admm_solve, PenaltyConfig, SolveOptions, SolveReport};
use jgl::validation::{check_necessary, check_sufficient, ConditionReport};
use jgl::Error;

const EXIT_OK: i32 = 0;
const EXIT_VIOLATIONS: i32 = 1;
const EXIT_NOT_CONVERGED: i32 = 2;
const EXIT_INPUT: i32 = 3;
const EXIT_NUMERIC: i32 = 4;

#[derive(Parser)]
#[command(name = "jgl", version, about = "Joint sparse precision estimation across classes")]
struct Cli {
    /// Worker threads for block solves; falls back to JGL_THREADS, then to
    /// all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset: per-class samples, the true precision
    /// matrices, and a provenance document.
    Gen(GenArgs),
    /// Compute empirical covariance files from sample files.
    Cov(CovArgs),
    /// Partition the variables per class from covariances or samples.
    Screen(ScreenArgs),
    /// Estimate the precision matrices.
    Solve(SolveArgs),
    /// Check a partition document against data and optionally a solution.
    Validate(ValidateArgs),
    /// Time the screening modes and the solves they induce over a grid.
    Bench(bench::BenchArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TypeArg {
    A,
    B,
    C,
}

impl From<TypeArg> for DatasetType {
    fn from(t: TypeArg) -> DatasetType {
        match t {
            TypeArg::A => DatasetType::A,
            TypeArg::B => DatasetType::B,
            TypeArg::C => DatasetType::C,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ScreenMode {
    Hybrid,
    Global,
    Local,
    None,
}

impl ScreenMode {
    fn name(self) -> &'static str {
        match self {
            ScreenMode::Hybrid => "hybrid",
            ScreenMode::Global => "global",
            ScreenMode::Local => "local",
            ScreenMode::None => "none",
        }
    }

    fn partition(
        self,
        s: &CovarianceSet,
        lambda1: f64,
        lambda2: f64,
    ) -> jgl::Result<PartitionFamily> {
        match self {
            ScreenMode::Hybrid => hybrid_screen(s, lambda1, lambda2),
            ScreenMode::Global => global_screen(s, lambda1, lambda2),
            ScreenMode::Local => local_screen(s, lambda1),
            ScreenMode::None => Ok(PartitionFamily::single_block(s.dim(), s.num_classes())),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    dataset_type: TypeArg,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    classes: usize,
    /// Off-diagonal magnitude ratio; nonzero precision entries are +-5r.
    #[arg(long)]
    r: f64,
    /// Observations per class, default 5p.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    block_min: usize,
    #[arg(long, default_value_t = 50)]
    block_max: usize,
    /// Variables moved to an adjacent block per class (type c).
    #[arg(long, default_value_t = 2)]
    perturbation: usize,
    /// Within-block fill probability beyond the connecting chain.
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CovArgs {
    /// Sample files, one per class.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory; each input becomes <stem>.cov there.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScreenArgs {
    /// Covariance or sample files, one per class.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda2: f64,
    #[arg(long, value_enum, default_value_t = ScreenMode::Hybrid)]
    mode: ScreenMode,
    /// Partition document path.
    #[arg(long, default_value = "partition.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Covariance or sample files, one per class.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    lambda1: f64,
    #[arg(long)]
    lambda2: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_primal: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_dual: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = ScreenMode::Hybrid)]
    screen: ScreenMode,
    /// Record the objective after every iteration in the report.
    #[arg(long)]
    trace_objective: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Covariance or sample files, one per class.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Partition document to check.
    #[arg(long)]
    partition: PathBuf,
    /// Solution matrix files, one per class; enables the optimality-side
    /// check.
    #[arg(long)]
    solution: Vec<PathBuf>,
    /// Override the penalties recorded in the partition document.
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    zero_tol: f64,
    /// Write the combined report here instead of stdout only.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    // Rust ignores SIGPIPE, turning writes to a closed pipe into panics.
    // Restore the default so `jgl ... | head` dies quietly like any filter.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = setup_threads(cli.threads) {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    let result = match cli.cmd {
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Cov(args) => cmd_cov(args),
        Cmd::Screen(args) => cmd_screen(args),
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::Bench(args) => bench::cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric(_) => EXIT_NUMERIC,
                _ => EXIT_INPUT,
            }
        }
    }
}

fn setup_threads(flag: Option<usize>) -> Result<(), String> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("JGL_THREADS") {
            Ok(v) => Some(
                v.parse::<usize>()
                    .map_err(|_| format!("JGL_THREADS={v:?} is not a thread count"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err("thread count must be positive".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> jgl::Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", dir.display())))
}

fn read_covariances(inputs: &[PathBuf]) -> jgl::Result<CovarianceSet> {
    let mats = inputs
        .iter()
        .map(|path| io::read_data_file(path)?.into_covariance())
        .collect::<jgl::Result<Vec<_>>>()?;
    CovarianceSet::new(mats)
}

fn cmd_gen(args: GenArgs) -> jgl::Result<i32> {
    let mut cfg = DatagenConfig::new(
        args.dataset_type.into(),
        args.p,
        args.classes,
        args.r,
        args.seed,
    );
    cfg.samples_per_class = args.samples;
    cfg.block_size_range = (args.block_min, args.block_max);
    cfg.perturbation = args.perturbation;
    cfg.within_block_density = args.density;
    cfg.validate()?;
    let (truth, samples) = gen_dataset(&cfg)?;
    ensure_dir(&args.out)?;
    for (k, x) in samples.iter().enumerate() {
        io::write_samples(&args.out.join(format!("class_{k}.samples")), x)?;
    }
    for (k, theta) in truth.precisions.iter().enumerate() {
        io::write_matrix(&args.out.join(format!("class_{k}.precision")), theta)?;
    }
    io::write_json(
        &args.out.join("truth.json"),
        &io::TruthDocument::new(&cfg, &truth),
    )?;
    println!(
        "wrote {} classes (p = {}, {} samples each) to {}",
        cfg.classes,
        cfg.p,
        samples[0].n(),
        args.out.display()
    );
    Ok(EXIT_OK)
}

fn cmd_cov(args: CovArgs) -> jgl::Result<i32> {
    // Read everything before writing anything.
    let samples = args
        .inputs
        .iter()
        .map(|path| io::read_samples(path))
        .collect::<jgl::Result<Vec<_>>>()?;
    ensure_dir(&args.out)?;
    for (path, x) in args.inputs.iter().zip(&samples) {
        let stem = path
            .file_stem()
            .ok_or_else(|| Error::InvalidInput(format!("no file name in {}", path.display())))?;
        let mut name = stem.to_os_string();
        name.push(".cov");
        let out_path = args.out.join(name);
        let s = jgl::matrix::empirical_covariance(x)?;
        io::write_matrix(&out_path, &s)?;
        println!(
            "{} -> {} (n = {}, p = {})",
            path.display(),
            out_path.display(),
            x.n(),
            x.dim()
        );
    }
    Ok(EXIT_OK)
}

fn print_family_summary(family: &PartitionFamily) {
    for (k, part) in family.classes().iter().enumerate() {
        let largest = part.components().iter().map(|c| c.len()).max().unwrap();
        println!(
            "class {k}: {} components, largest {largest}, complexity {}",
            part.num_components(),
            part.complexity_estimate()
        );
    }
    println!("total complexity {}", family.complexity_estimate());
}

fn cmd_screen(args: ScreenArgs) -> jgl::Result<i32> {
    let s = read_covariances(&args.inputs)?;
    let family = args.mode.partition(&s, args.lambda1, args.lambda2)?;
    let doc = io::PartitionDocument::new(args.mode.name(), args.lambda1, args.lambda2, &family);
    io::write_json(&args.out, &doc)?;
    println!(
        "mode {} (lambda1 = {}, lambda2 = {})",
        args.mode.name(),
        args.lambda1,
        args.lambda2
    );
    print_family_summary(&family);
    Ok(EXIT_OK)
}

/// Solve artifact: the report plus everything that produced it.
#[derive(Serialize)]
struct RunDocument<'a> {
    mode: &'a str,
    lambda1: f64,
    lambda2: f64,
    rho: f64,
    tol_primal: f64,
    tol_dual: f64,
    max_iter: usize,
    inputs: Vec<String>,
    report: &'a SolveReport,
}

fn cmd_solve(args: SolveArgs) -> jgl::Result<i32> {
    let s = read_covariances(&args.inputs)?;
    let penalty = PenaltyConfig::new(args.lambda1, args.lambda2, args.rho)?;
    let family = args.screen.partition(&s, args.lambda1, args.lambda2)?;
    let mut opts = SolveOptions::new(family);
    opts.tol_primal = args.tol_primal;
    opts.tol_dual = args.tol_dual;
    opts.max_iter = args.max_iter;
    opts.record_objective = args.trace_objective;
    let (solution, report) = admm_solve(&s, &penalty, &opts)?;
    ensure_dir(&args.out)?;
    for (k, y) in solution.iter().enumerate() {
        io::write_matrix(&args.out.join(format!("class_{k}.solution")), y)?;
    }
    let doc = RunDocument {
        mode: args.screen.name(),
        lambda1: args.lambda1,
        lambda2: args.lambda2,
        rho: args.rho,
        tol_primal: args.tol_primal,
        tol_dual: args.tol_dual,
        max_iter: args.max_iter,
        inputs: args.inputs.iter().map(|p| p.display().to_string()).collect(),
        report: &report,
    };
    io::write_json(&args.out.join("report.json"), &doc)?;
    println!(
        "{} in {} iterations, objective {:.6}, theta/y/u seconds {:.3}/{:.3}/{:.3}",
        if report.converged {
            "converged"
        } else {
            "iteration limit"
        },
        report.iterations,
        report.final_objective,
        report.wall_times.theta,
        report.wall_times.y,
        report.wall_times.u,
    );
    Ok(if report.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[derive(Serialize)]
struct ValidationDocument {
    lambda1: f64,
    lambda2: f64,
    zero_tol: f64,
    partition: String,
    sufficient: ConditionReport,
    /// Present when solution files were supplied.
    necessary: Option<ConditionReport>,
}

fn cmd_validate(args: ValidateArgs) -> jgl::Result<i32> {
    let s = read_covariances(&args.inputs)?;
    let doc: io::PartitionDocument = io::read_json(&args.partition)?;
    let family = doc.to_family()?;
    let lambda1 = args.lambda1.unwrap_or(doc.lambda1);
    let lambda2 = args.lambda2.unwrap_or(doc.lambda2);
    let sufficient = check_sufficient(&s, &family, lambda1, lambda2)?;
    let necessary = if args.solution.is_empty() {
        None
    } else {
        if args.solution.len() != s.num_classes() {
            return Err(Error::InvalidInput(format!(
                "{} solution files for {} classes",
                args.solution.len(),
                s.num_classes()
            )));
        }
        let theta = args
            .solution
            .iter()
            .map(|p| io::read_matrix(p))
            .collect::<jgl::Result<Vec<SymMatrix>>>()?;
        Some(check_necessary(
            &s,
            &theta,
            &family,
            lambda1,
            lambda2,
            args.zero_tol,
        )?)
    };
    let all_ok = sufficient.satisfied && necessary.as_ref().is_none_or(|n| n.satisfied);
    let out_doc = ValidationDocument {
        lambda1,
        lambda2,
        zero_tol: args.zero_tol,
        partition: args.partition.display().to_string(),
        sufficient,
        necessary,
    };
    if let Some(path) = &args.out {
        io::write_json(path, &out_doc)?;
    }
    let text = serde_json::to_string_pretty(&out_doc)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize report: {e}")))?;
    println!("{text}");
    Ok(if all_ok { EXIT_OK } else { EXIT_VIOLATIONS })
}
