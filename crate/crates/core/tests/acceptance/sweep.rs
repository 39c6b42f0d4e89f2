//! Fixtures built once and shared across criteria: a fifty-instance solve
//! sweep spanning penalty regimes, and one large blocky instance screened
//! three ways at three penalty pairs.

use std::sync::OnceLock;
use std::time::Instant;

use jgl::datagen::{gen_dataset, DatagenConfig, DatasetType};
use jgl::matrix::{empirical_covariance, CovarianceSet, SymMatrix};
use jgl::screening::{global_screen, hybrid_screen, local_screen, PartitionFamily};
use jgl::solver::{admm_solve, kkt_residual, objective, PenaltyConfig, SolveOptions};

pub const SWEEP_COUNT: usize = 50;

pub struct Instance {
    pub s: CovarianceSet,
    pub lambda1: f64,
    pub lambda2: f64,
    pub hybrid: PartitionFamily,
    pub theta_plain: Vec<SymMatrix>,
    pub theta_screened: Vec<SymMatrix>,
    pub obj_plain: f64,
    pub obj_screened: f64,
    pub kkt_plain: f64,
}

pub struct Sweep {
    pub instances: Vec<Instance>,
    pub build_seconds: f64,
}

static SWEEP: OnceLock<Sweep> = OnceLock::new();

pub fn solve_sweep() -> &'static Sweep {
    SWEEP.get_or_init(build_sweep)
}

/// Empirical covariances of a freshly generated dataset.
pub fn covariances(cfg: &DatagenConfig) -> CovarianceSet {
    let (_, samples) = gen_dataset(cfg).expect("generate dataset");
    let mats = samples
        .iter()
        .map(|x| empirical_covariance(x).expect("covariance"))
        .collect();
    CovarianceSet::new(mats).expect("covariance set")
}

fn sweep_config(i: usize) -> (DatagenConfig, f64, f64) {
    let dataset_type = [DatasetType::A, DatasetType::B, DatasetType::C][i % 3];
    let r = if dataset_type == DatasetType::A {
        0.005
    } else {
        0.0066
    };
    let p = 10 + (i * 7) % 21;
    let classes = 2 + (i / 3) % 3;
    let mut cfg = DatagenConfig::new(dataset_type, p, classes, r, 1000 + i as u64);
    cfg.block_size_range = (3, 8);
    // All fifteen penalty combinations appear, zeros included.
    let lambda1 = [0.0, 0.01, 0.03, 0.08, 0.2][i % 5];
    let lambda2 = [0.0, 0.01, 0.05][(i / 5) % 3];
    (cfg, lambda1, lambda2)
}

fn solve_under(
    s: &CovarianceSet,
    lambda1: f64,
    lambda2: f64,
    family: PartitionFamily,
    what: &str,
    i: usize,
) -> Vec<SymMatrix> {
    let penalty = PenaltyConfig::new(lambda1, lambda2, 1.0).expect("penalty");
    let mut opts = SolveOptions::new(family);
    opts.tol_primal = 1e-9;
    opts.tol_dual = 1e-9;
    opts.max_iter = 50_000;
    let (theta, report) = admm_solve(s, &penalty, &opts)
        .unwrap_or_else(|e| panic!("instance {i}: {what} solve failed: {e}"));
    assert!(
        report.converged,
        "instance {i}: {what} solve hit the iteration limit"
    );
    theta
}

fn build_sweep() -> Sweep {
    let start = Instant::now();
    let instances = (0..SWEEP_COUNT)
        .map(|i| {
            let (cfg, lambda1, lambda2) = sweep_config(i);
            let s = covariances(&cfg);
            let hybrid = hybrid_screen(&s, lambda1, lambda2).expect("hybrid screen");
            let plain = PartitionFamily::single_block(s.dim(), s.num_classes());
            let theta_plain = solve_under(&s, lambda1, lambda2, plain, "unscreened", i);
            let theta_screened =
                solve_under(&s, lambda1, lambda2, hybrid.clone(), "screened", i);
            let penalty = PenaltyConfig::new(lambda1, lambda2, 1.0).unwrap();
            let obj_plain = objective(&s, &theta_plain, &penalty).expect("objective");
            let obj_screened = objective(&s, &theta_screened, &penalty).expect("objective");
            let kkt_plain = kkt_residual(&s, &theta_plain, &penalty).expect("residual");
            Instance {
                s,
                lambda1,
                lambda2,
                hybrid,
                theta_plain,
                theta_screened,
                obj_plain,
                obj_screened,
                kkt_plain,
            }
        })
        .collect();
    Sweep {
        instances,
        build_seconds: start.elapsed().as_secs_f64(),
    }
}

pub struct BlockyCell {
    pub lambda1: f64,
    pub lambda2: f64,
    pub hybrid: PartitionFamily,
    pub global: PartitionFamily,
    pub local: PartitionFamily,
}

pub struct Blocky {
    pub cells: Vec<BlockyCell>,
}

static BLOCKY: OnceLock<Blocky> = OnceLock::new();

/// Type C, p = 500, six classes, screened at three penalty pairs chosen
/// inside the band where per-class graphs thin out while the pooled rule
/// still binds.
pub fn blocky_screens() -> &'static Blocky {
    BLOCKY.get_or_init(|| {
        let cfg = DatagenConfig::new(DatasetType::C, 500, 6, 0.0066, 42);
        let s = covariances(&cfg);
        let cells = [(0.011, 0.002), (0.012, 0.002), (0.013, 0.003)]
            .iter()
            .map(|&(lambda1, lambda2)| BlockyCell {
                lambda1,
                lambda2,
                hybrid: hybrid_screen(&s, lambda1, lambda2).expect("hybrid screen"),
                global: global_screen(&s, lambda1, lambda2).expect("global screen"),
                local: local_screen(&s, lambda1).expect("local screen"),
            })
            .collect();
        Blocky { cells }
    })
}
