//! Synthetic ground truth generators and the Gaussian sampler.
//!
//! Three designs are supported. Type A scatters independent sparse
//! off-diagonal entries per class. Type B draws one shared block-diagonal
//! layout and fills the blocks per class. Type C starts from the shared
//! layout and moves a few variables into adjacent blocks per class, so the
//! class partitions agree almost but not quite.
//!
//! Every generated precision matrix has 5.0 on the diagonal and off-diagonal
//! entries in {0, -5r, +5r}. The bound on r keeps the matrices diagonally
//! dominant, hence positive definite, for any placement the generators can
//! produce.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sym_eigen, SampleMatrix, SymMatrix};
use crate::screening::{Partition, PartitionFamily};

pub const DIAGONAL_VALUE: f64 = 5.0;
/// Fraction of off-diagonal pairs made nonzero by the type A design.
pub const TYPE_A_NONZERO_FRACTION: f64 = 0.03;
/// Exclusive upper bounds on the magnitude ratio r.
pub const TYPE_A_R_BOUND: f64 = 0.0061;
pub const TYPE_BC_R_BOUND: f64 = 0.0067;

/// Offset added to the base seed for the class k sampling stream; the
/// structure streams use seed + 1 + k, so the two families never collide.
const SAMPLE_SEED_STRIDE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetType {
    A,
    B,
    C,
}

impl std::fmt::Display for DatasetType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetType::A => write!(f, "a"),
            DatasetType::B => write!(f, "b"),
            DatasetType::C => write!(f, "c"),
        }
    }
}

impl std::str::FromStr for DatasetType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(DatasetType::A),
            "b" => Ok(DatasetType::B),
            "c" => Ok(DatasetType::C),
            other => Err(Error::Config(format!(
                "unknown dataset type {other:?}, expected a, b, or c"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatagenConfig {
    pub dataset_type: DatasetType,
    pub p: usize,
    pub classes: usize,
    /// Off-diagonal magnitude ratio: nonzero entries are +-5r.
    pub r: f64,
    /// Observations drawn per class; defaults to 5p.
    pub samples_per_class: Option<usize>,
    pub seed: u64,
    /// Inclusive bounds on block sizes for types B and C.
    pub block_size_range: (usize, usize),
    /// Variables moved to an adjacent block per class, type C only.
    pub perturbation: usize,
    /// Probability of each non-chain within-block pair being nonzero.
    pub within_block_density: f64,
}

impl DatagenConfig {
    pub fn new(dataset_type: DatasetType, p: usize, classes: usize, r: f64, seed: u64) -> Self {
        DatagenConfig {
            dataset_type,
            p,
            classes,
            r,
            samples_per_class: None,
            seed,
            block_size_range: (10, 50),
            perturbation: 2,
            within_block_density: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::Config(format!("p must be at least 2, got {}", self.p)));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!(
                "at least 2 classes required, got {}",
                self.classes
            )));
        }
        let r_bound = match self.dataset_type {
            DatasetType::A => TYPE_A_R_BOUND,
            DatasetType::B | DatasetType::C => TYPE_BC_R_BOUND,
        };
        if !self.r.is_finite() || self.r <= 0.0 || self.r >= r_bound {
            return Err(Error::Config(format!(
                "r must lie in (0, {r_bound}) for dataset type {}, got {}",
                self.dataset_type, self.r
            )));
        }
        if self.samples_per_class == Some(0) {
            return Err(Error::Config("samples_per_class must be positive".into()));
        }
        if matches!(self.dataset_type, DatasetType::B | DatasetType::C) {
            let (lo, hi) = self.block_size_range;
            if lo < 1 || lo > hi {
                return Err(Error::Config(format!(
                    "block size range ({lo}, {hi}) is not a valid interval"
                )));
            }
            if lo > self.p {
                return Err(Error::Config(format!(
                    "minimum block size {lo} exceeds p = {}",
                    self.p
                )));
            }
        }
        if self.dataset_type == DatasetType::C && self.perturbation > self.p {
            return Err(Error::Config(format!(
                "cannot move {} variables out of {}",
                self.perturbation, self.p
            )));
        }
        if !(0.0..=1.0).contains(&self.within_block_density) {
            return Err(Error::Config(format!(
                "within_block_density must lie in [0, 1], got {}",
                self.within_block_density
            )));
        }
        Ok(())
    }

    fn samples(&self) -> usize {
        self.samples_per_class.unwrap_or(5 * self.p)
    }
}

/// Generated precision matrices with the structure they were built from.
/// Types B and C carry the per-class block layout and the shared base it
/// was derived from; type A has no block structure.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub precisions: Vec<SymMatrix>,
    pub block_structure: Option<PartitionFamily>,
    pub base_partition: Option<Partition>,
    pub seed: u64,
}

/// Enumeration order of the strict upper triangle: pair index t maps to the
/// t-th pair (i, j), i < j, scanned row by row.
fn decode_pair(mut t: usize, p: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = p - 1 - i;
        if t < row {
            return (i, i + 1 + t);
        }
        t -= row;
        i += 1;
    }
}

fn signed_magnitude(rng: &mut ChaCha12Rng, r: f64) -> f64 {
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    sign * DIAGONAL_VALUE * r
}

fn gen_type_a(cfg: &DatagenConfig) -> GroundTruth {
    let p = cfg.p;
    let pairs = p * (p - 1) / 2;
    // Exact-count placement: the realized nonzero fraction equals the
    // target up to rounding, for every seed.
    let count = (TYPE_A_NONZERO_FRACTION * pairs as f64).round() as usize;
    let precisions = (0..cfg.classes)
        .map(|k| {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(1 + k as u64));
            let mut m = SymMatrix::from_diagonal(&vec![DIAGONAL_VALUE; p]);
            let chosen = rand::seq::index::sample(&mut rng, pairs, count);
            for t in chosen.iter() {
                let (i, j) = decode_pair(t, p);
                m.set(i, j, signed_magnitude(&mut rng, cfg.r));
            }
            m
        })
        .collect();
    GroundTruth {
        precisions,
        block_structure: None,
        base_partition: None,
        seed: cfg.seed,
    }
}

/// Contiguous block sizes covering p. Draws from the configured range while
/// more than a full block remains; the final block takes whatever is left,
/// which may fall below the minimum.
fn draw_block_sizes(rng: &mut ChaCha12Rng, p: usize, lo: usize, hi: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut rem = p;
    while rem > 0 {
        if rem <= hi {
            sizes.push(rem);
            break;
        }
        let s = rng.random_range(lo..=hi);
        sizes.push(s);
        rem -= s;
    }
    sizes
}

/// Fills the principal submatrix on `members` with a connected sparse
/// pattern: consecutive members are always linked, remaining pairs are
/// linked with the configured density. The chain keeps each block one
/// component regardless of the density draws.
fn fill_block(
    m: &mut SymMatrix,
    members: &[usize],
    rng: &mut ChaCha12Rng,
    r: f64,
    density: f64,
) {
    for w in members.windows(2) {
        m.set(w[0], w[1], signed_magnitude(rng, r));
    }
    for (a, &i) in members.iter().enumerate() {
        for &j in members.iter().skip(a + 2) {
            if rng.random_bool(density) {
                m.set(i, j, signed_magnitude(rng, r));
            }
        }
    }
}

fn gen_blocky(cfg: &DatagenConfig) -> GroundTruth {
    let p = cfg.p;
    let (lo, hi) = cfg.block_size_range;
    let mut shared_rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let sizes = draw_block_sizes(&mut shared_rng, p, lo, hi);
    let mut base_components = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in &sizes {
        base_components.push((start..start + s).collect::<Vec<usize>>());
        start += s;
    }
    let base = Partition::from_components(base_components.clone(), p).unwrap();
    let num_blocks = base_components.len();

    let mut precisions = Vec::with_capacity(cfg.classes);
    let mut class_partitions = Vec::with_capacity(cfg.classes);
    for k in 0..cfg.classes {
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(1 + k as u64));
        // Block membership per variable, starting from the shared layout.
        let mut block_of: Vec<usize> = base.assignment().to_vec();
        if cfg.dataset_type == DatasetType::C && num_blocks > 1 {
            let moved = rand::seq::index::sample(&mut rng, p, cfg.perturbation.min(p));
            for v in moved.iter() {
                // Adjacency refers to the variable's block in the shared
                // layout, not wherever earlier moves put it.
                let b = base.assignment()[v];
                let target = if b == 0 {
                    1
                } else if b == num_blocks - 1 {
                    num_blocks - 2
                } else if rng.random_bool(0.5) {
                    b - 1
                } else {
                    b + 1
                };
                block_of[v] = target;
            }
        }
        let mut members_of: Vec<Vec<usize>> = vec![Vec::new(); num_blocks];
        for (v, &b) in block_of.iter().enumerate() {
            members_of[b].push(v);
        }
        let mut m = SymMatrix::from_diagonal(&vec![DIAGONAL_VALUE; p]);
        for members in members_of.iter().filter(|ms| !ms.is_empty()) {
            fill_block(&mut m, members, &mut rng, cfg.r, cfg.within_block_density);
        }
        precisions.push(m);
        let components: Vec<Vec<usize>> =
            members_of.into_iter().filter(|ms| !ms.is_empty()).collect();
        class_partitions.push(Partition::from_components(components, p).unwrap());
    }
    GroundTruth {
        precisions,
        block_structure: Some(PartitionFamily::new(class_partitions).unwrap()),
        base_partition: Some(base),
        seed: cfg.seed,
    }
}

/// Builds the per-class precision matrices for the configured design.
/// Deterministic in the seed: class k's structure comes from an independent
/// stream seeded with seed + 1 + k, the shared layout from the seed itself.
pub fn gen_precisions(cfg: &DatagenConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    Ok(match cfg.dataset_type {
        DatasetType::A => gen_type_a(cfg),
        DatasetType::B | DatasetType::C => gen_blocky(cfg),
    })
}

/// Draws n observations from the zero-mean Gaussian whose precision matrix
/// is `theta`. Standard normals are generated row by row and mapped through
/// Q D^{-1/2}, where theta = Q D Q^T.
pub fn sample_gaussian(theta: &SymMatrix, n: usize, seed: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidInput("cannot draw zero samples".into()));
    }
    let p = theta.dim();
    let eig = sym_eigen(theta)?;
    let min_eig = eig.eigenvalues[0];
    if min_eig <= 0.0 {
        return Err(Error::Numeric(format!(
            "precision matrix is not positive definite (min eigenvalue {min_eig:.3e})"
        )));
    }
    // Rows of L^T scale eigenvector columns by 1/sqrt(d); x = L z then has
    // covariance Q D^{-1} Q^T = theta^{-1}.
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut data = vec![0.0; n * p];
    let mut z = vec![0.0; p];
    let inv_sqrt: Vec<f64> = eig.eigenvalues.iter().map(|d| 1.0 / d.sqrt()).collect();
    for t in 0..n {
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        let row = &mut data[t * p..(t + 1) * p];
        for (j, w) in inv_sqrt.iter().enumerate() {
            let c = w * z[j];
            for (i, out) in row.iter_mut().enumerate() {
                *out += eig.vector_entry(i, j) * c;
            }
        }
    }
    Ok(SampleMatrix::from_parts(n, p, data))
}

/// Ground truth plus one sample matrix per class. Class k samples use the
/// stream seeded with seed + 2^32 + k.
pub fn gen_dataset(cfg: &DatagenConfig) -> Result<(GroundTruth, Vec<SampleMatrix>)> {
    let truth = gen_precisions(cfg)?;
    let n = cfg.samples();
    let samples = truth
        .precisions
        .iter()
        .enumerate()
        .map(|(k, theta)| {
            sample_gaussian(
                theta,
                n,
                cfg.seed.wrapping_add(SAMPLE_SEED_STRIDE).wrapping_add(k as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((truth, samples))
}
