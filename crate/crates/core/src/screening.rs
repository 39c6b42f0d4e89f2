//! Covariance screening: decides from the sample covariances alone which
//! variable pairs can be zero in every class's solution, and turns the
//! surviving connectivity into per-class variable partitions. The solver then
//! works block by block instead of on the full p x p problem.
//!
//! Three screens are provided. `local_screen` thresholds each class on its
//! own and ignores the group penalty, `global_screen` pools all classes into
//! one shared partition, and `hybrid_screen` combines both rules and then
//! repairs the per-class partitions until they are mutually consistent. The
//! hybrid result refines the other two, so its blocks are never larger.

use crate::error::{Error, Result};
use crate::matrix::CovarianceSet;
use crate::union_find::UnionFind;

/// Symmetric boolean connectivity pattern. Packed like `SymMatrix`; the
/// diagonal is fixed true and writes to it are rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatrix {
    p: usize,
    bits: Vec<bool>,
}

impl IndicatorMatrix {
    /// All pairs connected.
    pub fn complete(p: usize) -> Self {
        assert!(p >= 1, "indicator dimension must be at least 1");
        IndicatorMatrix {
            p,
            bits: vec![true; p * (p + 1) / 2],
        }
    }

    /// No pair connected.
    pub fn isolated(p: usize) -> Self {
        assert!(p >= 1, "indicator dimension must be at least 1");
        let mut bits = vec![false; p * (p + 1) / 2];
        for i in 0..p {
            bits[i * (i + 1) / 2 + i] = true;
        }
        IndicatorMatrix { p, bits }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    fn idx(i: usize, j: usize) -> usize {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        hi * (hi + 1) / 2 + lo
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.p && j < self.p);
        self.bits[Self::idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        debug_assert!(i < self.p && j < self.p);
        assert!(i != j, "the diagonal of an indicator matrix is fixed");
        self.bits[Self::idx(i, j)] = v;
    }

    pub fn count_edges(&self) -> usize {
        let mut c = 0;
        for i in 0..self.p {
            for j in 0..i {
                if self.get(i, j) {
                    c += 1;
                }
            }
        }
        c
    }
}

/// Per-class indicator matrices of a common dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorSet {
    per_class: Vec<IndicatorMatrix>,
}

impl IndicatorSet {
    pub fn new(per_class: Vec<IndicatorMatrix>) -> Result<Self> {
        if per_class.is_empty() {
            return Err(Error::InvalidInput("indicator set has no classes".into()));
        }
        let p = per_class[0].dim();
        for (k, m) in per_class.iter().enumerate() {
            if m.dim() != p {
                return Err(Error::InvalidInput(format!(
                    "indicator for class {k} has dimension {}, expected {p}",
                    m.dim()
                )));
            }
        }
        Ok(IndicatorSet { per_class })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.per_class[0].dim()
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }

    #[inline]
    pub fn class(&self, k: usize) -> &IndicatorMatrix {
        &self.per_class[k]
    }

    #[inline]
    pub fn class_mut(&mut self, k: usize) -> &mut IndicatorMatrix {
        &mut self.per_class[k]
    }
}

/// Partition of {0, .., p-1} into disjoint components. Members of each
/// component ascend, components are ordered by smallest member, and
/// `assignment[v]` is the index of v's component in that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    components: Vec<Vec<usize>>,
}

impl Partition {
    /// Canonicalizes an arbitrary labeling (components ordered by smallest
    /// member, labels made dense).
    pub fn from_labels(labels: &[usize]) -> Self {
        assert!(!labels.is_empty(), "partition of an empty set");
        let mut first_seen: Vec<(usize, usize)> = Vec::new();
        for (v, &l) in labels.iter().enumerate() {
            if !first_seen.iter().any(|&(lab, _)| lab == l) {
                first_seen.push((l, v));
            }
        }
        // Component order = order of first appearance = ascending smallest
        // member, since members are scanned ascending.
        let mut assignment = vec![0; labels.len()];
        let mut components = vec![Vec::new(); first_seen.len()];
        for (v, &l) in labels.iter().enumerate() {
            let c = first_seen.iter().position(|&(lab, _)| lab == l).unwrap();
            assignment[v] = c;
            components[c].push(v);
        }
        Partition {
            assignment,
            components,
        }
    }

    pub fn from_components(mut components: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        let mut seen = vec![false; p];
        for comp in components.iter_mut() {
            comp.sort_unstable();
            if comp.is_empty() {
                return Err(Error::InvalidInput("empty component".into()));
            }
            for &v in comp.iter() {
                if v >= p {
                    return Err(Error::InvalidInput(format!(
                        "member {v} out of range for dimension {p}"
                    )));
                }
                if seen[v] {
                    return Err(Error::InvalidInput(format!(
                        "member {v} appears in two components"
                    )));
                }
                seen[v] = true;
            }
        }
        if let Some(v) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidInput(format!(
                "member {v} is not covered by any component"
            )));
        }
        components.sort_by_key(|c| c[0]);
        let mut assignment = vec![0; p];
        for (c, comp) in components.iter().enumerate() {
            for &v in comp {
                assignment[v] = c;
            }
        }
        Ok(Partition {
            assignment,
            components,
        })
    }

    pub fn singletons(p: usize) -> Self {
        let labels: Vec<usize> = (0..p).collect();
        Partition::from_labels(&labels)
    }

    pub fn single_block(p: usize) -> Self {
        Partition::from_labels(&vec![0; p])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.assignment.len()
    }

    #[inline]
    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    #[inline]
    pub fn same_component(&self, i: usize, j: usize) -> bool {
        self.assignment[i] == self.assignment[j]
    }

    /// Sum of cubed component sizes, the eigendecomposition cost the solver
    /// pays under this partition.
    pub fn complexity_estimate(&self) -> u64 {
        self.components
            .iter()
            .map(|c| (c.len() as u64).pow(3))
            .sum()
    }
}

/// One partition per class over a common variable set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionFamily {
    per_class: Vec<Partition>,
}

impl PartitionFamily {
    pub fn new(per_class: Vec<Partition>) -> Result<Self> {
        if per_class.is_empty() {
            return Err(Error::InvalidInput("partition family has no classes".into()));
        }
        let p = per_class[0].dim();
        for (k, part) in per_class.iter().enumerate() {
            if part.dim() != p {
                return Err(Error::InvalidInput(format!(
                    "partition for class {k} has dimension {}, expected {p}",
                    part.dim()
                )));
            }
        }
        Ok(PartitionFamily { per_class })
    }

    /// The same partition replicated for every class.
    pub fn uniform(partition: Partition, classes: usize) -> Self {
        assert!(classes >= 1);
        PartitionFamily {
            per_class: vec![partition; classes],
        }
    }

    pub fn single_block(p: usize, classes: usize) -> Self {
        PartitionFamily::uniform(Partition::single_block(p), classes)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.per_class[0].dim()
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }

    #[inline]
    pub fn class(&self, k: usize) -> &Partition {
        &self.per_class[k]
    }

    pub fn classes(&self) -> &[Partition] {
        &self.per_class
    }

    pub fn is_uniform(&self) -> bool {
        self.per_class.iter().all(|p| *p == self.per_class[0])
    }

    pub fn complexity_estimate(&self) -> u64 {
        self.per_class.iter().map(|p| p.complexity_estimate()).sum()
    }
}

fn validate_penalties(lambda1: f64, lambda2: f64) -> Result<()> {
    if !lambda1.is_finite() || lambda1 < 0.0 {
        return Err(Error::Config(format!(
            "lambda1 must be finite and nonnegative, got {lambda1}"
        )));
    }
    if !lambda2.is_finite() || lambda2 < 0.0 {
        return Err(Error::Config(format!(
            "lambda2 must be finite and nonnegative, got {lambda2}"
        )));
    }
    Ok(())
}

/// First screening pass. Starting from fully connected indicators, entry
/// (i, j) of class k is cleared when |S^(k)_ij| <= lambda1, and cleared in
/// every class when sum_k max(|S^(k)_ij| - lambda1, 0)^2 <= lambda2^2. Both
/// rules are evaluated on the raw covariances in one pass, so neither
/// depends on the other having run.
pub fn initial_indicators(
    s: &CovarianceSet,
    lambda1: f64,
    lambda2: f64,
) -> Result<IndicatorSet> {
    validate_penalties(lambda1, lambda2)?;
    let p = s.dim();
    let kk = s.num_classes();
    let mut per_class = vec![IndicatorMatrix::complete(p); kk];
    for i in 0..p {
        for j in 0..i {
            let mut excess_sq = 0.0;
            for k in 0..kk {
                let a = s.class(k).get(i, j).abs();
                if a <= lambda1 {
                    per_class[k].set(i, j, false);
                }
                let e = (a - lambda1).max(0.0);
                excess_sq += e * e;
            }
            if excess_sq <= lambda2 * lambda2 {
                for ind in per_class.iter_mut() {
                    ind.set(i, j, false);
                }
            }
        }
    }
    IndicatorSet::new(per_class)
}

/// Connected components of the indicator graph, labeled canonically.
pub fn connected_components(ind: &IndicatorMatrix) -> Partition {
    let p = ind.dim();
    let mut uf = UnionFind::new(p);
    for i in 0..p {
        for j in 0..i {
            if ind.get(i, j) {
                uf.union(i, j);
            }
        }
    }
    partition_from_union_find(&mut uf)
}

fn partition_from_union_find(uf: &mut UnionFind) -> Partition {
    let labels: Vec<usize> = (0..uf.len()).map(|v| uf.find(v)).collect();
    Partition::from_labels(&labels)
}

/// Completes each class's indicator within its own connected components:
/// every pair sharing a component becomes connected, every other pair is
/// cleared. Idempotent.
pub fn close_within_components(ind: &IndicatorSet) -> IndicatorSet {
    let p = ind.dim();
    let mut out = Vec::with_capacity(ind.num_classes());
    for k in 0..ind.num_classes() {
        let part = connected_components(ind.class(k));
        let mut closed = IndicatorMatrix::isolated(p);
        for comp in part.components() {
            for (a, &i) in comp.iter().enumerate() {
                for &j in comp.iter().take(a) {
                    closed.set(i, j, true);
                }
            }
        }
        out.push(closed);
    }
    IndicatorSet::new(out).unwrap()
}

/// A triple (x, i, j) demands repair when class x separates the pair even
/// though |S^(x)_ij| exceeds lambda1 and some class joins the pair. Merging
/// the two components of class x resolves it.
fn find_repair_triple(
    s: &CovarianceSet,
    lambda1: f64,
    forests: &mut [UnionFind],
    order: Option<&[(usize, usize, usize)]>,
) -> Option<(usize, usize, usize)> {
    let p = s.dim();
    let kk = s.num_classes();
    let check = |forests: &mut [UnionFind], x: usize, i: usize, j: usize| -> bool {
        if forests[x].same_set(i, j) {
            return false;
        }
        if s.class(x).get(i, j).abs() <= lambda1 {
            return false;
        }
        (0..kk).any(|t| forests[t].same_set(i, j))
    };
    match order {
        Some(triples) => triples
            .iter()
            .copied()
            .find(|&(x, i, j)| x < kk && i < p && j < p && i != j && check(forests, x, i, j)),
        None => {
            for x in 0..kk {
                for i in 0..p {
                    for j in (i + 1)..p {
                        if check(forests, x, i, j) {
                            return Some((x, i, j));
                        }
                    }
                }
            }
            None
        }
    }
}

fn repair_with_order(
    s: &CovarianceSet,
    ind: &IndicatorSet,
    lambda1: f64,
    order: Option<&[(usize, usize, usize)]>,
) -> Result<IndicatorSet> {
    validate_penalties(lambda1, 0.0)?;
    if ind.dim() != s.dim() || ind.num_classes() != s.num_classes() {
        return Err(Error::InvalidInput(format!(
            "indicator set is {} classes of dimension {}, covariances are {} of {}",
            ind.num_classes(),
            ind.dim(),
            s.num_classes(),
            s.dim()
        )));
    }
    let mut forests: Vec<UnionFind> = (0..ind.num_classes())
        .map(|k| {
            let p = ind.dim();
            let mut uf = UnionFind::new(p);
            for i in 0..p {
                for j in 0..i {
                    if ind.class(k).get(i, j) {
                        uf.union(i, j);
                    }
                }
            }
            uf
        })
        .collect();
    // Each merge strictly decreases the total component count, so the loop
    // ends after at most K * (p - 1) merges. The scan restarts from the top
    // after every merge; the fixpoint does not depend on the scan order
    // because merging only ever adds pairs to the joined relation.
    while let Some((x, i, j)) = find_repair_triple(s, lambda1, &mut forests, order) {
        forests[x].union(i, j);
    }
    let p = ind.dim();
    let mut out = Vec::with_capacity(ind.num_classes());
    for forest in forests.iter_mut() {
        let part = partition_from_union_find(forest);
        let mut closed = IndicatorMatrix::isolated(p);
        for comp in part.components() {
            for (a, &i) in comp.iter().enumerate() {
                for &j in comp.iter().take(a) {
                    closed.set(i, j, true);
                }
            }
        }
        out.push(closed);
    }
    IndicatorSet::new(out)
}

/// Repairs block-complete indicators until no class separates a pair that
/// another class joins while its own covariance magnitude exceeds lambda1.
/// Triples are scanned lexicographically by (class, i, j) and the scan
/// restarts after each merge.
pub fn repair_loop(s: &CovarianceSet, ind: &IndicatorSet, lambda1: f64) -> Result<IndicatorSet> {
    repair_with_order(s, ind, lambda1, None)
}

/// Same fixpoint as `repair_loop` but scanning candidate triples in the
/// given order. Exists to let tests demonstrate order independence.
pub fn repair_loop_ordered(
    s: &CovarianceSet,
    ind: &IndicatorSet,
    lambda1: f64,
    order: &[(usize, usize, usize)],
) -> Result<IndicatorSet> {
    repair_with_order(s, ind, lambda1, Some(order))
}

fn family_from_indicators(ind: &IndicatorSet) -> PartitionFamily {
    let parts: Vec<Partition> = (0..ind.num_classes())
        .map(|k| connected_components(ind.class(k)))
        .collect();
    PartitionFamily::new(parts).unwrap()
}

/// Full screening pipeline: initial thresholding, closure within components,
/// repair, then per-class connected components.
pub fn hybrid_screen(s: &CovarianceSet, lambda1: f64, lambda2: f64) -> Result<PartitionFamily> {
    let ind = initial_indicators(s, lambda1, lambda2)?;
    let closed = close_within_components(&ind);
    let repaired = repair_loop(s, &closed, lambda1)?;
    Ok(family_from_indicators(&repaired))
}

/// `hybrid_screen` with an explicit repair scan order.
pub fn hybrid_screen_ordered(
    s: &CovarianceSet,
    lambda1: f64,
    lambda2: f64,
    order: &[(usize, usize, usize)],
) -> Result<PartitionFamily> {
    let ind = initial_indicators(s, lambda1, lambda2)?;
    let closed = close_within_components(&ind);
    let repaired = repair_loop_ordered(s, &closed, lambda1, order)?;
    Ok(family_from_indicators(&repaired))
}

/// Pooled screen: one partition shared by all classes, connecting (i, j)
/// whenever sum_k max(|S^(k)_ij| - lambda1, 0)^2 > lambda2^2.
pub fn global_screen(s: &CovarianceSet, lambda1: f64, lambda2: f64) -> Result<PartitionFamily> {
    validate_penalties(lambda1, lambda2)?;
    let p = s.dim();
    let kk = s.num_classes();
    let mut ind = IndicatorMatrix::isolated(p);
    for i in 0..p {
        for j in 0..i {
            let mut excess_sq = 0.0;
            for k in 0..kk {
                let e = (s.class(k).get(i, j).abs() - lambda1).max(0.0);
                excess_sq += e * e;
            }
            if excess_sq > lambda2 * lambda2 {
                ind.set(i, j, true);
            }
        }
    }
    Ok(PartitionFamily::uniform(connected_components(&ind), kk))
}

/// Per-class screen ignoring the group penalty: class k connects (i, j)
/// whenever |S^(k)_ij| > lambda1. With one class this is the classic
/// single-graph screening rule.
pub fn local_screen(s: &CovarianceSet, lambda1: f64) -> Result<PartitionFamily> {
    validate_penalties(lambda1, 0.0)?;
    let p = s.dim();
    let mut parts = Vec::with_capacity(s.num_classes());
    for k in 0..s.num_classes() {
        let mut ind = IndicatorMatrix::isolated(p);
        for i in 0..p {
            for j in 0..i {
                if s.class(k).get(i, j).abs() > lambda1 {
                    ind.set(i, j, true);
                }
            }
        }
        parts.push(connected_components(&ind));
    }
    Ok(PartitionFamily::new(parts).unwrap())
}

/// True when every component of `a` sits inside a single component of `b`.
pub fn refines(a: &Partition, b: &Partition) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "cannot compare partitions of dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    for comp in a.components() {
        let target = b.assignment()[comp[0]];
        if comp.iter().any(|&v| b.assignment()[v] != target) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Coarsest partition refined by every class: connected components of the
/// union of the per-class "same component" graphs.
pub fn mix_partition(family: &PartitionFamily) -> Partition {
    let p = family.dim();
    let mut uf = UnionFind::new(p);
    for part in family.classes() {
        for comp in part.components() {
            for w in comp.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
    }
    partition_from_union_find(&mut uf)
}
