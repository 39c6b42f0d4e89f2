//! Checks that tie a partition family to the solutions it is supposed to
//! support.
//!
//! `check_sufficient` asks whether a family is safe to solve under: pairs
//! separated in every class must pass the pooled excess test, and a pair
//! separated in one class but joined in another must have that class's
//! covariance magnitude at or below lambda1. Screening output always
//! passes; the checker exists so that claim is testable and so foreign
//! partitions can be vetted.
//!
//! `check_necessary` goes the other way: given a converged solution, any
//! family whose classes are refined by the solution's own connectivity must
//! satisfy a weaker set of bounds, with the lambda2 headroom available only
//! where every other class's entry is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CovarianceSet, SymMatrix};
use crate::screening::{connected_components, IndicatorMatrix, Partition, PartitionFamily};
use crate::solver::{kkt_residual, PenaltyConfig};

/// A converged solution must sit within this stationarity residual before
/// its connectivity is trusted by `check_necessary`.
pub const NECESSARY_KKT_GATE: f64 = 1e-4;

/// Which screening bound a violation broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// Pooled excess over lambda1 exceeded its budget for a pair separated
    /// in every class.
    GlobalSum,
    /// A single class's covariance magnitude exceeded its bound for a pair
    /// it separates.
    ClassBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub clause: Clause,
    /// Offending class for `ClassBound`; absent for the pooled clause.
    pub class: Option<usize>,
    pub i: usize,
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub satisfied: bool,
    /// Sorted by (i, j, class) so reports are reproducible.
    pub violations: Vec<Violation>,
    /// Smallest rhs - lhs over every clause checked, including passing
    /// ones; how close the family is to breaking.
    pub min_slack: f64,
}

/// Per-class supports plus their union. An entry counts as nonzero when its
/// magnitude exceeds `zero_tol`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgePatternSet {
    pub per_class: Vec<IndicatorMatrix>,
    pub mixed: IndicatorMatrix,
}

pub fn edge_pattern(theta: &[SymMatrix], zero_tol: f64) -> Result<EdgePatternSet> {
    if theta.is_empty() {
        return Err(Error::InvalidInput("no matrices".into()));
    }
    if !zero_tol.is_finite() || zero_tol < 0.0 {
        return Err(Error::Config(format!(
            "zero_tol must be finite and nonnegative, got {zero_tol}"
        )));
    }
    let p = theta[0].dim();
    for (k, th) in theta.iter().enumerate() {
        if th.dim() != p {
            return Err(Error::InvalidInput(format!(
                "class {k} matrix has dimension {}, expected {p}",
                th.dim()
            )));
        }
    }
    let mut mixed = IndicatorMatrix::isolated(p);
    let per_class: Vec<IndicatorMatrix> = theta
        .iter()
        .map(|th| {
            let mut ind = IndicatorMatrix::isolated(p);
            for i in 0..p {
                for j in 0..i {
                    if th.get(i, j).abs() > zero_tol {
                        ind.set(i, j, true);
                        mixed.set(i, j, true);
                    }
                }
            }
            ind
        })
        .collect();
    Ok(EdgePatternSet { per_class, mixed })
}

/// Connected components of each class's support and of the union support.
/// Every class partition refines the mixed partition.
pub fn solution_partition(
    theta: &[SymMatrix],
    zero_tol: f64,
) -> Result<(PartitionFamily, Partition)> {
    let patterns = edge_pattern(theta, zero_tol)?;
    let per_class: Vec<Partition> = patterns
        .per_class
        .iter()
        .map(connected_components)
        .collect();
    let mixed = connected_components(&patterns.mixed);
    Ok((PartitionFamily::new(per_class).unwrap(), mixed))
}

fn check_family_shape(s: &CovarianceSet, family: &PartitionFamily) -> Result<()> {
    if family.dim() != s.dim() || family.num_classes() != s.num_classes() {
        return Err(Error::InvalidInput(format!(
            "partition family is {} classes of dimension {}, covariances are {} of {}",
            family.num_classes(),
            family.dim(),
            s.num_classes(),
            s.dim()
        )));
    }
    Ok(())
}

fn sorted_report(mut violations: Vec<Violation>, min_slack: f64) -> ConditionReport {
    violations.sort_by_key(|v| (v.i, v.j, v.class));
    ConditionReport {
        satisfied: violations.is_empty(),
        violations,
        min_slack,
    }
}

/// Feasibility of solving under `family`: for each pair (i, j) separated in
/// every class, sum_k max(|S_k| - lambda1, 0)^2 <= lambda2^2 must hold; for
/// each class that separates a pair some other class joins, that class must
/// have |S_k| <= lambda1. Comparisons are exact, matching the screening
/// rules bit for bit.
pub fn check_sufficient(
    s: &CovarianceSet,
    family: &PartitionFamily,
    lambda1: f64,
    lambda2: f64,
) -> Result<ConditionReport> {
    check_family_shape(s, family)?;
    let pen = PenaltyConfig::new(lambda1, lambda2, 1.0)?;
    let (lambda1, lambda2) = (pen.lambda1, pen.lambda2);
    let p = s.dim();
    let kk = s.num_classes();
    let mut violations = Vec::new();
    let mut min_slack = f64::INFINITY;
    let mut separated = vec![false; kk];
    for i in 0..p {
        for j in (i + 1)..p {
            for (k, sep) in separated.iter_mut().enumerate() {
                *sep = !family.class(k).same_component(i, j);
            }
            if separated.iter().all(|&x| x) {
                let lhs: f64 = (0..kk)
                    .map(|k| (s.class(k).get(i, j).abs() - lambda1).max(0.0).powi(2))
                    .sum();
                let rhs = lambda2 * lambda2;
                min_slack = min_slack.min(rhs - lhs);
                if lhs > rhs {
                    violations.push(Violation {
                        clause: Clause::GlobalSum,
                        class: None,
                        i,
                        j,
                        lhs,
                        rhs,
                    });
                }
            } else if separated.iter().any(|&x| x) {
                for (k, &sep) in separated.iter().enumerate() {
                    if !sep {
                        continue;
                    }
                    let lhs = s.class(k).get(i, j).abs();
                    min_slack = min_slack.min(lambda1 - lhs);
                    if lhs > lambda1 {
                        violations.push(Violation {
                            clause: Clause::ClassBound,
                            class: Some(k),
                            i,
                            j,
                            lhs,
                            rhs: lambda1,
                        });
                    }
                }
            }
        }
    }
    Ok(sorted_report(violations, min_slack))
}

/// Bound each class's covariance magnitude must respect at a pair its
/// partition separates, given the solution: lambda1 plus the lambda2
/// headroom when every other class's entry is zero within `zero_tol`.
pub fn necessary_thresholds(
    theta: &[SymMatrix],
    lambda1: f64,
    lambda2: f64,
    zero_tol: f64,
) -> Result<Vec<SymMatrix>> {
    if theta.is_empty() {
        return Err(Error::InvalidInput("no matrices".into()));
    }
    let pen = PenaltyConfig::new(lambda1, lambda2, 1.0)?;
    if !zero_tol.is_finite() || zero_tol < 0.0 {
        return Err(Error::Config(format!(
            "zero_tol must be finite and nonnegative, got {zero_tol}"
        )));
    }
    let p = theta[0].dim();
    let kk = theta.len();
    let mut out = vec![SymMatrix::zeros(p); kk];
    for k in 0..kk {
        for i in 0..p {
            out[k].set(i, i, f64::INFINITY);
            for j in 0..i {
                let others_zero = theta
                    .iter()
                    .enumerate()
                    .filter(|&(t, _)| t != k)
                    .all(|(_, th)| th.get(i, j).abs() <= zero_tol);
                let z = if others_zero {
                    pen.lambda1 + pen.lambda2
                } else {
                    pen.lambda1
                };
                out[k].set(i, j, z);
            }
        }
    }
    Ok(out)
}

/// Conditions any feasible family must satisfy at an optimal solution.
/// `theta_opt` must sit within `NECESSARY_KKT_GATE` of stationarity, and
/// each class of `family` must be refined by the solution's own support
/// components for that class; both are preconditions, not violations.
pub fn check_necessary(
    s: &CovarianceSet,
    theta_opt: &[SymMatrix],
    family: &PartitionFamily,
    lambda1: f64,
    lambda2: f64,
    zero_tol: f64,
) -> Result<ConditionReport> {
    check_family_shape(s, family)?;
    let pen = PenaltyConfig::new(lambda1, lambda2, 1.0)?;
    let residual = kkt_residual(s, theta_opt, &pen)?;
    if residual > NECESSARY_KKT_GATE {
        return Err(Error::InvalidInput(format!(
            "solution stationarity residual {residual:.3e} exceeds the gate {NECESSARY_KKT_GATE:.0e}; \
             conclusions drawn from it would be meaningless"
        )));
    }
    let (solution_family, _) = solution_partition(theta_opt, zero_tol)?;
    for k in 0..family.num_classes() {
        if !crate::screening::refines(solution_family.class(k), family.class(k))? {
            return Err(Error::InvalidInput(format!(
                "class {k}: the solution's support components do not refine the proposed partition"
            )));
        }
    }
    let thresholds = necessary_thresholds(theta_opt, lambda1, lambda2, zero_tol)?;
    let p = s.dim();
    let kk = s.num_classes();
    let mut violations = Vec::new();
    let mut min_slack = f64::INFINITY;
    let mut separated = vec![false; kk];
    for i in 0..p {
        for j in (i + 1)..p {
            for (k, sep) in separated.iter_mut().enumerate() {
                *sep = !family.class(k).same_component(i, j);
            }
            if separated.iter().all(|&x| x) {
                let lhs: f64 = (0..kk)
                    .map(|k| (s.class(k).get(i, j).abs() - pen.lambda1).max(0.0).powi(2))
                    .sum();
                let rhs = pen.lambda2 * pen.lambda2;
                min_slack = min_slack.min(rhs - lhs);
                if lhs > rhs {
                    violations.push(Violation {
                        clause: Clause::GlobalSum,
                        class: None,
                        i,
                        j,
                        lhs,
                        rhs,
                    });
                }
            } else {
                for (k, &sep) in separated.iter().enumerate() {
                    if !sep {
                        continue;
                    }
                    let lhs = s.class(k).get(i, j).abs();
                    let rhs = thresholds[k].get(i, j);
                    min_slack = min_slack.min(rhs - lhs);
                    if lhs > rhs {
                        violations.push(Violation {
                            clause: Clause::ClassBound,
                            class: Some(k),
                            i,
                            j,
                            lhs,
                            rhs,
                        });
                    }
                }
            }
        }
    }
    Ok(sorted_report(violations, min_slack))
}
