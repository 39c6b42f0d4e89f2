//! Independently coded checks the criteria measure the library against.
//! Everything here prefers the obvious formula over speed, and none of it
//! shares code with the implementation under test.

use jgl::matrix::{CovarianceSet, SampleMatrix, SymMatrix};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

pub fn dense(a: &SymMatrix) -> DMatrix<f64> {
    let p = a.dim();
    DMatrix::from_fn(p, p, |i, j| a.get(i, j))
}

/// Douglas-Rachford splitting on (1/2)||b - a||^2 + l1 ||b||_1 + l2 ||b||_2,
/// an iterative route to the prox the solver computes in closed form. The
/// first term is strongly convex, so the iteration contracts and 4000 rounds
/// land far below the comparison tolerance.
pub fn prox_by_splitting(a: &[f64], l1: f64, l2: f64) -> Vec<f64> {
    let soft = |v: f64, t: f64| v.signum() * (v.abs() - t).max(0.0);
    let prox_f = |z: &[f64]| -> Vec<f64> {
        z.iter()
            .zip(a)
            .map(|(&zi, &ai)| soft((zi + ai) / 2.0, l1 / 2.0))
            .collect()
    };
    let prox_g = |z: &[f64]| -> Vec<f64> {
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= l2 {
            vec![0.0; z.len()]
        } else {
            let scale = 1.0 - l2 / norm;
            z.iter().map(|v| v * scale).collect()
        }
    };
    let mut z: Vec<f64> = a.to_vec();
    let mut x = prox_f(&z);
    for _ in 0..4000 {
        let reflected: Vec<f64> = x.iter().zip(&z).map(|(&xi, &zi)| 2.0 * xi - zi).collect();
        let w = prox_g(&reflected);
        for ((zi, &wi), &xi) in z.iter_mut().zip(&w).zip(&x) {
            *zi += wi - xi;
        }
        x = prox_f(&z);
    }
    x
}

/// Max-abs residual of the Theta block optimality system,
/// S - Theta^-1 + rho (Theta - Y + U), with the inverse taken by nalgebra.
pub fn theta_stationarity(
    s: &SymMatrix,
    y: &SymMatrix,
    u: &SymMatrix,
    rho: f64,
    theta: &SymMatrix,
) -> f64 {
    let th = dense(theta);
    let inv = th.clone().try_inverse().expect("theta block not invertible");
    let resid = dense(s) - inv + rho * (th - dense(y) + dense(u));
    resid.amax()
}

/// Textbook double-loop covariance: mean-center, then average products.
pub fn covariance_by_formula(x: &SampleMatrix) -> Vec<Vec<f64>> {
    let (n, p) = (x.n(), x.dim());
    let mut mean = vec![0.0; p];
    for t in 0..n {
        for j in 0..p {
            mean[j] += x.get(t, j);
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut out = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for t in 0..n {
                acc += (x.get(t, i) - mean[i]) * (x.get(t, j) - mean[j]);
            }
            out[i][j] = acc / n as f64;
        }
    }
    out
}

pub fn is_positive_definite(a: &SymMatrix) -> bool {
    nalgebra::Cholesky::new(dense(a)).is_some()
}

/// Every partition of {0, .., p-1} as restricted-growth label vectors:
/// labels[0] = 0 and each later label is at most one past the largest so far.
pub fn all_partitions(p: usize) -> Vec<Vec<usize>> {
    fn extend(labels: &mut Vec<usize>, used: usize, p: usize, out: &mut Vec<Vec<usize>>) {
        if labels.len() == p {
            out.push(labels.clone());
            return;
        }
        for v in 0..=used {
            labels.push(v);
            extend(labels, used.max(v + 1), p, out);
            labels.pop();
        }
    }
    assert!(p >= 1 && p <= 6, "enumeration is sized for tiny instances");
    let mut out = Vec::new();
    extend(&mut vec![0], 1, p, &mut out);
    out
}

/// Bit t of the result is set when the partition separates the t-th pair
/// (i, j), i < j, in row-major pair order.
pub fn separation_mask(labels: &[usize]) -> u32 {
    let p = labels.len();
    let mut mask = 0u32;
    let mut t = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            if labels[i] != labels[j] {
                mask |= 1 << t;
            }
            t += 1;
        }
    }
    mask
}

/// Per-pair clause bits for one instance: `class_ok[k]` has bit t set when
/// |S_k| <= lambda1 at pair t, `pooled_ok` when the summed squared excess is
/// within lambda2^2. Comparisons are exact, as in the condition itself.
pub struct ClauseBits {
    pub class_ok: Vec<u32>,
    pub pooled_ok: u32,
    pub all_pairs: u32,
}

pub fn clause_bits(s: &CovarianceSet, lambda1: f64, lambda2: f64) -> ClauseBits {
    let p = s.dim();
    let kk = s.num_classes();
    let mut class_ok = vec![0u32; kk];
    let mut pooled_ok = 0u32;
    let mut t = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            let mut pooled = 0.0;
            for (k, ok) in class_ok.iter_mut().enumerate() {
                let a = s.class(k).get(i, j).abs();
                if a <= lambda1 {
                    *ok |= 1 << t;
                }
                pooled += (a - lambda1).max(0.0).powi(2);
            }
            if pooled <= lambda2 * lambda2 {
                pooled_ok |= 1 << t;
            }
            t += 1;
        }
    }
    ClauseBits {
        class_ok,
        pooled_ok,
        all_pairs: if t == 32 { u32::MAX } else { (1u32 << t) - 1 },
    }
}

/// Feasibility of one family, given each class's separation mask: pairs
/// separated everywhere need the pooled clause, pairs separated in some
/// classes but joined in another need each separating class's own bound.
pub fn family_feasible(sep: &[u32], bits: &ClauseBits) -> bool {
    let all_sep = sep.iter().fold(bits.all_pairs, |m, &s| m & s);
    if all_sep & !bits.pooled_ok != 0 {
        return false;
    }
    sep.iter()
        .zip(&bits.class_ok)
        .all(|(&s_k, &ok)| s_k & !all_sep & !ok == 0)
}

/// Two classes whose large covariance entries cross: each class keeps one
/// pair the other clears, so neither the per-class rule alone nor the pooled
/// rule alone splits anything, yet combined they split both classes in two.
pub fn crossing_instance() -> (CovarianceSet, f64, f64) {
    let mut s1 = SymMatrix::identity(3);
    s1.set(0, 1, 0.08);
    s1.set(0, 2, -0.045);
    s1.set(1, 2, 0.01);
    let mut s2 = SymMatrix::identity(3);
    s2.set(0, 1, -0.01);
    s2.set(0, 2, 0.045);
    s2.set(1, 2, 0.08);
    (CovarianceSet::new(vec![s1, s2]).unwrap(), 0.04, 0.02)
}

/// Random symmetric unit-diagonal matrices, one per class. Screening inputs
/// only; positive definiteness is not needed and not arranged.
pub fn random_cov_set(
    rng: &mut ChaCha12Rng,
    p: usize,
    classes: usize,
    scale: f64,
) -> CovarianceSet {
    let mats = (0..classes)
        .map(|_| {
            let mut m = SymMatrix::identity(p);
            for i in 0..p {
                for j in 0..i {
                    m.set(i, j, rng.random_range(-scale..scale));
                }
            }
            m
        })
        .collect();
    CovarianceSet::new(mats).unwrap()
}
