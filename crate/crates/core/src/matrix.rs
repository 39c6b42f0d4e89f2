//! Dense symmetric matrices, sample matrices, and spectral helpers.
//!
//! `SymMatrix` stores only the lower triangle (row-major, diagonal included),
//! so symmetry is structural: there is no mirror copy of an off-diagonal
//! entry that could drift out of sync. Entry (i, j) with i >= j lives at
//! index `i * (i + 1) / 2 + j`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric p x p matrix of f64, p >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    p: usize,
    data: Vec<f64>,
}

#[inline]
fn tri_len(p: usize) -> usize {
    p * (p + 1) / 2
}

#[inline]
fn tri_idx(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

impl SymMatrix {
    pub fn zeros(p: usize) -> Self {
        assert!(p >= 1, "matrix dimension must be at least 1");
        SymMatrix {
            p,
            data: vec![0.0; tri_len(p)],
        }
    }

    pub fn identity(p: usize) -> Self {
        let mut m = SymMatrix::zeros(p);
        for i in 0..p {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds from full square rows, requiring exact symmetry and finite
    /// entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if p == 0 {
            return Err(Error::InvalidInput("matrix has no rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {p}",
                    row.len()
                )));
            }
        }
        let mut m = SymMatrix::zeros(p);
        for i in 0..p {
            for j in 0..=i {
                let v = rows[i][j];
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite entry at ({i}, {j})"
                    )));
                }
                if rows[j][i] != v {
                    return Err(Error::InvalidInput(format!(
                        "asymmetry at ({i}, {j}): {v} vs {}",
                        rows[j][i]
                    )));
                }
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.p && j < self.p);
        self.data[tri_idx(i, j)]
    }

    /// Sets both (i, j) and (j, i); they are the same storage slot.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.p && j < self.p);
        self.data[tri_idx(i, j)] = v;
    }

    /// Packed lower triangle, ordered by `i * (i + 1) / 2 + j` for i >= j.
    /// Two matrices of equal dimension share the layout, which entrywise
    /// kernels rely on.
    #[inline]
    pub(crate) fn tri_data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub(crate) fn tri_data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Frobenius norm over the full matrix: off-diagonal slots count twice.
    pub fn frob_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.p {
            for j in 0..=i {
                let v = self.data[tri_idx(i, j)];
                let w = if i == j { 1.0 } else { 2.0 };
                acc += w * v * v;
            }
        }
        acc.sqrt()
    }

    /// Frobenius norm of the difference, without materializing it.
    pub fn frob_dist(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.p, other.p, "dimension mismatch");
        let mut acc = 0.0;
        for i in 0..self.p {
            for j in 0..=i {
                let d = self.data[tri_idx(i, j)] - other.data[tri_idx(i, j)];
                let w = if i == j { 1.0 } else { 2.0 };
                acc += w * d * d;
            }
        }
        acc.sqrt()
    }

    /// Full-matrix inner product sum_ij a_ij * b_ij, equal to tr(AB) for
    /// symmetric arguments.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.p, other.p, "dimension mismatch");
        let mut acc = 0.0;
        for i in 0..self.p {
            for j in 0..=i {
                let w = if i == j { 1.0 } else { 2.0 };
                acc += w * self.data[tri_idx(i, j)] * other.data[tri_idx(i, j)];
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.p, other.p, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.p, |i, j| self.get(i, j))
    }

    /// Reads back the lower triangle of a dense matrix that is symmetric up
    /// to roundoff, discarding any asymmetric part.
    pub(crate) fn from_dense_lower(m: &DMatrix<f64>) -> Self {
        let p = m.nrows();
        debug_assert_eq!(p, m.ncols());
        let mut out = SymMatrix::zeros(p);
        for i in 0..p {
            for j in 0..=i {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }
}

/// n x p sample matrix, rows are observations. All entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("sample matrix has no rows".into()));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::InvalidInput("sample matrix has no columns".into()));
        }
        let mut data = Vec::with_capacity(n * p);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidInput(format!(
                    "row {t} has {} entries, expected {p}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite entry at ({t}, {j})"
                    )));
                }
                data.push(v);
            }
        }
        Ok(SampleMatrix { n, p, data })
    }

    pub(crate) fn from_parts(n: usize, p: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * p);
        SampleMatrix { n, p, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, t: usize, j: usize) -> f64 {
        debug_assert!(t < self.n && j < self.p);
        self.data[t * self.p + j]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.p..(t + 1) * self.p]
    }
}

/// One covariance matrix per class, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    classes: Vec<SymMatrix>,
}

impl CovarianceSet {
    pub fn new(classes: Vec<SymMatrix>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidInput("covariance set has no classes".into()));
        }
        let p = classes[0].dim();
        for (k, m) in classes.iter().enumerate() {
            if m.dim() != p {
                return Err(Error::InvalidInput(format!(
                    "class {k} has dimension {}, expected {p}",
                    m.dim()
                )));
            }
        }
        Ok(CovarianceSet { classes })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.classes[0].dim()
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    #[inline]
    pub fn class(&self, k: usize) -> &SymMatrix {
        &self.classes[k]
    }

    pub fn classes(&self) -> &[SymMatrix] {
        &self.classes
    }
}

/// Maximum likelihood covariance: deviations from the column means,
/// normalized by n (not n - 1).
pub fn empirical_covariance(x: &SampleMatrix) -> Result<SymMatrix> {
    let (n, p) = (x.n(), x.dim());
    let mut means = vec![0.0; p];
    for t in 0..n {
        for (j, m) in means.iter_mut().enumerate() {
            *m += x.get(t, j);
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, p, |t, j| x.get(t, j) - means[j]);
    let s = centered.transpose() * &centered / n as f64;
    Ok(SymMatrix::from_dense_lower(&s))
}

/// Eigendecomposition of a symmetric matrix. Eigenvalues ascend; column j of
/// the eigenvector matrix pairs with eigenvalue j.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    p: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Row-major p x p orthogonal matrix.
    pub eigenvectors: Vec<f64>,
}

impl EigenDecomposition {
    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn vector_entry(&self, i: usize, j: usize) -> f64 {
        self.eigenvectors[i * self.p + j]
    }

    /// Q f(D) Q^T for an entrywise map f of the eigenvalues.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let p = self.p;
        let q = DMatrix::from_row_slice(p, p, &self.eigenvectors);
        let mut scaled = q.clone();
        for (j, &d) in self.eigenvalues.iter().enumerate() {
            let fd = f(d);
            for i in 0..p {
                scaled[(i, j)] *= fd;
            }
        }
        let m = scaled * q.transpose();
        SymMatrix::from_dense_lower(&m)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map_eigenvalues(|d| d)
    }
}

/// Full symmetric eigendecomposition, eigenvalues sorted ascending.
pub fn sym_eigen(a: &SymMatrix) -> Result<EigenDecomposition> {
    let p = a.dim();
    let max_sweeps = 100 * p.max(10);
    let se = nalgebra::SymmetricEigen::try_new(a.to_dense(), 1e-12, max_sweeps)
        .ok_or_else(|| {
            Error::Numeric(format!("eigensolver did not converge on a {p} x {p} matrix"))
        })?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&j| se.eigenvalues[j]).collect();
    let mut eigenvectors = vec![0.0; p * p];
    for (col_out, &col_in) in order.iter().enumerate() {
        for i in 0..p {
            eigenvectors[i * p + col_out] = se.eigenvectors[(i, col_in)];
        }
    }
    Ok(EigenDecomposition {
        p,
        eigenvalues,
        eigenvectors,
    })
}

/// Copies the principal submatrix on `idx` (strictly ascending, in range)
/// into a fresh |idx| x |idx| matrix.
pub fn extract_block(a: &SymMatrix, idx: &[usize]) -> Result<SymMatrix> {
    validate_index_set(idx, a.dim())?;
    let m = idx.len();
    let mut out = SymMatrix::zeros(m);
    for (bi, &i) in idx.iter().enumerate() {
        for (bj, &j) in idx.iter().enumerate().take(bi + 1) {
            out.set(bi, bj, a.get(i, j));
        }
    }
    Ok(out)
}

/// Writes `block` onto the principal submatrix of `a` on `idx`. Entries
/// outside the submatrix are untouched.
pub fn scatter_block(a: &mut SymMatrix, idx: &[usize], block: &SymMatrix) -> Result<()> {
    validate_index_set(idx, a.dim())?;
    if block.dim() != idx.len() {
        return Err(Error::InvalidInput(format!(
            "block dimension {} does not match index set size {}",
            block.dim(),
            idx.len()
        )));
    }
    for (bi, &i) in idx.iter().enumerate() {
        for (bj, &j) in idx.iter().enumerate().take(bi + 1) {
            a.set(i, j, block.get(bi, bj));
        }
    }
    Ok(())
}

fn validate_index_set(idx: &[usize], p: usize) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::InvalidInput("empty index set".into()));
    }
    for w in idx.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InvalidInput(format!(
                "index set not strictly ascending: {} then {}",
                w[0], w[1]
            )));
        }
    }
    let last = *idx.last().unwrap();
    if last >= p {
        return Err(Error::InvalidInput(format!(
            "index {last} out of range for dimension {p}"
        )));
    }
    Ok(())
}
