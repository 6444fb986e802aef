//! Dense matrices, permutations, the first-difference operator and the
//! spectral routines shared by every estimator.
//!
//! The difference operator `D` is the `(n-1) x n` bidiagonal matrix with
//! `-1` on the diagonal and `+1` on the superdiagonal. It is never formed in
//! the hot paths; [`second_difference`] evaluates `D m D~^T` with a 2x2
//! stencil instead.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

use crate::error::{MongeError, Result};

/// Default relative tolerance used by the numerical checks in this crate.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Row-major dense real matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(MongeError::TooSmall {
                what: "matrix dimension",
                min: 1,
                got: n_rows.min(n_cols),
            });
        }
        if data.len() != n_rows * n_cols {
            return Err(MongeError::DimensionMismatch {
                expected: format!("{} entries", n_rows * n_cols),
                found: format!("{} entries", data.len()),
            });
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(MongeError::NonFinite {
                row: k / n_cols,
                col: k % n_cols,
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(MongeError::DimensionMismatch {
                    expected: format!("{n_cols} columns"),
                    found: format!("{} columns in row {i}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(n_rows, n_cols, data)
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        assert!(n_rows > 0 && n_cols > 0, "matrix dimensions must be positive");
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn constant(n_rows: usize, n_cols: usize, value: f64) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        m.data.fill(value);
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Builds a matrix entrywise from 0-based indices.
    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(n_rows > 0 && n_cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                data.push(f(i, j));
            }
        }
        Self {
            n_rows,
            n_cols,
            data,
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n_cols, self.n_rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|x| a * x)
    }

    /// Entrywise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(MongeError::DimensionMismatch {
                expected: format!("{}x{}", self.n_rows, self.n_cols),
                found: format!("{}x{}", other.n_rows, other.n_cols),
            });
        }
        Ok(())
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.n_cols != other.n_rows {
            return Err(MongeError::DimensionMismatch {
                expected: format!("{} rows", self.n_cols),
                found: format!("{} rows", other.n_rows),
            });
        }
        let mut out = Self::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            let out_row = &mut out.data[i * other.n_cols..(i + 1) * other.n_cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `||self - other||_F^2`.
    pub fn dist_sq(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n_cols];
        for i in 0..self.n_rows {
            for (acc, x) in s.iter_mut().zip(self.row(i)) {
                *acc += x;
            }
        }
        s
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows, self.n_cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        &self.data[i * self.n_cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        &mut self.data[i * self.n_cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.n_rows, self.n_cols)?;
        for i in 0..self.n_rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// A bijection of `{0, .., n-1}` stored as its image array: `p(i) = map[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &k in &map {
            if k >= n || seen[k] {
                return Err(MongeError::InvalidParameter(format!(
                    "not a permutation of 0..{n}: {map:?}"
                )));
            }
            seen[k] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    /// The order-reversing permutation `i -> n - 1 - i`.
    pub fn reversal(n: usize) -> Self {
        Self {
            map: (0..n).rev().collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.map.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &k) in self.map.iter().enumerate() {
            inv[k] = i;
        }
        Self { map: inv }
    }

    /// `self ∘ other`, i.e. `i -> self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "composing permutations of different sizes");
        Self {
            map: other.map.iter().map(|&k| self.map[k]).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &k)| i == k)
    }
}

/// Thin SVD `m = sum_i s_i u_i v_i^T` with singular values in nonincreasing
/// order.
#[derive(Clone, Debug)]
pub struct SvdFactorization {
    /// `n_rows x k` with orthonormal columns.
    pub left_vectors: DenseMatrix,
    /// Length `k = min(n_rows, n_cols)`, nonincreasing and nonnegative.
    pub singular_values: Vec<f64>,
    /// `n_cols x k` with orthonormal columns.
    pub right_vectors: DenseMatrix,
}

impl SvdFactorization {
    /// Rebuilds `sum_i g(s_i) u_i v_i^T`, skipping terms where `g` returns 0.
    pub fn reconstruct_with(&self, g: impl Fn(f64) -> f64) -> DenseMatrix {
        let (n1, n2) = (self.left_vectors.n_rows(), self.right_vectors.n_rows());
        let mut out = DenseMatrix::zeros(n1, n2);
        for (k, &s) in self.singular_values.iter().enumerate() {
            let w = g(s);
            if w == 0.0 {
                continue;
            }
            for i in 0..n1 {
                let a = w * self.left_vectors[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let row = &mut out.as_mut_slice()[i * n2..(i + 1) * n2];
                for (j, o) in row.iter_mut().enumerate() {
                    *o += a * self.right_vectors[(j, k)];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(|s| s)
    }
}

/// `result[i, j] = m[p1(i), p2(j)]`.
pub fn apply_permutations(m: &DenseMatrix, p1: &Permutation, p2: &Permutation) -> Result<DenseMatrix> {
    if p1.len() != m.n_rows() || p2.len() != m.n_cols() {
        return Err(MongeError::DimensionMismatch {
            expected: format!("permutations of sizes {}x{}", m.n_rows(), m.n_cols()),
            found: format!("{}x{}", p1.len(), p2.len()),
        });
    }
    Ok(DenseMatrix::from_fn(m.n_rows(), m.n_cols(), |i, j| {
        m[(p1.apply(i), p2.apply(j))]
    }))
}

/// All contiguous 2x2 second differences `D m D~^T`, an
/// `(n_rows-1) x (n_cols-1)` matrix.
pub fn second_difference(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (n1, n2) = m.shape();
    if n1 < 2 || n2 < 2 {
        return Err(MongeError::TooSmall {
            what: "matrix dimension for second differences",
            min: 2,
            got: n1.min(n2),
        });
    }
    let mut out = Vec::with_capacity((n1 - 1) * (n2 - 1));
    for i in 0..n1 - 1 {
        let (top, bottom) = (m.row(i), m.row(i + 1));
        for j in 0..n2 - 1 {
            out.push(top[j] + bottom[j + 1] - top[j + 1] - bottom[j]);
        }
    }
    Ok(DenseMatrix {
        n_rows: n1 - 1,
        n_cols: n2 - 1,
        data: out,
    })
}

/// Materializes the `(n-1) x n` difference operator. Only used by tests and
/// spectral checks.
pub fn difference_operator(n: usize) -> Result<DenseMatrix> {
    if n < 2 {
        return Err(MongeError::TooSmall {
            what: "difference operator size",
            min: 2,
            got: n,
        });
    }
    Ok(DenseMatrix::from_fn(n - 1, n, |i, j| {
        if j == i {
            -1.0
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    }))
}

/// Solves a tridiagonal system with the Thomas algorithm. `sub[0]` and
/// `sup[n-1]` are ignored.
pub(crate) fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Moore–Penrose pseudoinverse of the `(n-1) x n` difference operator,
/// returned as an `n x (n-1)` matrix.
///
/// Uses `D^+ = D^T (D D^T)^{-1}`, inverting the tridiagonal `D D^T`
/// (2 on the diagonal, -1 off it) one column at a time.
pub fn diff_pinv(n: usize) -> Result<DenseMatrix> {
    if n < 2 {
        return Err(MongeError::TooSmall {
            what: "difference operator size",
            min: 2,
            got: n,
        });
    }
    let m = n - 1;
    let sub = vec![-1.0; m];
    let diag = vec![2.0; m];
    let sup = vec![-1.0; m];
    // gram_inv[k][j] = ((D D^T)^{-1})_{j,k}; symmetric so orientation is moot.
    let mut gram_inv = Vec::with_capacity(m);
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        solve_tridiagonal(&sub, &diag, &sup, &mut e);
        gram_inv.push(e);
    }
    // (D^T W)[i, j] = W[i-1, j] - W[i, j], out-of-range rows read as zero.
    Ok(DenseMatrix::from_fn(n, m, |i, j| {
        let up = if i >= 1 { gram_inv[j][i - 1] } else { 0.0 };
        let here = if i < m { gram_inv[j][i] } else { 0.0 };
        up - here
    }))
}

/// Nonzero singular values of the `(n-1) x n` difference operator,
/// `2 |sin(pi i / 2n)|` for `i = 1..n-1`, in ascending order.
pub fn d_singular_values(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(MongeError::TooSmall {
            what: "difference operator size",
            min: 2,
            got: n,
        });
    }
    let nf = n as f64;
    Ok((1..n)
        .map(|i| 2.0 * (std::f64::consts::PI * i as f64 / (2.0 * nf)).sin().abs())
        .collect())
}

const SVD_MAX_ITER: usize = 10_000;

/// Thin SVD with singular values sorted in nonincreasing order.
pub fn full_svd(m: &DenseMatrix) -> Result<SvdFactorization> {
    let (n1, n2) = m.shape();
    let svd = m
        .to_nalgebra()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(MongeError::NoConvergence("singular value decomposition"))?;
    let u = svd.u.ok_or(MongeError::NoConvergence("singular value decomposition"))?;
    let v_t = svd
        .v_t
        .ok_or(MongeError::NoConvergence("singular value decomposition"))?;
    let k = n1.min(n2);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let left_vectors = DenseMatrix::from_fn(n1, k, |i, c| u[(i, order[c])]);
    let right_vectors = DenseMatrix::from_fn(n2, k, |j, c| v_t[(order[c], j)]);
    let singular_values = order.iter().map(|&c| svd.singular_values[c].max(0.0)).collect();
    Ok(SvdFactorization {
        left_vectors,
        singular_values,
        right_vectors,
    })
}

/// Eigen-decomposition of a symmetric matrix. Returns eigenvalues in
/// nonincreasing order and the matching unit eigenvectors as columns.
pub fn symmetric_eigen(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let (n1, n2) = m.shape();
    if n1 != n2 {
        return Err(MongeError::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{n1}x{n2}"),
        });
    }
    let eig = m
        .to_nalgebra()
        .try_symmetric_eigen(f64::EPSILON, SVD_MAX_ITER)
        .ok_or(MongeError::NoConvergence("symmetric eigendecomposition"))?;
    let mut order: Vec<usize> = (0..n1).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    let vectors = DenseMatrix::from_fn(n1, n1, |i, c| eig.eigenvectors[(i, order[c])]);
    Ok((values, vectors))
}

/// Removes row and column means: `m - rowMean - colMean + grandMean`.
pub fn double_center(m: &DenseMatrix) -> DenseMatrix {
    let (n1, n2) = m.shape();
    let row_means: Vec<f64> = m.row_sums().into_iter().map(|s| s / n2 as f64).collect();
    let col_means: Vec<f64> = m.col_sums().into_iter().map(|s| s / n1 as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n1 as f64;
    DenseMatrix::from_fn(n1, n2, |i, j| m[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Numerical rank: number of singular values strictly above `tol`.
pub fn numerical_rank(m: &DenseMatrix, tol: f64) -> Result<usize> {
    Ok(full_svd(m)?
        .singular_values
        .iter()
        .filter(|&&s| s > tol)
        .count())
}
