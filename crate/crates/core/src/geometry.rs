//! Structure of the anti-Monge cone: membership, the variation seminorm,
//! the constant-row / constant-column / isotone decomposition, a
//! constructive low-rank approximation and the worst case for it.

use crate::error::{MongeError, Result};
use crate::linalg::{diff_pinv, second_difference, DenseMatrix};

/// `m = row_part + col_part + isotone_part`.
///
/// For anti-Monge inputs `isotone_part` has zero first row and column,
/// nondecreasing rows and columns, and its bottom-right corner equals the
/// variation of `m`.
#[derive(Clone, Debug)]
pub struct MongeDecomposition {
    /// Constant rows: `row_part[i, j] = m[i, 0]`.
    pub row_part: DenseMatrix,
    /// Constant columns: `col_part[i, j] = m[0, j] - m[0, 0]`.
    pub col_part: DenseMatrix,
    pub isotone_part: DenseMatrix,
}

impl MongeDecomposition {
    pub fn reassemble(&self) -> DenseMatrix {
        let mut out = self.row_part.clone();
        for ((o, s), b) in out
            .as_mut_slice()
            .iter_mut()
            .zip(self.col_part.as_slice())
            .zip(self.isotone_part.as_slice())
        {
            *o += s + b;
        }
        out
    }
}

/// True when every contiguous 2x2 second difference is at least `-tol`.
/// Matrices with a single row or column are vacuously anti-Monge.
pub fn is_anti_monge(m: &DenseMatrix, tol: f64) -> Result<bool> {
    if !(tol >= 0.0) {
        return Err(MongeError::InvalidParameter(format!(
            "tolerance must be nonnegative, got {tol}"
        )));
    }
    if m.n_rows() < 2 || m.n_cols() < 2 {
        return Ok(true);
    }
    Ok(second_difference(m)?.min_entry() >= -tol)
}

/// Corner formula `m[0,0] + m[n1-1,n2-1] - m[n1-1,0] - m[0,n2-1]`.
///
/// This is the variation only on the anti-Monge cone, where it equals the
/// l1 norm of the second differences. Use [`variation_l1`] for arbitrary
/// input.
pub fn variation(m: &DenseMatrix) -> f64 {
    let (n1, n2) = m.shape();
    m[(0, 0)] + m[(n1 - 1, n2 - 1)] - m[(n1 - 1, 0)] - m[(0, n2 - 1)]
}

/// Sum of absolute second differences.
pub fn variation_l1(m: &DenseMatrix) -> f64 {
    if m.n_rows() < 2 || m.n_cols() < 2 {
        return 0.0;
    }
    second_difference(m)
        .expect("dimensions checked above")
        .as_slice()
        .iter()
        .map(|x| x.abs())
        .sum()
}

pub fn decompose(m: &DenseMatrix) -> MongeDecomposition {
    let (n1, n2) = m.shape();
    let row_part = DenseMatrix::from_fn(n1, n2, |i, _| m[(i, 0)]);
    let col_part = DenseMatrix::from_fn(n1, n2, |_, j| m[(0, j)] - m[(0, 0)]);
    let isotone_part = DenseMatrix::from_fn(n1, n2, |i, j| {
        m[(i, j)] - m[(i, 0)] - m[(0, j)] + m[(0, 0)]
    });
    MongeDecomposition {
        row_part,
        col_part,
        isotone_part,
    }
}

/// Half-open index ranges `[start, end)` partitioning `0..n`.
pub(crate) type Blocks = Vec<(usize, usize)>;

/// Row blocks cut at multiples of `floor(n/r)` (at least 1), with the last
/// block closed at `n`. At most `r + 1` blocks.
pub(crate) fn row_subdivision(n: usize, r: usize) -> Blocks {
    let step = (n / r).max(1);
    let mut cuts: Vec<usize> = (1..=r).map(|k| (k * step).min(n)).collect();
    cuts.push(n);
    cuts.dedup();
    let mut blocks = Vec::with_capacity(cuts.len());
    let mut start = 0;
    for c in cuts {
        if c > start {
            blocks.push((start, c));
            start = c;
        }
    }
    blocks
}

/// Greedy left-to-right column blocks over the bottom row `last` of the
/// isotone part: a block grows while its increment `last[end] - last[start]`
/// stays within `budget` and its width within `max_width`.
pub(crate) fn column_subdivision(last: &[f64], budget: f64, max_width: usize) -> Blocks {
    let n = last.len();
    let mut blocks = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && end - start < max_width && last[end] - last[start] <= budget {
            end += 1;
        }
        blocks.push((start, end));
        start = end;
    }
    blocks
}

/// Rank-`(3r+3)` approximation of an anti-Monge matrix with
/// `||approx - m||_F^2 <= 2 n1 n2 V(m)^2 / r^3`.
///
/// The isotone part `B` is replaced by `X + Y`, where `X` copies the first
/// column of each column block of `B` across that block and `Y` copies the
/// first row of each row block of `B - X`. `X` has at most `2r` distinct
/// columns and `Y` at most `r + 1` distinct rows; the constant-row and
/// constant-column parts add one each.
pub fn low_rank_approx(m: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    if r < 1 {
        return Err(MongeError::InvalidParameter("rank parameter r must be >= 1".into()));
    }
    let (n1, n2) = m.shape();
    let dec = decompose(m);
    let b = &dec.isotone_part;
    let v = b[(n1 - 1, n2 - 1)].max(0.0);

    let last: Vec<f64> = b.row(n1 - 1).to_vec();
    let col_blocks = column_subdivision(&last, v / r as f64, n2.div_ceil(r));
    let row_blocks = row_subdivision(n1, r);

    let mut x = DenseMatrix::zeros(n1, n2);
    for &(c0, c1) in &col_blocks {
        for i in 0..n1 {
            let pinned = b[(i, c0)];
            for j in c0..c1 {
                x[(i, j)] = pinned;
            }
        }
    }
    let mut approx = dec.row_part.add(&dec.col_part)?.add(&x)?;
    for &(r0, r1) in &row_blocks {
        for j in 0..n2 {
            let pinned = b[(r0, j)] - x[(r0, j)];
            for i in r0..r1 {
                approx[(i, j)] += pinned;
            }
        }
    }
    Ok(approx)
}

/// `D^+ (D^+)^T` for the `(n-1) x n` difference operator.
pub(crate) fn pinv_gram(n: usize) -> Result<DenseMatrix> {
    let p = diff_pinv(n)?;
    p.matmul(&p.transpose())
}

/// `(v0 / n) D^+ (D^+)^T`: anti-Monge with second differences `(v0/n) I`,
/// whose spectrum decays like `i^-2` and so resists low-rank approximation.
pub fn worst_case_matrix(n: usize, v0: f64) -> Result<DenseMatrix> {
    if !(v0 > 0.0) || !v0.is_finite() {
        return Err(MongeError::InvalidParameter(format!(
            "v0 must be positive and finite, got {v0}"
        )));
    }
    Ok(pinv_gram(n)?.scale(v0 / n as f64))
}
