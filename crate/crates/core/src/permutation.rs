//! Latent permutation estimation: Variance Sorting, the two-orientation
//! estimator built on it, spectral seriation and an exhaustive least-squares
//! oracle for toy sizes.
//!
//! Permutations act on matrices as `m(p1, p2)[i, j] = m[p1(i), p2(j)]`
//! (see [`apply_permutations`]). An estimated row permutation `p` is the
//! *sorting* permutation: `y(p, .)` lists the rows of `y` in estimated
//! order, so `p(0)` is the first anchor row.

use crate::error::{MongeError, Result};
use crate::linalg::{apply_permutations, double_center, symmetric_eigen, DenseMatrix, Permutation};
use crate::projection::{project_anti_monge, DykstraConfig};

/// Rows of `y` with their own mean removed.
fn row_centered(y: &DenseMatrix) -> DenseMatrix {
    let n2 = y.n_cols() as f64;
    let means: Vec<f64> = y.row_sums().into_iter().map(|s| s / n2).collect();
    DenseMatrix::from_fn(y.n_rows(), y.n_cols(), |i, j| y[(i, j)] - means[i])
}

fn pairwise_sq_dist(c: &DenseMatrix) -> DenseMatrix {
    let n = c.n_rows();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = c.row(i).iter().zip(c.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    out
}

/// `xi[i, j] = sum_k (y[i,k] - y[j,k] - mean_l(y[i,l] - y[j,l]))^2`, the
/// centered squared distance between rows `i` and `j`.
///
/// Adding a constant-row or constant-column matrix to `y` leaves it
/// unchanged.
pub fn xi_statistic(y: &DenseMatrix) -> Result<DenseMatrix> {
    if y.n_cols() < 2 {
        return Err(MongeError::TooSmall {
            what: "number of columns",
            min: 2,
            got: y.n_cols(),
        });
    }
    Ok(pairwise_sq_dist(&row_centered(y)))
}

#[derive(Clone, Debug)]
pub struct VarianceSortOutput {
    /// Sorting permutation: `pi_hat.apply(0) == i0`, last entry `j0`.
    pub pi_hat: Permutation,
    pub anchor_pair: (usize, usize),
    pub xi: DenseMatrix,
}

/// Picks the pair of rows whose difference has the largest variance, then
/// orders all rows by their `xi` distance to the first of the pair.
///
/// Ties in the anchor go to the lexicographically smallest `(i, j)`; ties
/// in the ordering keep the original row order.
pub fn variance_sort(y: &DenseMatrix) -> Result<VarianceSortOutput> {
    let n1 = y.n_rows();
    if n1 < 2 {
        return Err(MongeError::TooSmall {
            what: "number of rows",
            min: 2,
            got: n1,
        });
    }
    let xi = xi_statistic(y)?;
    let mut anchor = (0, 1);
    let mut best = xi[(0, 1)];
    for i in 0..n1 {
        for j in i + 1..n1 {
            if xi[(i, j)] > best {
                best = xi[(i, j)];
                anchor = (i, j);
            }
        }
    }
    let i0 = anchor.0;
    let mut order: Vec<usize> = (0..n1).collect();
    order.sort_by(|&a, &b| xi[(i0, a)].total_cmp(&xi[(i0, b)]));
    // With exact ties at a positive maximum the stable sort can leave j0
    // before another maximiser; j0 is moved to the end. An all-zero xi
    // keeps the input order.
    if let Some(pos) = order.iter().position(|&r| r == anchor.1) {
        if best > 0.0 && xi[(i0, anchor.1)] == xi[(i0, order[n1 - 1])] {
            let j0 = order.remove(pos);
            order.push(j0);
        }
    }
    // Likewise i0 goes first even if another row duplicates it exactly.
    if let Some(pos) = order.iter().position(|&r| r == i0) {
        let r = order.remove(pos);
        order.insert(0, r);
    }
    Ok(VarianceSortOutput {
        pi_hat: Permutation::new(order)?,
        anchor_pair: anchor,
        xi,
    })
}

#[derive(Clone, Debug)]
pub struct MainAlgorithmOutput {
    /// Estimate aligned with the input `y`.
    pub estimate: DenseMatrix,
    /// Row order used for the returned fit (already flipped if the
    /// reversed orientation won).
    pub row_perm: Permutation,
    pub col_perm: Permutation,
    pub flipped: bool,
    /// `||estimate - y||_F^2`.
    pub residual: f64,
    pub converged: bool,
    pub sweeps_used: usize,
}

impl MainAlgorithmOutput {
    pub fn into_converged(self) -> Result<DenseMatrix> {
        if self.converged {
            Ok(self.estimate)
        } else {
            Err(MongeError::NoConvergence("projection inside the permutation estimator"))
        }
    }
}

/// Variance-sorts rows and columns, fits the sorted matrix and its
/// row-reversed version by projection onto the (capped) cone, and keeps
/// whichever fits better. `v0` overrides `cfg.v_max`.
///
/// Unlike [`main_algorithm`], a projection that hits its sweep budget is
/// reported through `converged` instead of an error.
pub fn main_algorithm_detailed(y: &DenseMatrix, v0: Option<f64>, cfg: &DykstraConfig) -> Result<MainAlgorithmOutput> {
    let (n1, n2) = y.shape();
    if n1 < 2 || n2 < 2 {
        return Err(MongeError::TooSmall {
            what: "matrix dimension",
            min: 2,
            got: n1.min(n2),
        });
    }
    let cfg = cfg.with_v_max(v0);
    let p1 = variance_sort(y)?.pi_hat;
    let p2 = variance_sort(&y.transpose())?.pi_hat;

    let mut best: Option<MainAlgorithmOutput> = None;
    for flipped in [false, true] {
        let rows = if flipped { p1.compose(&Permutation::reversal(n1)) } else { p1.clone() };
        let z = apply_permutations(y, &rows, &p2)?;
        let fit = project_anti_monge(&z, &cfg)?;
        let residual = fit.estimate.dist_sq(&z)?;
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            let estimate = apply_permutations(&fit.estimate, &rows.inverse(), &p2.inverse())?;
            let sweeps_used = best.as_ref().map_or(0, |b| b.sweeps_used) + fit.sweeps_used;
            let converged = best.as_ref().is_none_or(|b| b.converged) && fit.converged;
            best = Some(MainAlgorithmOutput {
                estimate,
                row_perm: rows,
                col_perm: p2.clone(),
                flipped,
                residual,
                converged,
                sweeps_used,
            });
        } else if let Some(b) = best.as_mut() {
            b.sweeps_used += fit.sweeps_used;
            b.converged &= fit.converged;
        }
    }
    Ok(best.expect("two orientations were tried"))
}

/// [`main_algorithm_detailed`], failing on non-convergence.
pub fn main_algorithm(y: &DenseMatrix, v0: Option<f64>, cfg: &DykstraConfig) -> Result<DenseMatrix> {
    main_algorithm_detailed(y, v0, cfg)?.into_converged()
}

/// `min over f1, f2 in {id, reversal}` of
/// `||theta*(p1 . f1, p2 . f2) - theta*||_F^2 / (n1 n2)`.
///
/// `p1`, `p2` are the composite permutations that map sorted positions to
/// rows and columns of `theta_star`: for data `y = theta*(q1, q2) + noise`
/// and sorting estimates `p1_hat`, `p2_hat` of `y`, pass `q1 . p1_hat` and
/// `q2 . p2_hat`. The flip reverses the estimated order, so exact recovery
/// up to reversal gives 0 even when `theta*` has tied rows.
pub fn perm_approx_error(theta_star: &DenseMatrix, p1: &Permutation, p2: &Permutation) -> Result<f64> {
    let (n1, n2) = theta_star.shape();
    let flips1 = [p1.clone(), p1.compose(&Permutation::reversal(n1))];
    let flips2 = [p2.clone(), p2.compose(&Permutation::reversal(n2))];
    let mut best = f64::INFINITY;
    for a in &flips1 {
        for b in &flips2 {
            let d = apply_permutations(theta_star, a, b)?.dist_sq(theta_star)?;
            best = best.min(d);
        }
    }
    Ok(best / (n1 * n2) as f64)
}

fn check_centered(theta: &DenseMatrix) -> Result<()> {
    let worst = theta
        .row_sums()
        .into_iter()
        .chain(theta.col_sums())
        .fold(0.0f64, |m, s| m.max(s.abs()));
    let n = theta.n_rows().max(theta.n_cols()) as f64;
    if worst > 1e-8 * n * (1.0 + theta.max_abs()) {
        return Err(MongeError::NotCentered(worst));
    }
    Ok(())
}

/// `f[i, j] = sum_k (theta[i,k] - theta[j,k])^2` for a double-centered
/// `theta`.
pub fn row_discrepancy(theta: &DenseMatrix) -> Result<DenseMatrix> {
    check_centered(theta)?;
    Ok(pairwise_sq_dist(theta))
}

/// Orders the rows of a similarity matrix by the entries of the leading
/// eigenvector of its double-centered version, ascending. The sign of the
/// eigenvector is arbitrary, so the order is only defined up to reversal.
pub fn spectral_order(gram: &DenseMatrix) -> Result<Permutation> {
    let n = gram.n_rows();
    if n != gram.n_cols() {
        return Err(MongeError::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", gram.n_rows(), gram.n_cols()),
        });
    }
    if n <= 1 {
        return Ok(Permutation::identity(n));
    }
    let (_, vecs) = symmetric_eigen(&double_center(gram))?;
    let lead = vecs.column(0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lead[a].total_cmp(&lead[b]));
    Permutation::new(order)
}

/// Largest `n1! * n2!` accepted by [`brute_force_gls`].
pub const GLS_MAX_PAIRS: usize = 10_000;

fn factorial(n: usize) -> Option<usize> {
    (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k))
}

fn all_permutations(n: usize) -> Vec<Permutation> {
    fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
        if prefix.len() == used.len() {
            out.push(Permutation::new(prefix.clone()).expect("built from distinct indices"));
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                extend(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

#[derive(Clone, Debug)]
pub struct GlsOutput {
    pub estimate: DenseMatrix,
    pub row_perm: Permutation,
    pub col_perm: Permutation,
    pub residual: f64,
    /// Whether every one of the `n1! n2!` projections converged.
    pub converged: bool,
}

/// Global least squares over all row and column orders: projects
/// `y(p1, p2)` for every pair and keeps the best fit, aligned with `y`.
pub fn brute_force_gls_detailed(y: &DenseMatrix, v0: Option<f64>, cfg: &DykstraConfig) -> Result<GlsOutput> {
    let (n1, n2) = y.shape();
    let pairs = factorial(n1)
        .zip(factorial(n2))
        .and_then(|(a, b)| a.checked_mul(b))
        .unwrap_or(usize::MAX);
    if pairs > GLS_MAX_PAIRS {
        return Err(MongeError::ConstraintBudget {
            constraints: pairs,
            max: GLS_MAX_PAIRS,
        });
    }
    let cfg = cfg.with_v_max(v0);
    let cols = all_permutations(n2);
    let mut best: Option<GlsOutput> = None;
    let mut all_converged = true;
    for p1 in all_permutations(n1) {
        for p2 in &cols {
            let z = apply_permutations(y, &p1, p2)?;
            let fit = project_anti_monge(&z, &cfg)?;
            all_converged &= fit.converged;
            let residual = fit.estimate.dist_sq(&z)?;
            if best.as_ref().is_none_or(|b| residual < b.residual) {
                best = Some(GlsOutput {
                    estimate: apply_permutations(&fit.estimate, &p1.inverse(), &p2.inverse())?,
                    row_perm: p1.clone(),
                    col_perm: p2.clone(),
                    residual,
                    converged: false,
                });
            }
        }
    }
    let mut best = best.expect("at least the identity pair was tried");
    best.converged = all_converged;
    Ok(best)
}

/// [`brute_force_gls_detailed`], failing if any projection did not converge.
pub fn brute_force_gls(y: &DenseMatrix, v0: Option<f64>, cfg: &DykstraConfig) -> Result<DenseMatrix> {
    let out = brute_force_gls_detailed(y, v0, cfg)?;
    if !out.converged {
        return Err(MongeError::NoConvergence("projection inside the least-squares oracle"));
    }
    Ok(out.estimate)
}
