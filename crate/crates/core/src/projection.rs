//! Euclidean projection onto the anti-Monge cone, optionally intersected
//! with a variation cap, by Dykstra's algorithm; plus an exhaustive
//! active-set solver for tiny instances.
//!
//! Two splittings of the cone are available:
//!
//! * [`DykstraScheme::Blocks`] cycles over the `(n1-1)(n2-1)` halfspaces
//!   `a + d - b - c >= 0`, one per contiguous 2x2 block. The normal of each
//!   is the stencil `[[+1, -1], [-1, +1]]`, so a block's Dykstra residual is
//!   a scalar multiple of the stencil and is stored as one number.
//! * [`DykstraScheme::Strips`] cycles over four sets: even and odd adjacent
//!   row pairs, then even and odd adjacent column pairs. A pair of rows
//!   `(a, b)` is feasible iff `b - a` is nondecreasing, so projecting onto a
//!   set of disjoint pairs is one isotonic regression per pair. Both splittings
//!   intersect to the same cone and converge to the same projection; the
//!   strips converge in far fewer (more expensive) sweeps on large matrices.

use serde::{Deserialize, Serialize};

use crate::error::{MongeError, Result};
use crate::linalg::DenseMatrix;

/// Which family of convex sets Dykstra's algorithm cycles over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DykstraScheme {
    /// One halfspace per contiguous 2x2 block, swept row-major.
    #[default]
    Blocks,
    /// Row-pair and column-pair monotone-difference sets, each projected
    /// exactly by pool-adjacent-violators.
    Strips,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DykstraConfig {
    /// Largest admissible violation `max(0, -min second difference)`.
    pub feas_tol: f64,
    /// Largest admissible Frobenius distance between successive sweeps.
    pub drift_tol: f64,
    pub max_sweeps: usize,
    /// Optional cap `V0` on the corner variation.
    pub v_max: Option<f64>,
    pub scheme: DykstraScheme,
}

impl Default for DykstraConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            drift_tol: 1e-10,
            max_sweeps: 100_000,
            v_max: None,
            scheme: DykstraScheme::Blocks,
        }
    }
}

impl DykstraConfig {
    pub fn with_v_max(mut self, v_max: Option<f64>) -> Self {
        self.v_max = v_max;
        self
    }

    pub fn with_scheme(mut self, scheme: DykstraScheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Multiplies both stopping tolerances by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.feas_tol *= factor;
        self.drift_tol *= factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MongeError::InvalidParameter(msg));
        if !(self.feas_tol >= 0.0) || !(self.drift_tol >= 0.0) {
            return bad("tolerances must be nonnegative".into());
        }
        if self.feas_tol.is_infinite() && self.drift_tol.is_infinite() {
            return bad("at least one stopping tolerance must be finite".into());
        }
        if self.max_sweeps == 0 {
            return bad("max_sweeps must be at least 1".into());
        }
        if let Some(v) = self.v_max {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("v_max must be a nonnegative finite number, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ProjectionResult {
    pub estimate: DenseMatrix,
    pub sweeps_used: usize,
    /// `max(0, -min second difference)`, also counting the excess of the
    /// corner variation over `v_max` when a cap is set.
    pub final_feasibility_gap: f64,
    /// Frobenius distance between the last two sweeps.
    pub final_drift: f64,
    pub converged: bool,
}

impl ProjectionResult {
    /// Turns a non-converged result into an error.
    pub fn into_converged(self) -> Result<DenseMatrix> {
        if self.converged {
            Ok(self.estimate)
        } else {
            Err(MongeError::ProjectionNotConverged {
                sweeps: self.sweeps_used,
                gap: self.final_feasibility_gap,
                drift: self.final_drift,
            })
        }
    }
}

/// Projects the block `[[a, b], [c, d]]` onto `{a + d - b - c >= 0}`.
pub fn project_block_2x2(a: f64, b: f64, c: f64, d: f64) -> (f64, f64, f64, f64) {
    let g = (-(a + d - b - c)).max(0.0) / 4.0;
    (a + g, b - g, c - g, d + g)
}

fn corner_variation(theta: &[f64], n1: usize, n2: usize) -> f64 {
    theta[0] + theta[n1 * n2 - 1] - theta[(n1 - 1) * n2] - theta[n2 - 1]
}

fn feasibility_gap(theta: &[f64], n1: usize, n2: usize, v_max: Option<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n1 - 1 {
        let (top, bottom) = (&theta[i * n2..(i + 1) * n2], &theta[(i + 1) * n2..(i + 2) * n2]);
        for j in 0..n2 - 1 {
            worst = worst.max(-(top[j] + bottom[j + 1] - top[j + 1] - bottom[j]));
        }
    }
    if let Some(v) = v_max {
        worst = worst.max(corner_variation(theta, n1, n2) - v);
    }
    worst
}

/// Dykstra projection of `y` onto `{D theta D~^T >= 0}` (and, with
/// `cfg.v_max`, onto the corner cap as one more halfspace in the cycle).
///
/// `cfg.scheme` picks the splitting (see the module docs). A run has converged once both the
/// feasibility gap and the sweep-to-sweep drift are within tolerance.
pub fn project_anti_monge(y: &DenseMatrix, cfg: &DykstraConfig) -> Result<ProjectionResult> {
    cfg.validate()?;
    let (n1, n2) = y.shape();
    if n1 < 2 || n2 < 2 {
        return Ok(ProjectionResult {
            estimate: y.clone(),
            sweeps_used: 0,
            final_feasibility_gap: 0.0,
            final_drift: 0.0,
            converged: true,
        });
    }

    let mut theta = y.clone().into_vec();
    let mut prev = theta.clone();
    let mut cap = CapResidual::default();
    let mut sweeper: Box<dyn FnMut(&mut [f64])> = match cfg.scheme {
        DykstraScheme::Blocks => {
            let mut eta = vec![0.0f64; (n1 - 1) * (n2 - 1)];
            Box::new(move |theta: &mut [f64]| block_sweep(theta, n1, n2, &mut eta))
        }
        DykstraScheme::Strips => {
            let mut strips = StripState::new(n1, n2);
            Box::new(move |theta: &mut [f64]| strips.sweep(theta))
        }
    };

    let mut gap = f64::INFINITY;
    let mut drift = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        sweeper(&mut theta);
        if let Some(v) = cfg.v_max {
            cap.step(&mut theta, n1, n2, v);
        }

        drift = theta
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if drift <= cfg.drift_tol {
            gap = feasibility_gap(&theta, n1, n2, cfg.v_max);
            if gap <= cfg.feas_tol {
                break;
            }
        }
        prev.copy_from_slice(&theta);
    }
    if !gap.is_finite() {
        gap = feasibility_gap(&theta, n1, n2, cfg.v_max);
    }
    let converged = gap <= cfg.feas_tol && drift <= cfg.drift_tol;
    Ok(ProjectionResult {
        estimate: DenseMatrix::new(n1, n2, theta)?,
        sweeps_used: sweeps,
        final_feasibility_gap: gap,
        final_drift: drift,
        converged,
    })
}

/// One row-major pass over the 2x2 blocks, each a Dykstra step with a
/// scalar residual.
fn block_sweep(theta: &mut [f64], n1: usize, n2: usize, eta: &mut [f64]) {
    for i in 0..n1 - 1 {
        let (head, tail) = theta.split_at_mut((i + 1) * n2);
        let top = &mut head[i * n2..];
        let bottom = &mut tail[..n2];
        let eta_row = &mut eta[i * (n2 - 1)..(i + 1) * (n2 - 1)];
        for j in 0..n2 - 1 {
            let sd = top[j] + bottom[j + 1] - top[j + 1] - bottom[j];
            let old = eta_row[j];
            let new = (old - sd / 4.0).max(0.0);
            let step = new - old;
            if step != 0.0 {
                top[j] += step;
                bottom[j + 1] += step;
                top[j + 1] -= step;
                bottom[j] -= step;
                eta_row[j] = new;
            }
        }
    }
}

/// Dykstra residual for the halfspace `{corner variation <= v}`, whose
/// normal is `+1, -1, -1, +1` on the four corners. The residual is
/// `-eta * normal`.
#[derive(Default)]
struct CapResidual {
    eta: f64,
}

impl CapResidual {
    fn step(&mut self, theta: &mut [f64], n1: usize, n2: usize, v: f64) {
        let excess = corner_variation(theta, n1, n2) - v;
        let new = (self.eta + excess / 4.0).max(0.0);
        let step = new - self.eta;
        if step != 0.0 {
            theta[0] -= step;
            theta[n2 - 1] += step;
            theta[(n1 - 1) * n2] += step;
            theta[n1 * n2 - 1] -= step;
            self.eta = new;
        }
    }
}

/// Unweighted isotonic (nondecreasing) least-squares fit, in place.
pub fn isotonic_regression(values: &mut [f64]) {
    let mut pava = Pava::default();
    pava.fit(values);
}

/// Pool-adjacent-violators with reusable block storage.
#[derive(Default)]
struct Pava {
    means: Vec<f64>,
    counts: Vec<usize>,
}

impl Pava {
    fn fit(&mut self, values: &mut [f64]) {
        self.means.clear();
        self.counts.clear();
        for &x in values.iter() {
            let mut mean = x;
            let mut count = 1usize;
            while let Some(&last) = self.means.last() {
                if last <= mean {
                    break;
                }
                let c = self.counts.pop().expect("counts track means");
                self.means.pop();
                mean = (last * c as f64 + mean * count as f64) / (c + count) as f64;
                count += c;
            }
            self.means.push(mean);
            self.counts.push(count);
        }
        let mut k = 0;
        for (&m, &c) in self.means.iter().zip(&self.counts) {
            values[k..k + c].fill(m);
            k += c;
        }
    }
}

/// Residuals and scratch space for the row-pair / column-pair splitting.
///
/// For a pair `(a, b)` the Dykstra residual is `(-q, +q)`, so one vector
/// `q` per pair is stored: `(n1-1) x n2` for row pairs and `(n2-1) x n1`
/// for column pairs.
struct StripState {
    n1: usize,
    n2: usize,
    row_q: Vec<f64>,
    col_q: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    diff: Vec<f64>,
    fitted: Vec<f64>,
    pava: Pava,
}

impl StripState {
    fn new(n1: usize, n2: usize) -> Self {
        let len = n1.max(n2);
        Self {
            n1,
            n2,
            row_q: vec![0.0; (n1 - 1) * n2],
            col_q: vec![0.0; (n2 - 1) * n1],
            a: vec![0.0; len],
            b: vec![0.0; len],
            diff: vec![0.0; len],
            fitted: vec![0.0; len],
            pava: Pava::default(),
        }
    }

    /// Projects the shifted pair `(a - q, b + q)` onto `{b - a nondecreasing}`
    /// and updates `q`. `a` and `b` hold the current iterate on entry and the
    /// projection on exit.
    fn project_pair(
        pava: &mut Pava,
        a: &mut [f64],
        b: &mut [f64],
        q: &mut [f64],
        diff: &mut [f64],
        fitted: &mut [f64],
    ) {
        for k in 0..a.len() {
            a[k] -= q[k];
            b[k] += q[k];
            diff[k] = b[k] - a[k];
        }
        fitted.copy_from_slice(diff);
        pava.fit(fitted);
        for k in 0..a.len() {
            let half = 0.5 * (diff[k] - fitted[k]);
            a[k] += half;
            b[k] -= half;
            q[k] = half;
        }
    }

    fn sweep(&mut self, theta: &mut [f64]) {
        let (n1, n2) = (self.n1, self.n2);
        for parity in 0..2 {
            for i in (parity..n1 - 1).step_by(2) {
                let (head, tail) = theta.split_at_mut((i + 1) * n2);
                Self::project_pair(
                    &mut self.pava,
                    &mut head[i * n2..],
                    &mut tail[..n2],
                    &mut self.row_q[i * n2..(i + 1) * n2],
                    &mut self.diff[..n2],
                    &mut self.fitted[..n2],
                );
            }
        }
        for parity in 0..2 {
            for j in (parity..n2 - 1).step_by(2) {
                let (a, b) = (&mut self.a[..n1], &mut self.b[..n1]);
                for i in 0..n1 {
                    a[i] = theta[i * n2 + j];
                    b[i] = theta[i * n2 + j + 1];
                }
                Self::project_pair(
                    &mut self.pava,
                    a,
                    b,
                    &mut self.col_q[j * n1..(j + 1) * n1],
                    &mut self.diff[..n1],
                    &mut self.fitted[..n1],
                );
                for i in 0..n1 {
                    theta[i * n2 + j] = a[i];
                    theta[i * n2 + j + 1] = b[i];
                }
            }
        }
    }
}

/// Largest number of inequality constraints the exhaustive oracle accepts.
pub const ORACLE_MAX_CONSTRAINTS: usize = 12;

/// Exact projection for tiny problems by enumerating active sets.
///
/// Every constraint is `<a_k, theta> >= b_k`. For each subset `A` the
/// equality-constrained problem has the closed form
/// `theta = y + A^T lambda` with `(A A^T) lambda = b_A - A y`; the answer is
/// the candidate with `lambda >= 0` that satisfies all constraints.
pub fn qp_projection_oracle(y: &DenseMatrix, v_max: Option<f64>) -> Result<DenseMatrix> {
    let (n1, n2) = y.shape();
    if n1 < 2 || n2 < 2 {
        return Ok(y.clone());
    }
    let mut normals: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for i in 0..n1 - 1 {
        for j in 0..n2 - 1 {
            normals.push(vec![
                (i * n2 + j, 1.0),
                (i * n2 + j + 1, -1.0),
                ((i + 1) * n2 + j, -1.0),
                ((i + 1) * n2 + j + 1, 1.0),
            ]);
            rhs.push(0.0);
        }
    }
    if let Some(v) = v_max {
        normals.push(vec![
            (0, -1.0),
            (n2 - 1, 1.0),
            ((n1 - 1) * n2, 1.0),
            (n1 * n2 - 1, -1.0),
        ]);
        rhs.push(-v);
    }
    let k = normals.len();
    if k > ORACLE_MAX_CONSTRAINTS {
        return Err(MongeError::ConstraintBudget {
            constraints: k,
            max: ORACLE_MAX_CONSTRAINTS,
        });
    }

    let yv = y.as_slice();
    let apply = |a: &[(usize, f64)], x: &[f64]| a.iter().map(|&(idx, w)| w * x[idx]).sum::<f64>();
    let scale = 1.0 + y.max_abs() + v_max.unwrap_or(0.0).abs();
    let tol = 1e-9 * scale;

    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << k) {
        let active: Vec<usize> = (0..k).filter(|&c| mask & (1 << c) != 0).collect();
        let mut theta = yv.to_vec();
        if !active.is_empty() {
            let m = active.len();
            let mut gram = nalgebra::DMatrix::<f64>::zeros(m, m);
            let mut r = nalgebra::DVector::<f64>::zeros(m);
            for (p, &cp) in active.iter().enumerate() {
                r[p] = rhs[cp] - apply(&normals[cp], yv);
                for (q, &cq) in active.iter().enumerate() {
                    let mut s = 0.0;
                    for &(ia, wa) in &normals[cp] {
                        for &(ib, wb) in &normals[cq] {
                            if ia == ib {
                                s += wa * wb;
                            }
                        }
                    }
                    gram[(p, q)] = s;
                }
            }
            // Singular systems are covered by a smaller, independent active set.
            let Some(lambda) = gram.clone().full_piv_lu().solve(&r) else {
                continue;
            };
            if (&gram * &lambda - &r).amax() > 1e-9 * (1.0 + r.amax()) {
                continue;
            }
            if lambda.iter().any(|&l| l < -tol) {
                continue;
            }
            for (p, &cp) in active.iter().enumerate() {
                for &(idx, w) in &normals[cp] {
                    theta[idx] += w * lambda[p];
                }
            }
        }
        let feasible = (0..k).all(|c| apply(&normals[c], &theta) >= rhs[c] - tol);
        if !feasible {
            continue;
        }
        let obj: f64 = theta.iter().zip(yv).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, theta));
        }
    }
    let (_, theta) = best.ok_or(MongeError::NoConvergence("active-set enumeration"))?;
    DenseMatrix::new(n1, n2, theta)
}
