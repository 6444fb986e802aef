//! Monte Carlo harness: sweep one parameter, run an estimator on fresh
//! noisy replicates, average the error and fit log-log slopes.
//!
//! Every replicate draws from its own RNG stream, numbered
//! `point_index * 2^32 + replicate`, and results are collected in job
//! order, so reports do not depend on scheduling or thread count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MongeError, Result};
use crate::geometry::worst_case_matrix;
use crate::linalg::{DenseMatrix, Permutation};
use crate::permutation::{brute_force_gls_detailed, main_algorithm_detailed, perm_approx_error, variance_sort};
use crate::projection::{project_anti_monge, DykstraConfig, DykstraScheme};
use crate::svt::{svt, SvtConfig, SvtVariant, ThresholdMode, DEFAULT_SVT_CONSTANT};
use crate::synthetic::{gaussian_noise, gen_theta1, gen_theta2, random_shuffle, SeededRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Theta1,
    Theta2,
    Worstcase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Projection of the unshuffled data onto the cone.
    LsDykstra,
    /// Error of the variance-sorting permutations alone.
    VsortPermError,
    /// Variance sorting followed by the two-orientation projection.
    VsortFull,
    SvtHard,
    SvtSoft,
    /// Exhaustive least squares over all orders; toy sizes only.
    GlsOracle,
}

impl Estimator {
    /// Whether the data are shuffled by random latent permutations.
    fn shuffles(self) -> bool {
        !matches!(self, Estimator::LsDykstra)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    N,
    V,
    Sigma,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedParams {
    pub n: usize,
    pub v: f64,
    pub sigma: f64,
    /// Variation cap for the projection estimators; `None` projects onto
    /// the whole cone.
    pub v0: Option<f64>,
    pub svt_c: f64,
}

impl Default for FixedParams {
    fn default() -> Self {
        Self {
            n: 50,
            v: 1.0,
            sigma: 1.0,
            v0: None,
            svt_c: DEFAULT_SVT_CONSTANT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub family: Family,
    pub estimator: Estimator,
    pub sweep: Sweep,
    #[serde(default)]
    pub fixed: FixedParams,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub dykstra: DykstraConfig,
    /// Multiply the projection tolerances by the noise level of each point.
    /// Projection is scale-equivariant, so this keeps the relative accuracy
    /// fixed across a sigma sweep.
    #[serde(default)]
    pub relative_tolerances: bool,
}

/// The parameters of one sweep point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointParams {
    pub n: usize,
    pub v: f64,
    pub sigma: f64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MongeError::InvalidParameter(msg));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.sweep.values.is_empty() {
            return bad("sweep needs at least one value".into());
        }
        for w in self.sweep.values.windows(2) {
            if !(w[1] > w[0]) {
                return bad(format!("sweep values must be strictly increasing ({} then {})", w[0], w[1]));
            }
        }
        if self.sweep.values.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return bad("sweep values must be positive and finite".into());
        }
        if self.fixed.svt_c <= 0.0 || !self.fixed.svt_c.is_finite() {
            return bad(format!("svt_c must be positive, got {}", self.fixed.svt_c));
        }
        self.dykstra.validate()?;
        for k in 0..self.sweep.values.len() {
            let p = self.point(k)?;
            if p.n < 2 {
                return bad(format!("n must be at least 2, got {}", p.n));
            }
            if !(p.v > 0.0) || !p.v.is_finite() || !(p.sigma > 0.0) || !p.sigma.is_finite() {
                return bad(format!("v and sigma must be positive, got v={}, sigma={}", p.v, p.sigma));
            }
        }
        Ok(())
    }

    /// Parameters at sweep index `k`.
    pub fn point(&self, k: usize) -> Result<PointParams> {
        let x = self.sweep.values[k];
        let mut p = PointParams {
            n: self.fixed.n,
            v: self.fixed.v,
            sigma: self.fixed.sigma,
        };
        match self.sweep.param {
            SweepParam::N => {
                if x.fract() != 0.0 {
                    return Err(MongeError::InvalidParameter(format!("n must be an integer, got {x}")));
                }
                p.n = x as usize;
            }
            SweepParam::V => p.v = x,
            SweepParam::Sigma => p.sigma = x,
        }
        Ok(p)
    }

    fn dykstra_for(&self, p: &PointParams) -> DykstraConfig {
        let cfg = self.dykstra.with_v_max(self.fixed.v0);
        if self.relative_tolerances {
            cfg.scaled(p.sigma)
        } else {
            cfg
        }
    }
}

/// Stream id of replicate `rep` at sweep index `point`.
pub fn stream_id(point: usize, rep: usize) -> u64 {
    ((point as u64) << 32) | rep as u64
}

pub fn ground_truth(family: Family, p: &PointParams) -> Result<DenseMatrix> {
    match family {
        Family::Theta1 => gen_theta1(p.n, p.v, p.sigma),
        Family::Theta2 => gen_theta2(p.n, p.v),
        Family::Worstcase => worst_case_matrix(p.n, p.v),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReplicateOutcome {
    pub error: f64,
    pub converged: bool,
}

/// Runs one replicate of `spec` at sweep index `point` on the given stream.
pub fn run_replicate(spec: &ExperimentSpec, point: usize, stream: u64) -> Result<ReplicateOutcome> {
    let p = spec.point(point)?;
    let theta = ground_truth(spec.family, &p)?;
    let mut rng = SeededRng::new(spec.seed, stream);
    let (target, q1, q2) = if spec.estimator.shuffles() {
        random_shuffle(&theta, &mut rng)
    } else {
        (theta.clone(), Permutation::identity(p.n), Permutation::identity(p.n))
    };
    let y = target.add(&gaussian_noise(p.n, p.n, p.sigma, &mut rng)?)?;
    let size = (p.n * p.n) as f64;
    let cfg = spec.dykstra_for(&p);
    let svt_cfg = |variant| SvtConfig {
        threshold: ThresholdMode::Scaled {
            c: spec.fixed.svt_c,
            sigma: p.sigma,
        },
        variant,
    };

    let (estimate, converged) = match spec.estimator {
        Estimator::LsDykstra => {
            let r = project_anti_monge(&y, &cfg)?;
            (r.estimate, r.converged)
        }
        Estimator::VsortPermError => {
            let p1 = variance_sort(&y)?.pi_hat;
            let p2 = variance_sort(&y.transpose())?.pi_hat;
            let error = perm_approx_error(&theta, &q1.compose(&p1), &q2.compose(&p2))?;
            return Ok(ReplicateOutcome { error, converged: true });
        }
        Estimator::VsortFull => {
            let r = main_algorithm_detailed(&y, spec.fixed.v0, &cfg)?;
            (r.estimate, r.converged)
        }
        Estimator::SvtHard => (svt(&y, &svt_cfg(SvtVariant::Hard))?, true),
        Estimator::SvtSoft => (svt(&y, &svt_cfg(SvtVariant::Soft))?, true),
        Estimator::GlsOracle => {
            let r = brute_force_gls_detailed(&y, spec.fixed.v0, &cfg)?;
            (r.estimate, r.converged)
        }
    };
    Ok(ReplicateOutcome {
        error: estimate.dist_sq(&target)? / size,
        converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopePoint {
    pub param: f64,
    pub mean_error: f64,
    /// Standard error of the mean over replicates (0 for one replicate).
    pub stderr: f64,
    pub replicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub points: Vec<SlopePoint>,
    /// OLS slope of log error on log parameter; `None` with fewer than two
    /// points.
    pub global_slope: Option<f64>,
    pub consecutive_slopes: Vec<f64>,
    /// Replicates whose projection did not converge.
    pub n_failed: usize,
}

impl SlopeReport {
    pub fn min_consecutive_slope(&self) -> Option<f64> {
        self.consecutive_slopes.iter().copied().reduce(f64::min)
    }

    pub fn max_consecutive_slope(&self) -> Option<f64> {
        self.consecutive_slopes.iter().copied().reduce(f64::max)
    }

    /// OLS slope restricted to the points with index `>= from`.
    pub fn slope_from(&self, from: usize) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self.points[from..].iter().map(|p| (p.param, p.mean_error)).collect();
        Ok(fit_loglog_slope(&pts)?.0)
    }

    /// Results table with columns `param,mean_error,stderr,replicates`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,mean_error,stderr,replicates\n");
        for p in &self.points {
            writeln!(out, "{},{},{},{}", p.param, p.mean_error, p.stderr, p.replicates).expect("writing to a String");
        }
        out
    }
}

/// OLS slope of `ln y` on `ln x`, and the slopes between adjacent points.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<(f64, Vec<f64>)> {
    if points.len() < 2 {
        return Err(MongeError::TooSmall {
            what: "number of points",
            min: 2,
            got: points.len(),
        });
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(MongeError::InvalidParameter(format!(
            "log-log fit needs positive coordinates, got ({x}, {y})"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(MongeError::InvalidParameter("all x values are equal".into()));
    }
    let consecutive = logs.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    Ok((sxy / sxx, consecutive))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Builds a report from per-point replicate outcomes.
pub fn aggregate(params: &[f64], outcomes: &[Vec<ReplicateOutcome>]) -> Result<SlopeReport> {
    let mut points = Vec::with_capacity(params.len());
    let mut n_failed = 0;
    for (&param, reps) in params.iter().zip(outcomes) {
        let errors: Vec<f64> = reps.iter().map(|o| o.error).collect();
        n_failed += reps.iter().filter(|o| !o.converged).count();
        let (mean_error, stderr) = mean_and_stderr(&errors);
        points.push(SlopePoint {
            param,
            mean_error,
            stderr,
            replicates: reps.len(),
        });
    }
    let (global_slope, consecutive_slopes) = if points.len() >= 2 {
        let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.param, p.mean_error)).collect();
        let (g, c) = fit_loglog_slope(&pts)?;
        (Some(g), c)
    } else {
        (None, Vec::new())
    };
    Ok(SlopeReport {
        points,
        global_slope,
        consecutive_slopes,
        n_failed,
    })
}

/// Runs every replicate of every sweep point and aggregates.
///
/// With `strict`, any non-converged projection turns the run into an
/// [`MongeError::ExperimentFailed`] error; otherwise failures are only
/// counted in `n_failed`. `threads = None` uses rayon's default pool size.
pub fn run_experiment(spec: &ExperimentSpec, strict: bool, threads: Option<usize>) -> Result<SlopeReport> {
    let report = run_experiment_lenient(spec, threads)?;
    if strict && report.n_failed > 0 {
        return Err(MongeError::ExperimentFailed {
            failed: report.n_failed,
            total: spec.replicates * spec.sweep.values.len(),
        });
    }
    Ok(report)
}

/// [`run_experiment`] without the strict check, so callers can still write
/// out a report that has failures.
pub fn run_experiment_lenient(spec: &ExperimentSpec, threads: Option<usize>) -> Result<SlopeReport> {
    spec.validate()?;
    let points = spec.sweep.values.len();
    let jobs = points * spec.replicates;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| MongeError::InvalidParameter(format!("thread pool: {e}")))?;
    let flat: Vec<ReplicateOutcome> = pool.install(|| {
        (0..jobs)
            .into_par_iter()
            .map(|job| {
                let (point, rep) = (job / spec.replicates, job % spec.replicates);
                run_replicate(spec, point, stream_id(point, rep))
            })
            .collect::<Result<_>>()
    })?;
    let outcomes: Vec<Vec<ReplicateOutcome>> = flat.chunks(spec.replicates).map(<[_]>::to_vec).collect();
    aggregate(&spec.sweep.values, &outcomes)
}

/// Report written next to the results table: the spec, the slopes and the
/// replicate counts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub report: SlopeReport,
    pub strict: bool,
    pub admissible: bool,
}

impl ExperimentReport {
    pub fn new(spec: ExperimentSpec, report: SlopeReport, strict: bool) -> Self {
        let admissible = report.n_failed == 0;
        Self {
            spec,
            report,
            strict,
            admissible,
        }
    }
}

/// Projection settings used by the presets: strips, tolerances relative to
/// sigma.
pub fn experiment_dykstra() -> DykstraConfig {
    DykstraConfig {
        feas_tol: 1e-3,
        drift_tol: 1e-3,
        max_sweeps: 100_000,
        v_max: None,
        scheme: DykstraScheme::Strips,
    }
}

fn geometric(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let steps = ((hi / lo).log10() * per_decade as f64).round() as usize;
    (0..=steps)
        .map(|k| lo * 10f64.powf(k as f64 / per_decade as f64))
        .collect()
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 6] = ["n-scaling", "v-scaling", "sigma-scaling", "plateau", "vsort", "svt"];

/// The named experiments of the acceptance suite.
///
/// `plateau` (V = 2e6) only leaves the `sigma^2` plateau once `n` passes
/// about `sqrt(V)`, so its grid runs to `n = 4000`; it takes tens of
/// minutes on one core.
pub fn preset(name: &str) -> Option<ExperimentSpec> {
    let base = |family, estimator, param, values: Vec<f64>, fixed, replicates| ExperimentSpec {
        family,
        estimator,
        sweep: Sweep { param, values },
        fixed,
        replicates,
        seed: 20_240_601,
        dykstra: experiment_dykstra(),
        relative_tolerances: true,
    };
    let fixed = |n, v, sigma| FixedParams {
        n,
        v,
        sigma,
        ..FixedParams::default()
    };
    use Estimator::*;
    use Family::*;
    use SweepParam::*;
    Some(match name {
        "n-scaling" => base(
            Theta1,
            LsDykstra,
            N,
            vec![10.0, 20.0, 40.0, 80.0, 160.0],
            fixed(0, 1.0, 1.0),
            20,
        ),
        "v-scaling" => base(Theta1, LsDykstra, V, geometric(1.0, 1e6, 2), fixed(200, 0.0, 1.0), 10),
        "sigma-scaling" => base(Theta1, LsDykstra, Sigma, geometric(1e-7, 1.0, 2), fixed(300, 1.0, 0.0), 5),
        "plateau" => base(
            Theta1,
            LsDykstra,
            N,
            vec![250.0, 500.0, 1000.0, 2000.0, 4000.0],
            fixed(0, 2e6, 1.0),
            2,
        ),
        "vsort" => base(
            Theta2,
            VsortPermError,
            N,
            vec![32.0, 64.0, 128.0, 256.0, 512.0],
            fixed(0, 1.0, 0.5),
            64,
        ),
        "svt" => base(
            Theta2,
            SvtHard,
            N,
            vec![20.0, 40.0, 80.0, 160.0, 320.0, 500.0],
            fixed(0, 1.0, 0.1),
            64,
        ),
        _ => return None,
    })
}
