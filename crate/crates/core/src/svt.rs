//! Singular value thresholding. Thresholding acts on the spectrum only, so
//! the estimators commute with row and column permutations and need no
//! ordering step.

use serde::{Deserialize, Serialize};

use crate::error::{MongeError, Result};
use crate::linalg::{full_svd, DenseMatrix};

/// Default `c` in the scaled threshold `c * sigma * sqrt(max(n1, n2))`.
pub const DEFAULT_SVT_CONSTANT: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    Explicit { rho: f64 },
    /// `rho = c * sigma * sqrt(max(n1, n2))`, with `sigma` the noise
    /// standard deviation.
    Scaled { c: f64, sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SvtVariant {
    /// Keep components with singular value strictly above `rho`.
    Hard,
    /// Shrink every singular value by `rho`, flooring at zero.
    Soft,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvtConfig {
    pub threshold: ThresholdMode,
    pub variant: SvtVariant,
}

impl SvtConfig {
    pub fn scaled(sigma: f64, variant: SvtVariant) -> Self {
        Self {
            threshold: ThresholdMode::Scaled {
                c: DEFAULT_SVT_CONSTANT,
                sigma,
            },
            variant,
        }
    }

    pub fn explicit(rho: f64, variant: SvtVariant) -> Self {
        Self {
            threshold: ThresholdMode::Explicit { rho },
            variant,
        }
    }

    /// The numeric threshold for an `n1 x n2` input.
    pub fn resolve(&self, n1: usize, n2: usize) -> Result<f64> {
        let bad = |msg: String| Err(MongeError::InvalidParameter(msg));
        match self.threshold {
            ThresholdMode::Explicit { rho } => {
                if !(rho >= 0.0) || !rho.is_finite() {
                    return bad(format!("threshold must be nonnegative and finite, got {rho}"));
                }
                Ok(rho)
            }
            ThresholdMode::Scaled { c, sigma } => {
                if !(c > 0.0) || !c.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
                    return bad(format!("c and sigma must be positive and finite, got c={c}, sigma={sigma}"));
                }
                Ok(c * sigma * (n1.max(n2) as f64).sqrt())
            }
        }
    }
}

fn threshold_with(y: &DenseMatrix, cfg: &SvtConfig, g: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
    let (n1, n2) = y.shape();
    let rho = cfg.resolve(n1, n2)?;
    // The wide case is handled in its transposed orientation so that the
    // factorization is always of a tall matrix.
    if n2 > n1 {
        return Ok(full_svd(&y.transpose())?.reconstruct_with(|s| g(s, rho)).transpose());
    }
    Ok(full_svd(y)?.reconstruct_with(|s| g(s, rho)))
}

/// `sum_i 1{s_i > rho} s_i u_i v_i^T`.
pub fn svt_hard(y: &DenseMatrix, cfg: &SvtConfig) -> Result<DenseMatrix> {
    threshold_with(y, cfg, |s, rho| if s > rho { s } else { 0.0 })
}

/// `sum_i max(s_i - rho, 0) u_i v_i^T`.
pub fn svt_soft(y: &DenseMatrix, cfg: &SvtConfig) -> Result<DenseMatrix> {
    threshold_with(y, cfg, |s, rho| (s - rho).max(0.0))
}

/// Dispatches on `cfg.variant`.
pub fn svt(y: &DenseMatrix, cfg: &SvtConfig) -> Result<DenseMatrix> {
    match cfg.variant {
        SvtVariant::Hard => svt_hard(y, cfg),
        SvtVariant::Soft => svt_soft(y, cfg),
    }
}
