//! Ground-truth generators, Gaussian noise and random shuffles, all driven
//! by a seeded counter-based generator so that every replicate is
//! reproducible on its own stream.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{MongeError, Result};
use crate::geometry::pinv_gram;
use crate::linalg::{apply_permutations, double_center, DenseMatrix, Permutation};

/// ChaCha8 keyed by `seed` on the independent stream `stream_id`.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(MongeError::InvalidParameter(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 {
        return Err(MongeError::TooSmall {
            what: "generator size n",
            min: 2,
            got: n,
        });
    }
    Ok(())
}

/// Staircase product matrix before centering:
/// `(v / floor(k)^2) * floor(i k / (n-1)) * floor(j k / (n-1))` for 0-based
/// `i, j`, with `k = (v n / sigma)^(1/3)`.
pub fn theta1_uncentered(n: usize, v: f64, sigma: f64) -> Result<DenseMatrix> {
    check_size(n)?;
    check_positive("v", v)?;
    check_positive("sigma", sigma)?;
    let k = (v * n as f64 / sigma).cbrt();
    let k_floor = k.floor();
    if k_floor < 1.0 {
        return Err(MongeError::InvalidParameter(format!(
            "v * n / sigma = {} is below 1, the staircase would be empty",
            v * n as f64 / sigma
        )));
    }
    let steps: Vec<f64> = (0..n)
        .map(|i| (i as f64 * k / (n - 1) as f64).floor())
        .collect();
    let pref = v / (k_floor * k_floor);
    Ok(DenseMatrix::from_fn(n, n, |i, j| pref * steps[i] * steps[j]))
}

/// Double-centered staircase ground truth for the cone experiments.
pub fn gen_theta1(n: usize, v: f64, sigma: f64) -> Result<DenseMatrix> {
    Ok(double_center(&theta1_uncentered(n, v, sigma)?))
}

/// `(v / (n-1)) D^+ (D^+)^T`: second differences `(v/(n-1)) I`, variation
/// exactly `v`, zero row and column sums.
pub fn gen_theta2(n: usize, v: f64) -> Result<DenseMatrix> {
    check_size(n)?;
    check_positive("v", v)?;
    Ok(pinv_gram(n)?.scale(v / (n - 1) as f64))
}

/// I.i.d. `N(0, sigma^2)` entries; `sigma` is the standard deviation.
pub fn gaussian_noise(n1: usize, n2: usize, sigma: f64, rng: &mut SeededRng) -> Result<DenseMatrix> {
    check_positive("sigma", sigma)?;
    Ok(DenseMatrix::from_fn(n1, n2, |_, _| {
        sigma * rng.sample::<f64, _>(StandardNormal)
    }))
}

/// A random cone member with its construction recorded.
#[derive(Clone, Debug)]
pub struct RandomAntiMonge {
    pub matrix: DenseMatrix,
    /// Double cumulative sum of the drawn second differences (zero first
    /// row and column).
    pub isotone_core: DenseMatrix,
    /// Sum of the drawn second differences.
    pub variation: f64,
}

/// Draws second differences uniformly in `[0, scale]`, integrates them
/// twice and adds random constant-row and constant-column terms.
pub fn random_anti_monge(n1: usize, n2: usize, scale: f64, rng: &mut SeededRng) -> Result<RandomAntiMonge> {
    if n1 < 2 || n2 < 2 {
        return Err(MongeError::TooSmall {
            what: "matrix dimension",
            min: 2,
            got: n1.min(n2),
        });
    }
    check_positive("scale", scale)?;
    let mut core = DenseMatrix::zeros(n1, n2);
    let mut total = 0.0;
    for i in 1..n1 {
        for j in 1..n2 {
            let inc = rng.random_range(0.0..=scale);
            total += inc;
            core[(i, j)] = inc + core[(i - 1, j)] + core[(i, j - 1)] - core[(i - 1, j - 1)];
        }
    }
    let row_shift: Vec<f64> = (0..n1).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    let col_shift: Vec<f64> = (0..n2).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    let matrix = DenseMatrix::from_fn(n1, n2, |i, j| core[(i, j)] + row_shift[i] + col_shift[j]);
    Ok(RandomAntiMonge {
        matrix,
        isotone_core: core,
        variation: total,
    })
}

/// Uniform random permutation (Fisher-Yates).
pub fn random_permutation(n: usize, rng: &mut SeededRng) -> Permutation {
    let mut map: Vec<usize> = (0..n).collect();
    map.shuffle(rng);
    Permutation::new(map).expect("a shuffled range is a permutation")
}

/// Returns `(m(p1, p2), p1, p2)` for uniform random `p1`, `p2`.
pub fn random_shuffle(m: &DenseMatrix, rng: &mut SeededRng) -> (DenseMatrix, Permutation, Permutation) {
    let p1 = random_permutation(m.n_rows(), rng);
    let p2 = random_permutation(m.n_cols(), rng);
    let shuffled = apply_permutations(m, &p1, &p2).expect("permutation sizes match by construction");
    (shuffled, p1, p2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{decompose, is_anti_monge, variation_l1};
    use crate::linalg::{d_singular_values, second_difference, symmetric_eigen};

    #[test]
    fn theta1_hand_evaluation() {
        // k = 9^(1/3) ~ 2.08, floor 2: corner = (1/4) * 2 * 2.
        let raw = theta1_uncentered(9, 1.0, 1.0).unwrap();
        assert_eq!(raw[(0, 0)], 0.0);
        assert_eq!(raw[(8, 8)], 1.0);
        // Integer k: v n / sigma = 8 gives k = 2 exactly and corner v.
        let raw = theta1_uncentered(8, 1.0, 1.0).unwrap();
        assert_eq!(raw[(7, 7)], 1.0);
        assert!(gen_theta1(4, 0.1, 1.0).is_err());
    }

    #[test]
    fn theta1_is_centered_cone_member() {
        for &(n, v, s) in &[(10, 1.0, 1.0), (37, 5.0, 0.3), (50, 2e6, 1.0)] {
            let t = gen_theta1(n, v, s).unwrap();
            assert!(is_anti_monge(&t, 1e-12 * (1.0 + t.max_abs())).unwrap());
            for x in t.row_sums().into_iter().chain(t.col_sums()) {
                assert!(x.abs() < 1e-10 * (1.0 + t.max_abs()) * n as f64);
            }
        }
    }

    #[test]
    fn theta2_structure() {
        let n = 12;
        let t = gen_theta2(n, 3.0).unwrap();
        let sd = second_difference(&t).unwrap();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let e = if i == j { 3.0 / (n - 1) as f64 } else { 0.0 };
                assert!((sd[(i, j)] - e).abs() < 1e-10);
            }
        }
        assert!(t.dist_sq(&t.transpose()).unwrap().sqrt() < 1e-12);
        assert!((variation_l1(&t) - 3.0).abs() < 1e-10);
        // Eigenvalues are (v/(n-1)) / s_i^2 for the singular values s_i of D.
        let (mu, _) = symmetric_eigen(&t).unwrap();
        let s = d_singular_values(n).unwrap();
        for (m, si) in mu.iter().zip(&s) {
            let e = 3.0 / (n - 1) as f64 / (si * si);
            assert!((m - e).abs() < 1e-9 * e);
        }
    }

    #[test]
    fn noise_is_deterministic_per_stream() {
        let a = gaussian_noise(3, 4, 1.0, &mut SeededRng::new(7, 2)).unwrap();
        let b = gaussian_noise(3, 4, 1.0, &mut SeededRng::new(7, 2)).unwrap();
        let c = gaussian_noise(3, 4, 1.0, &mut SeededRng::new(7, 3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(gaussian_noise(2, 2, 0.0, &mut SeededRng::new(0, 0)).is_err());
    }

    #[test]
    fn noise_moments() {
        let sigma = 2.5;
        let e = gaussian_noise(1000, 1000, sigma, &mut SeededRng::new(11, 0)).unwrap();
        let n = 1e6;
        let mean = e.sum() / n;
        let sd = (e.frobenius_norm_sq() / n - mean * mean).sqrt();
        assert!(mean.abs() < 4.0 * sigma / 1e3);
        assert!((sd - sigma).abs() < 0.01 * sigma);
    }

    #[test]
    fn random_anti_monge_bookkeeping() {
        let mut rng = SeededRng::new(3, 0);
        for _ in 0..20 {
            let r = random_anti_monge(5, 7, 0.7, &mut rng).unwrap();
            assert!(is_anti_monge(&r.matrix, 1e-12).unwrap());
            assert!((variation_l1(&r.matrix) - r.variation).abs() < 1e-9);
            let b = decompose(&r.matrix).isotone_part;
            assert!(b.dist_sq(&r.isotone_core).unwrap().sqrt() < 1e-9);
        }
    }

    #[test]
    fn shuffle_inverts() {
        let m = DenseMatrix::from_fn(4, 6, |i, j| (i * 6 + j) as f64);
        let (s, p1, p2) = random_shuffle(&m, &mut SeededRng::new(1, 1));
        let back = apply_permutations(&s, &p1.inverse(), &p2.inverse()).unwrap();
        assert_eq!(back, m);
        let one = DenseMatrix::constant(1, 1, 4.0);
        assert_eq!(random_shuffle(&one, &mut SeededRng::new(1, 1)).0, one);
    }

    #[test]
    fn shuffle_is_uniform_over_orderings() {
        let mut rng = SeededRng::new(99, 0);
        let mut counts = std::collections::HashMap::new();
        let draws = 10_000;
        for _ in 0..draws {
            *counts.entry(random_permutation(3, &mut rng)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = draws as f64 / 6.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99.9% quantile of chi-square with 5 degrees of freedom.
        assert!(chi2 < 20.52, "chi2 = {chi2}");
    }
}
