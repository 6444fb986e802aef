use monge::linalg::{apply_permutations, full_svd, numerical_rank, second_difference, DenseMatrix, Permutation};
use monge::permutation::{
    brute_force_gls_detailed, main_algorithm_detailed, perm_approx_error, spectral_order, variance_sort, xi_statistic,
};
use monge::projection::DykstraConfig;
use monge::svt::{svt_hard, svt_soft, SvtConfig, SvtVariant};
use monge::synthetic::{gaussian_noise, gen_theta1, gen_theta2, random_permutation, random_shuffle, SeededRng};
use proptest::prelude::*;

fn matrix(rows: std::ops::RangeInclusive<usize>, cols: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = DenseMatrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-5.0f64..5.0, r * c).prop_map(move |v| DenseMatrix::new(r, c, v).unwrap())
    })
}

fn orthogonal(n: usize, seed: u64) -> DenseMatrix {
    let g = gaussian_noise(n, n, 1.0, &mut SeededRng::new(seed, 7)).unwrap();
    full_svd(&g).unwrap().left_vectors
}

fn hard(rho: f64) -> SvtConfig {
    SvtConfig::explicit(rho, SvtVariant::Hard)
}

fn soft(rho: f64) -> SvtConfig {
    SvtConfig::explicit(rho, SvtVariant::Soft)
}

fn tight() -> DykstraConfig {
    DykstraConfig {
        feas_tol: 1e-9,
        drift_tol: 1e-11,
        ..DykstraConfig::default()
    }
}

proptest! {
    #[test]
    fn xi_is_a_dissimilarity(
        y in matrix(2..=8, 2..=8),
        rows in prop::collection::vec(-50.0f64..50.0, 8),
        cols in prop::collection::vec(-50.0f64..50.0, 8),
        seed in any::<u64>(),
    ) {
        let xi = xi_statistic(&y).unwrap();
        let n = y.n_rows();
        let tol = 1e-9 * (1.0 + xi.max_abs());
        for i in 0..n {
            prop_assert_eq!(xi[(i, i)], 0.0);
            for j in 0..n {
                prop_assert!(xi[(i, j)] >= 0.0);
                prop_assert_eq!(xi[(i, j)], xi[(j, i)]);
            }
        }
        let shifted = DenseMatrix::from_fn(n, y.n_cols(), |i, j| y[(i, j)] + rows[i] + cols[j]);
        let moved = xi_statistic(&shifted).unwrap();
        prop_assert!(moved.sub(&xi).unwrap().max_abs() <= tol * 1e3);
        let mut rng = SeededRng::new(seed, 0);
        let (p, q) = (random_permutation(n, &mut rng), random_permutation(y.n_cols(), &mut rng));
        let permuted = xi_statistic(&apply_permutations(&y, &p, &q).unwrap()).unwrap();
        prop_assert!(permuted.sub(&apply_permutations(&xi, &p, &p).unwrap()).unwrap().max_abs() <= tol);
    }

    #[test]
    fn noiseless_recovery_up_to_reversal(n in 3usize..40, v in 0.1f64..100.0, stair in any::<bool>(), seed in any::<u64>()) {
        let theta = if stair { gen_theta1(n.max(8), v, 0.05).unwrap() } else { gen_theta2(n, v).unwrap() };
        let (y, q1, q2) = random_shuffle(&theta, &mut SeededRng::new(seed, 0));
        let p1 = variance_sort(&y).unwrap().pi_hat;
        let p2 = variance_sort(&y.transpose()).unwrap().pi_hat;
        let err = perm_approx_error(&theta, &q1.compose(&p1), &q2.compose(&p2)).unwrap();
        prop_assert!(err <= 1e-20 * (1.0 + theta.frobenius_norm_sq()), "{}", err);
    }

    #[test]
    fn perm_error_ignores_reversals(n in 2usize..20, seed in any::<u64>()) {
        let theta = gen_theta2(n, 3.0).unwrap();
        let mut rng = SeededRng::new(seed, 0);
        let (p1, p2) = (random_permutation(n, &mut rng), random_permutation(n, &mut rng));
        let rev = Permutation::reversal(n);
        let base = perm_approx_error(&theta, &p1, &p2).unwrap();
        prop_assert!(base >= 0.0);
        for (a, b) in [(p1.compose(&rev), p2.clone()), (p1.clone(), p2.compose(&rev)), (p1.compose(&rev), p2.compose(&rev))] {
            prop_assert!((perm_approx_error(&theta, &a, &b).unwrap() - base).abs() <= 1e-12 * (1.0 + base));
        }
        let id = Permutation::identity(n);
        prop_assert_eq!(perm_approx_error(&theta, &id, &id).unwrap(), 0.0);
    }

    #[test]
    fn spectral_order_is_equivariant(a in matrix(6..=6, 3..=3), seed in any::<u64>()) {
        let gram = a.matmul(&a.transpose()).unwrap();
        let rho = random_permutation(6, &mut SeededRng::new(seed, 0));
        let s = spectral_order(&gram).unwrap();
        let s_shuffled = spectral_order(&apply_permutations(&gram, &rho, &rho).unwrap()).unwrap();
        let back = rho.compose(&s_shuffled);
        prop_assert!(back == s || back == s.compose(&Permutation::reversal(6)));
    }

    #[test]
    fn svt_hard_rank_falls_with_threshold(y in matrix(2..=8, 2..=8), r1 in 0.0f64..10.0, r2 in 0.0f64..10.0) {
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        let tol = 1e-9 * (1.0 + y.frobenius_norm());
        let a = numerical_rank(&svt_hard(&y, &hard(lo)).unwrap(), tol).unwrap();
        let b = numerical_rank(&svt_hard(&y, &hard(hi)).unwrap(), tol).unwrap();
        prop_assert!(a >= b);
    }

    #[test]
    fn svt_soft_is_continuous(y1 in matrix(4..=4, 5..=5), y2 in matrix(4..=4, 5..=5), r1 in 0.0f64..10.0, r2 in 0.0f64..10.0) {
        let a = svt_soft(&y1, &soft(r1)).unwrap();
        let b = svt_soft(&y2, &soft(r1)).unwrap();
        prop_assert!(a.dist_sq(&b).unwrap().sqrt() <= y1.dist_sq(&y2).unwrap().sqrt() + 1e-9);
        let c = svt_soft(&y1, &soft(r2)).unwrap();
        prop_assert!(a.dist_sq(&c).unwrap().sqrt() <= 2.0 * (r1 - r2).abs() + 1e-9);
    }

    #[test]
    fn svt_commutes_with_rotations(y in matrix(5..=5, 4..=4), rho in 0.0f64..8.0, seed in any::<u64>()) {
        let s = full_svd(&y).unwrap().singular_values;
        prop_assume!(s.iter().all(|x| (x - rho).abs() > 1e-6));
        let (u, v) = (orthogonal(5, seed), orthogonal(4, seed ^ 1));
        let rotated = u.matmul(&y).unwrap().matmul(&v.transpose()).unwrap();
        for cfg in [hard(rho), soft(rho)] {
            let f = |m: &DenseMatrix| if cfg.variant == SvtVariant::Hard { svt_hard(m, &cfg) } else { svt_soft(m, &cfg) }.unwrap();
            let expected = u.matmul(&f(&y)).unwrap().matmul(&v.transpose()).unwrap();
            prop_assert!(f(&rotated).dist_sq(&expected).unwrap().sqrt() <= 1e-9 * (1.0 + y.frobenius_norm()));
        }
    }

    #[test]
    fn retained_components_are_strong(
        n in 6usize..20, v in 0.1f64..50.0, sigma in 0.01f64..1.0, c in 2.0f64..4.0, seed in any::<u64>(),
    ) {
        let theta = gen_theta2(n, v).unwrap();
        let noise = gaussian_noise(n, n, sigma, &mut SeededRng::new(seed, 0)).unwrap();
        let op = full_svd(&noise).unwrap().singular_values[0];
        let rho = c * op;
        let y = theta.add(&noise).unwrap();
        let kept = numerical_rank(&svt_hard(&y, &hard(rho)).unwrap(), 1e-9 * (1.0 + y.frobenius_norm())).unwrap();
        let s = full_svd(&theta).unwrap().singular_values;
        if kept > 0 {
            prop_assert!(s[kept - 1] >= rho / 2.0 - 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn main_algorithm_fits_the_cone(n1 in 3usize..9, n2 in 3usize..9, sigma in 0.05f64..2.0, seed in any::<u64>()) {
        let theta = gen_theta2(n1.max(n2), 2.0).unwrap();
        let theta = DenseMatrix::from_fn(n1, n2, |i, j| theta[(i, j)]);
        let mut rng = SeededRng::new(seed, 0);
        let (shuffled, _, _) = random_shuffle(&theta, &mut rng);
        let y = shuffled.add(&gaussian_noise(n1, n2, sigma, &mut rng).unwrap()).unwrap();
        let out = main_algorithm_detailed(&y, None, &tight()).unwrap();
        prop_assert!(out.converged);
        let sorted = apply_permutations(&out.estimate, &out.row_perm, &out.col_perm).unwrap();
        prop_assert!(second_difference(&sorted).unwrap().min_entry() >= -1e-9);
        prop_assert!((out.estimate.dist_sq(&y).unwrap() - out.residual).abs() <= 1e-9 * (1.0 + out.residual));
    }

    #[test]
    fn exhaustive_search_never_loses(n1 in 2usize..4, n2 in 2usize..5, sigma in 0.05f64..2.0, cap in prop::option::of(0.5f64..3.0), seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed, 0);
        let y = gaussian_noise(n1, n2, sigma, &mut rng).unwrap();
        let main = main_algorithm_detailed(&y, cap, &tight()).unwrap();
        let gls = brute_force_gls_detailed(&y, cap, &tight()).unwrap();
        prop_assert!(main.converged && gls.converged);
        prop_assert!(gls.residual <= main.residual + 1e-8 * (1.0 + main.residual));
    }
}
