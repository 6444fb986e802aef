use monge::geometry::{decompose, is_anti_monge, low_rank_approx, variation, variation_l1, worst_case_matrix};
use monge::linalg::{
    apply_permutations, d_singular_values, diff_pinv, difference_operator, double_center, full_svd,
    second_difference, symmetric_eigen, DenseMatrix, Permutation,
};
use monge::synthetic::{random_anti_monge, SeededRng};
use proptest::prelude::*;

fn matrix(rows: std::ops::RangeInclusive<usize>, cols: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = DenseMatrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| DenseMatrix::new(r, c, v).unwrap())
    })
}

fn permutation(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| Permutation::new(v).unwrap())
}

fn shift(n1: usize, n2: usize, rows: &[f64], cols: &[f64]) -> DenseMatrix {
    DenseMatrix::from_fn(n1, n2, |i, j| rows[i % rows.len()] + cols[j % cols.len()])
}

fn cone_member() -> impl Strategy<Value = DenseMatrix> {
    (2usize..12, 2usize..12, 0.01f64..5.0, any::<u64>())
        .prop_map(|(n1, n2, scale, seed)| random_anti_monge(n1, n2, scale, &mut SeededRng::new(seed, 0)).unwrap().matrix)
}

proptest! {
    #[test]
    fn permutations_compose(
        m in matrix(5..=5, 6..=6),
        p1 in permutation(5), p2 in permutation(6),
        q1 in permutation(5), q2 in permutation(6),
    ) {
        let twice = apply_permutations(&apply_permutations(&m, &p1, &p2).unwrap(), &q1, &q2).unwrap();
        let once = apply_permutations(&m, &p1.compose(&q1), &p2.compose(&q2)).unwrap();
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn second_difference_is_linear(
        (m, n) in (2usize..8, 2usize..8).prop_flat_map(|(r, c)| (
            prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| DenseMatrix::new(r, c, v).unwrap()),
            prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| DenseMatrix::new(r, c, v).unwrap()),
        )),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let lhs = second_difference(&m.scale(a).add(&n.scale(b)).unwrap()).unwrap();
        let rhs = second_difference(&m).unwrap().scale(a).add(&second_difference(&n).unwrap().scale(b)).unwrap();
        prop_assert!(lhs.dist_sq(&rhs).unwrap().sqrt() <= 1e-12 * (1.0 + lhs.frobenius_norm()));
    }

    #[test]
    fn second_difference_kills_shifts(
        n1 in 2usize..9, n2 in 2usize..9,
        rows in prop::collection::vec(-100.0f64..100.0, 9),
        cols in prop::collection::vec(-100.0f64..100.0, 9),
    ) {
        let s = shift(n1, n2, &rows, &cols);
        prop_assert!(second_difference(&s).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn double_center_is_idempotent(m in matrix(1..=8, 1..=8)) {
        let once = double_center(&m);
        let twice = double_center(&once);
        prop_assert!(once.dist_sq(&twice).unwrap().sqrt() <= 1e-12 * (1.0 + m.frobenius_norm()));
    }

    #[test]
    fn anti_monge_test_ignores_shifts(
        m in matrix(2..=7, 2..=7),
        rows in prop::collection::vec(-100.0f64..100.0, 7),
        cols in prop::collection::vec(-100.0f64..100.0, 7),
    ) {
        let (n1, n2) = m.shape();
        let shifted = m.add(&shift(n1, n2, &rows, &cols)).unwrap();
        // Second differences of the shifted matrix are only rounded, so a
        // matrix well inside or well outside the cone keeps its verdict.
        let sd = second_difference(&m).unwrap();
        prop_assume!(sd.as_slice().iter().all(|x| x.abs() > 1e-9));
        prop_assert_eq!(is_anti_monge(&m, 0.0).unwrap(), is_anti_monge(&shifted, 0.0).unwrap());
    }

    #[test]
    fn telescoping_on_the_cone(m in cone_member()) {
        prop_assert!(is_anti_monge(&m, 0.0).unwrap() || is_anti_monge(&m, 1e-12 * m.max_abs()).unwrap());
        let v = variation(&m);
        prop_assert!((v - variation_l1(&m)).abs() <= 1e-10 * (1.0 + v));
    }

    #[test]
    fn decomposition_reassembles_anything(m in matrix(1..=9, 1..=9)) {
        let back = decompose(&m).reassemble();
        prop_assert!(back.dist_sq(&m).unwrap().sqrt() <= 1e-12 * (1.0 + m.frobenius_norm()));
    }

    #[test]
    fn decomposition_of_cone_members(m in cone_member()) {
        let b = decompose(&m).isotone_part;
        let (n1, n2) = b.shape();
        let tol = 1e-12 * (1.0 + m.max_abs());
        prop_assert!(b.min_entry() >= -tol);
        prop_assert!(is_anti_monge(&b, tol).unwrap());
        for i in 0..n1 {
            for j in 0..n2 {
                if i + 1 < n1 { prop_assert!(b[(i + 1, j)] >= b[(i, j)] - tol); }
                if j + 1 < n2 { prop_assert!(b[(i, j + 1)] >= b[(i, j)] - tol); }
            }
        }
        prop_assert!((b[(n1 - 1, n2 - 1)] - variation(&m)).abs() <= 10.0 * tol);
    }

    #[test]
    fn low_rank_error_bound(
        n in prop::sample::select(vec![8usize, 16, 32]),
        r in 1usize..=8,
        scale in 0.01f64..5.0,
        seed in any::<u64>(),
    ) {
        let m = random_anti_monge(n, n, scale, &mut SeededRng::new(seed, 0)).unwrap().matrix;
        let v = variation(&m);
        let err = low_rank_approx(&m, r).unwrap().dist_sq(&m).unwrap();
        prop_assert!(err <= 2.0 * (n * n) as f64 * v * v / (r * r * r) as f64);
    }
}

#[test]
fn pinv_identities_and_spectrum() {
    for n in 2..=50usize {
        let d = difference_operator(n).unwrap();
        let p = diff_pinv(n).unwrap();
        let dp = d.matmul(&p).unwrap();
        assert!(dp.dist_sq(&DenseMatrix::identity(n - 1)).unwrap().sqrt() <= 1e-10 * n as f64);
        let pd = p.matmul(&d).unwrap();
        let center = DenseMatrix::from_fn(n, n, |i, j| f64::from(i == j) - 1.0 / n as f64);
        for (a, b) in pd.as_slice().iter().zip(center.as_slice()) {
            assert!((a - b).abs() <= 1e-10);
        }
        let mut numeric = full_svd(&d).unwrap().singular_values;
        numeric.reverse();
        for (a, b) in numeric.iter().zip(d_singular_values(n).unwrap()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn worst_case_tail_lower_bound() {
    // Each eigenvalue is at least V0 n / (pi^2 i^2), so the tail beyond r
    // is at least (V0 n / pi^2)^2 * sum_{i=r+1}^{n-1} i^-4, and the sum is
    // at least ((r+1)^-3 - n^-3) / 3.
    let pi2 = std::f64::consts::PI.powi(2);
    for n in [8usize, 16, 32, 64] {
        let v0 = 2.5;
        let (mu, _) = symmetric_eigen(&worst_case_matrix(n, v0).unwrap()).unwrap();
        for r in 0..n - 1 {
            let tail: f64 = mu[r..].iter().map(|m| m * m).sum();
            let bound = (v0 * n as f64 / pi2).powi(2) / 3.0 * (((r + 1) as f64).powi(-3) - (n as f64).powi(-3));
            assert!(tail >= bound * (1.0 - 1e-9), "n={n} r={r}: {tail} < {bound}");
        }
    }
}
