use convex_bicluster::linalg::SymmetricOperator;
use convex_bicluster::sylvester::{kron_oracle, solve_sylvester, sylvester_residual};
use ndarray::Array2;
use proptest::prelude::*;

fn matrix(n: usize, p: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-3.0..3.0f64, n * p).prop_map(move |v| Array2::from_shape_vec((n, p), v).unwrap())
}

/// `(M, N, G1, G2)` with `M = I + B B^T` and `N = C C^T`.
fn instance() -> impl Strategy<Value = (SymmetricOperator, SymmetricOperator, Array2<f64>, Array2<f64>)> {
    (1usize..9, 1usize..9).prop_flat_map(|(n, p)| {
        (matrix(n, n), matrix(p, p), matrix(n, p), matrix(n, p)).prop_map(move |(b, c, g1, g2)| {
            let m = Array2::<f64>::eye(n) + b.dot(&b.t());
            let nn = c.dot(&c.t());
            let sym = |a: Array2<f64>| SymmetricOperator::new((&a + &a.t()) * 0.5).unwrap();
            (sym(m), sym(nn), g1, g2)
        })
    })
}

fn fro(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn residual_is_small((m, n, g, _g2) in instance()) {
        let a = solve_sylvester(&m, &n, &g).unwrap();
        prop_assert!(sylvester_residual(&m, &n, &a, &g) <= 1e-8 * fro(&g).max(1.0));
    }

    #[test]
    fn agrees_with_kronecker_system((m, n, g, _g2) in instance()) {
        let a = solve_sylvester(&m, &n, &g).unwrap();
        let b = kron_oracle(&m, &n, &g).unwrap();
        prop_assert!(fro(&(&a - &b)) <= 1e-8 * fro(&b).max(1e-300));
    }

    #[test]
    fn linear_in_the_right_hand_side((m, n, g1, g2) in instance(), alpha in -2.0..2.0f64, beta in -2.0..2.0f64) {
        let combo = &g1 * alpha + &g2 * beta;
        let lhs = solve_sylvester(&m, &n, &combo).unwrap();
        let rhs = solve_sylvester(&m, &n, &g1).unwrap() * alpha + solve_sylvester(&m, &n, &g2).unwrap() * beta;
        prop_assert!(fro(&(&lhs - &rhs)) <= 1e-8 * fro(&rhs).max(1.0));
    }

    #[test]
    fn repeated_solves_are_bitwise_identical((m, n, g, _g2) in instance()) {
        prop_assert_eq!(solve_sylvester(&m, &n, &g).unwrap(), solve_sylvester(&m, &n, &g).unwrap());
    }
}

#[test]
fn commuting_scaled_identities() {
    let m = SymmetricOperator::new(Array2::eye(2) * 2.0).unwrap();
    let n = SymmetricOperator::new(Array2::eye(2) * 3.0).unwrap();
    let g = Array2::ones((2, 2));
    for a in [solve_sylvester(&m, &n, &g).unwrap(), kron_oracle(&m, &n, &g).unwrap()] {
        for v in a.iter() {
            assert!((v - 0.2).abs() < 1e-14);
        }
    }
}
