mod common;

use convex_bicluster::admm::{
    max_row_sum_deviation, objective, residuals, AdmmConfig, AdmmEngine, Initialization,
};
use convex_bicluster::data::DataMatrix;
use convex_bicluster::prox::NormKind;
use convex_bicluster::sylvester::sylvester_residual;
use convex_bicluster::weights::{build_knn_weights, full_edge_set, GraphAxis, WeightedEdgeSet};
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{dual_oracle, max_abs_diff, random_matrix, simplex_rows, Edges, Penalty, Problem};

fn edges_of(set: &WeightedEdgeSet) -> Edges {
    set.iter().map(|((i, j), w)| (i, j, w)).collect()
}

fn knn(x: &DataMatrix, m: usize) -> (WeightedEdgeSet, WeightedEdgeSet) {
    (
        build_knn_weights(x, GraphAxis::Row, m, 0.1).unwrap(),
        build_knn_weights(x, GraphAxis::Column, m, 0.1).unwrap(),
    )
}

fn fro(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_a_update_solves_its_sylvester_system(
        seed in 0u64..1000,
        g1 in 0.0..3.0f64,
        g2 in 0.0..3.0f64,
        compositional in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = if compositional { simplex_rows(&mut rng, 7, 5) } else { random_matrix(&mut rng, 7, 5, 3.0) };
        let x = DataMatrix::new(x).unwrap();
        let (rows, cols) = knn(&x, 2);
        let cfg = if compositional { AdmmConfig::compositional() } else { AdmmConfig::general() };
        let engine = AdmmEngine::new(&x, &rows, &cols, &cfg).unwrap();
        let (m, n) = engine.operators();
        let mut state = engine.initial_state(Initialization::Random { seed }).unwrap();
        for _ in 0..40 {
            let g = engine.assemble_g(&state);
            engine.step(&mut state, g1, g2).unwrap();
            prop_assert!(sylvester_residual(m, n, &state.a, &g) <= 1e-8 * fro(&g).max(1.0));
        }
    }

    #[test]
    fn row_permutation_permutes_the_fit(seed in 0u64..1000, perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, 6, 4, 2.0);
        let data = DataMatrix::new(x.clone()).unwrap();
        let (rows, cols) = knn(&data, 2);
        // row i of x becomes row perm[i] of the permuted matrix
        let mut xp = Array2::zeros(x.dim());
        for (i, &pi) in perm.iter().enumerate() {
            xp.row_mut(pi).assign(&x.row(i));
        }
        let permuted = DataMatrix::new(xp).unwrap();
        let rows_p = rows.permuted(&perm).unwrap();
        let mut cfg = AdmmConfig::general().with_gammas(0.7, 0.4);
        cfg.tol_primal = 1e-11;
        cfg.tol_dual = 1e-11;
        cfg.max_iters = 100_000;
        let a = AdmmEngine::new(&data, &rows, &cols, &cfg).unwrap().fit(Initialization::Differences).unwrap();
        let b = AdmmEngine::new(&permuted, &rows_p, &cols, &cfg).unwrap().fit(Initialization::Differences).unwrap();
        prop_assert!(a.converged && b.converged);
        for (i, &pi) in perm.iter().enumerate() {
            for j in 0..4 {
                prop_assert!((a.a_hat()[[i, j]] - b.a_hat()[[pi, j]]).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn zero_penalty_reproduces_the_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = DataMatrix::new(random_matrix(&mut rng, 9, 6, 4.0)).unwrap();
    let (rows, cols) = knn(&x, 3);
    let fit = AdmmEngine::new(&x, &rows, &cols, &AdmmConfig::general())
        .unwrap()
        .fit(Initialization::Differences)
        .unwrap();
    assert!(max_abs_diff(fit.a_hat(), x.values()) <= 1e-6);
    // V starts at the row differences, so the first primal residual is already zero
    assert!(fit.primal_residual <= 1e-10);
}

#[test]
fn large_penalty_on_complete_graphs_gives_the_grand_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = DataMatrix::new(random_matrix(&mut rng, 6, 5, 2.0)).unwrap();
    let mut cfg = AdmmConfig::general().with_gammas(100.0, 100.0);
    cfg.tol_primal = 1e-9;
    cfg.tol_dual = 1e-9;
    cfg.max_iters = 100_000;
    let fit = AdmmEngine::new(&x, &full_edge_set(6).unwrap(), &full_edge_set(5).unwrap(), &cfg)
        .unwrap()
        .fit(Initialization::Differences)
        .unwrap();
    let mean = x.values().mean().unwrap();
    for v in fit.a_hat().iter() {
        assert!((v - mean).abs() <= 1e-4);
    }
}

#[test]
fn different_starts_reach_the_same_solution() {
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = DataMatrix::new(random_matrix(&mut rng, 20, 10, 3.0)).unwrap();
        let (rows, cols) = knn(&x, 4);
        let mut cfg = AdmmConfig::general().with_gammas(0.5, 0.8);
        cfg.tol_primal = 1e-8;
        cfg.tol_dual = 1e-8;
        cfg.max_iters = 100_000;
        let engine = AdmmEngine::new(&x, &rows, &cols, &cfg).unwrap();
        let a = engine.fit(Initialization::Random { seed: 1 }).unwrap();
        let b = engine.fit(Initialization::Random { seed: 2 }).unwrap();
        assert!(a.converged && b.converged);
        assert!(max_abs_diff(a.a_hat(), b.a_hat()) <= 1e-4);
    }
}

#[test]
fn converged_fits_are_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for compositional in [false, true] {
        let x = if compositional {
            simplex_rows(&mut rng, 10, 6)
        } else {
            random_matrix(&mut rng, 10, 6, 3.0)
        };
        let x = DataMatrix::new(x).unwrap();
        let (rows, cols) = knn(&x, 3);
        let cfg = if compositional {
            AdmmConfig::compositional().with_gammas(0.05, 0.05)
        } else {
            AdmmConfig::general().with_gammas(1.0, 1.0)
        };
        let fit = AdmmEngine::new(&x, &rows, &cols, &cfg)
            .unwrap()
            .fit(Initialization::Differences)
            .unwrap();
        assert!(fit.converged);
        assert!(fit.primal_residual <= cfg.tol_primal);
        if compositional {
            assert!(max_row_sum_deviation(fit.a_hat()) <= 1e-6);
        }
    }
}

#[test]
fn residuals_match_their_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = DataMatrix::new(simplex_rows(&mut rng, 6, 4)).unwrap();
    let (rows, cols) = knn(&x, 2);
    let cfg = AdmmConfig::compositional();
    let engine = AdmmEngine::new(&x, &rows, &cols, &cfg).unwrap();
    let mut state = engine.initial_state(Initialization::Random { seed: 3 }).unwrap();
    for _ in 0..3 {
        engine.step(&mut state, 0.3, 0.3).unwrap();
    }
    let prev = state.clone();
    engine.step(&mut state, 0.3, 0.3).unwrap();
    let (primal, dual) = residuals(&state, &prev, &rows, &cols, &cfg);

    let norm = |v: Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut want_primal: f64 = 0.0;
    for (l, &(i, j)) in rows.edges().iter().enumerate() {
        want_primal = want_primal.max(norm((0..4).map(|c| state.v[[l, c]] - state.a[[i, c]] + state.a[[j, c]]).collect()));
    }
    for (k, &(i, j)) in cols.edges().iter().enumerate() {
        want_primal = want_primal.max(norm((0..6).map(|r| state.z[[k, r]] - state.a[[r, i]] + state.a[[r, j]]).collect()));
    }
    want_primal = want_primal.max(norm(state.a.sum_axis(Axis(1)).iter().map(|s| 1.0 - s).collect()));
    let dv = (0..rows.len())
        .map(|l| norm((0..4).map(|c| state.v[[l, c]] - prev.v[[l, c]]).collect()))
        .fold(0.0, f64::max);
    let dz = (0..cols.len())
        .map(|k| norm((0..6).map(|r| state.z[[k, r]] - prev.z[[k, r]]).collect()))
        .fold(0.0, f64::max);
    assert!((primal - want_primal).abs() <= 1e-12);
    assert!((dual - (cfg.nu1 * dv).max(cfg.nu2 * dz)).abs() <= 1e-12);
    assert_eq!(residuals(&state, &state, &rows, &cols, &cfg).1, 0.0);
}

#[test]
fn objective_on_a_two_by_two_instance() {
    let x = ndarray::array![[1.0, 2.0], [3.0, 5.0]];
    let a = ndarray::array![[1.5, 2.0], [2.0, 4.0]];
    let rows = WeightedEdgeSet::new(2, [(0, 1, 0.5)]).unwrap();
    let cols = WeightedEdgeSet::new(2, [(0, 1, 2.0)]).unwrap();
    // fit: 0.5 * (0.25 + 0 + 1 + 1) = 1.125
    // rows: 0.5 * ||(-0.5, -2)|| = 0.5 * sqrt(4.25); cols: 2 * ||(-0.5, -2)|| = 2 * sqrt(4.25)
    let want = 1.125 + 1.5 * 0.5 * 4.25f64.sqrt() + 2.0 * 2.0 * 4.25f64.sqrt();
    let got = objective(&x, &a, &rows, &cols, 1.5, 2.0, NormKind::L2);
    assert!((got - want).abs() <= 1e-12);
}

fn oracle_case(seed: u64, q: Penalty, compositional: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = if compositional {
        simplex_rows(&mut rng, 6, 4)
    } else {
        random_matrix(&mut rng, 6, 4, 2.0)
    };
    let data = DataMatrix::new(x).unwrap();
    let (rows, cols) = knn(&data, 2);
    let (g1, g2) = if compositional { (0.02, 0.03) } else { (0.6, 0.4) };
    let mut cfg = if compositional {
        AdmmConfig::compositional()
    } else {
        AdmmConfig::general()
    }
    .with_gammas(g1, g2);
    cfg.norm = match q {
        Penalty::L1 => NormKind::L1,
        Penalty::L2 => NormKind::L2,
    };
    cfg.tol_primal = 1e-9;
    cfg.tol_dual = 1e-9;
    cfg.max_iters = 200_000;
    let fit = AdmmEngine::new(&data, &rows, &cols, &cfg)
        .unwrap()
        .fit(Initialization::Differences)
        .unwrap();
    assert!(fit.converged);
    let (re, ce) = (edges_of(&rows), edges_of(&cols));
    let pr = Problem {
        x: data.values(),
        rows: &re,
        cols: &ce,
        gamma1: g1,
        gamma2: g2,
        q,
        compositional,
    };
    let oracle = dual_oracle(&pr, 1e-10, 400_000);
    assert!(oracle.gap <= 1e-8, "oracle gap {}", oracle.gap);
    assert!((pr.objective(fit.a_hat()) - oracle.objective).abs() <= 1e-6);
    assert!(max_abs_diff(fit.a_hat(), &oracle.a) <= 1e-4);
}

#[test]
fn matches_the_dual_oracle() {
    oracle_case(1, Penalty::L2, false);
    oracle_case(2, Penalty::L1, false);
}

#[test]
fn matches_the_dual_oracle_with_the_row_sum_constraint() {
    oracle_case(3, Penalty::L2, true);
    oracle_case(4, Penalty::L1, true);
}
